#pragma once

#include "rgmm/data_model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace rgmm {

struct IfConfig {
  int n_trees = 100;
  int subsample_size = 256;
  /// Defaults to ceil(log2(effective subsample size)).
  std::optional<int> max_depth;
  std::uint64_t seed = 0;
};

/// Average unsuccessful-search path length in a binary search tree of n points.
double average_path_length(double n);

struct IsolationNode {
  int feature = -1;  // -1 marks a leaf
  double split = 0.0;
  int left = -1;
  int right = -1;
  int size = 0;
  bool is_leaf() const { return feature < 0; }
};

struct IsolationTree {
  std::vector<IsolationNode> nodes;  // nodes[0] is the root
  std::vector<int> sample;           // row indices drawn for this tree

  double path_length(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  int depth() const;
};

class IsolationForest {
 public:
  /// Rejects matrices with missing (or non-finite) entries.
  static IsolationForest fit(const Eigen::MatrixXd& x, const IfConfig& cfg);
  static IsolationForest fit(const FeatureMatrix& m, const IfConfig& cfg);

  /// s = 2^(-E[h(x)] / c(psi)), in (0, 1).
  double score(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  Eigen::VectorXd score_all(const Eigen::MatrixXd& x) const;

  const std::vector<IsolationTree>& trees() const { return trees_; }
  int subsample_size() const { return psi_; }
  int max_depth() const { return max_depth_; }

 private:
  std::vector<IsolationTree> trees_;
  int psi_ = 0;
  int max_depth_ = 0;
  int dim_ = 0;
};

}  // namespace rgmm
