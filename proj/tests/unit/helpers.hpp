#pragma once

#include "rgmm/data_model.hpp"
#include "rgmm/random.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace rgmm::test {

inline std::vector<ColumnDescriptor> s2_columns(int d, const std::string& indicator = "X") {
  std::vector<ColumnDescriptor> cols;
  for (int c = 0; c < d; ++c) cols.push_back({Sensor::S2, indicator, Statistic::Median, c, std::nullopt});
  return cols;
}

inline std::vector<std::string> row_ids(int n) {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("r" + std::to_string(i));
  return ids;
}

inline FeatureMatrix complete_matrix(const Eigen::MatrixXd& x) {
  return FeatureMatrix::complete(x, s2_columns(static_cast<int>(x.cols())), row_ids(static_cast<int>(x.rows())));
}

inline FeatureMatrix masked_matrix(const Eigen::MatrixXd& x, const BoolMatrix& obs) {
  return FeatureMatrix(x, obs, s2_columns(static_cast<int>(x.cols())), row_ids(static_cast<int>(x.rows())));
}

inline Eigen::MatrixXd gaussian_block(int n, int d, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> z(0.0, sd);
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = z(rng);
  return x;
}

/// Each entry missing with probability p; every row keeps one observed entry.
inline BoolMatrix mcar_mask(int n, int d, double p, Rng& rng) {
  std::bernoulli_distribution drop(p);
  BoolMatrix obs(n, d);
  for (int i = 0; i < n; ++i) {
    do {
      for (int j = 0; j < d; ++j) obs(i, j) = !drop(rng);
    } while (!obs.row(i).any());
  }
  return obs;
}

inline Eigen::MatrixXd random_spd(int d, double lo, double hi, Rng& rng) {
  Eigen::MatrixXd a = gaussian_block(d, d, rng);
  Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd l(d);
  for (int i = 0; i < d; ++i) l(i) = u(rng);
  Eigen::MatrixXd s = q * l.asDiagonal() * q.transpose();
  return 0.5 * (s + s.transpose());
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  std::filesystem::path p = std::filesystem::path(RGMM_TEST_TMP) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace rgmm::test
