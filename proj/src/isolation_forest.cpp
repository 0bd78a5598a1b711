#include "rgmm/isolation_forest.hpp"

#include "rgmm/errors.hpp"
#include "rgmm/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rgmm {

namespace {

constexpr double kEulerGamma = 0.5772156649;

double harmonic(double i) { return i <= 1.0 ? 1.0 : std::log(i) + kEulerGamma; }

struct TreeBuilder {
  const Eigen::MatrixXd& x;
  int max_depth;
  Rng& rng;
  IsolationTree& tree;

  int build(std::vector<int>& rows, std::size_t begin, std::size_t end, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes[id].size = static_cast<int>(end - begin);
    if (end - begin <= 1 || depth >= max_depth) return id;

    std::vector<int> splittable;
    std::vector<std::pair<double, double>> ranges(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
      double lo = x(rows[begin], f), hi = lo;
      for (std::size_t i = begin + 1; i < end; ++i) {
        lo = std::min(lo, x(rows[i], f));
        hi = std::max(hi, x(rows[i], f));
      }
      ranges[static_cast<std::size_t>(f)] = {lo, hi};
      if (hi > lo) splittable.push_back(static_cast<int>(f));
    }
    if (splittable.empty()) return id;

    std::uniform_int_distribution<std::size_t> pick(0, splittable.size() - 1);
    const int feature = splittable[pick(rng)];
    const auto [lo, hi] = ranges[static_cast<std::size_t>(feature)];
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double split = lo + unif(rng) * (hi - lo);
    if (!(split > lo && split < hi)) split = lo + 0.5 * (hi - lo);
    if (!(split > lo && split < hi)) return id;  // adjacent doubles, no interior point

    auto mid = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                              rows.begin() + static_cast<std::ptrdiff_t>(end),
                              [&](int r) { return x(r, feature) < split; });
    const auto m = static_cast<std::size_t>(mid - rows.begin());

    tree.nodes[id].feature = feature;
    tree.nodes[id].split = split;
    const int left = build(rows, begin, m, depth + 1);
    const int right = build(rows, m, end, depth + 1);
    tree.nodes[id].left = left;
    tree.nodes[id].right = right;
    return id;
  }
};

}  // namespace

double average_path_length(double n) {
  if (n <= 1.0) return 0.0;
  return 2.0 * harmonic(n - 1.0) - 2.0 * (n - 1.0) / n;
}

double IsolationTree::path_length(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  int node = 0;
  int depth = 0;
  while (!nodes[node].is_leaf()) {
    node = x(nodes[node].feature) < nodes[node].split ? nodes[node].left : nodes[node].right;
    ++depth;
  }
  return depth + average_path_length(nodes[node].size);
}

int IsolationTree::depth() const {
  // nodes are stored in preorder; recompute depths iteratively
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (!nodes[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

IsolationForest IsolationForest::fit(const Eigen::MatrixXd& x, const IfConfig& cfg) {
  if (cfg.n_trees < 1) throw ValidationError("isolation forest needs at least one tree");
  if (cfg.subsample_size < 2) throw ValidationError("isolation forest subsample must be >= 2");
  if (x.rows() < 2) throw ValidationError("isolation forest needs at least two rows");
  if (!x.allFinite())
    throw ValidationError("isolation forest input has missing entries; impute first");

  IsolationForest forest;
  forest.dim_ = static_cast<int>(x.cols());
  forest.psi_ = std::min<int>(cfg.subsample_size, static_cast<int>(x.rows()));
  forest.max_depth_ = cfg.max_depth.value_or(
      static_cast<int>(std::ceil(std::log2(static_cast<double>(forest.psi_)))));

  const int n = static_cast<int>(x.rows());
  forest.trees_.resize(static_cast<std::size_t>(cfg.n_trees));
  for (int t = 0; t < cfg.n_trees; ++t) {
    Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(t)}));
    IsolationTree& tree = forest.trees_[static_cast<std::size_t>(t)];
    // partial Fisher-Yates: first psi entries are a uniform sample without replacement
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = 0; i < forest.psi_; ++i) {
      std::uniform_int_distribution<int> pick(i, n - 1);
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
    }
    perm.resize(static_cast<std::size_t>(forest.psi_));
    tree.sample = perm;
    TreeBuilder builder{x, forest.max_depth_, rng, tree};
    builder.build(perm, 0, perm.size(), 0);
  }
  return forest;
}

IsolationForest IsolationForest::fit(const FeatureMatrix& m, const IfConfig& cfg) {
  if (!m.fully_observed())
    throw ValidationError(fmt::format(
        "isolation forest input has {} missing entries; impute first", m.missing_count()));
  return fit(m.values(), cfg);
}

double IsolationForest::score(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  if (x.size() != dim_) throw ValidationError("isolation forest: dimension mismatch");
  double total = 0.0;
  for (const auto& t : trees_) total += t.path_length(x);
  const double mean_path = total / static_cast<double>(trees_.size());
  return std::exp2(-mean_path / average_path_length(psi_));
}

Eigen::VectorXd IsolationForest::score_all(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd s(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) s(r) = score(x.row(r));
  return s;
}

}  // namespace rgmm
