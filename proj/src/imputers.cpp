#include "rgmm/imputers.hpp"

#include "rgmm/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rgmm {

namespace {

// Observed entries copied from the input, missing ones taken from `filled`.
ImputationResult assemble(const FeatureMatrix& m, const Eigen::MatrixXd& filled, std::string method) {
  Eigen::MatrixXd v = m.values();
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      if (!m.is_observed(r, c)) v(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                                   filled(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  ImputationResult out{FeatureMatrix::complete(std::move(v), m.columns(), m.row_ids()),
                       !m.observed(), std::move(method), nullptr, {}};
  return out;
}

Eigen::MatrixXd unscale_all(const Eigen::MatrixXd& scaled, const ScalingTransform& t) {
  Eigen::MatrixXd out = scaled;
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c)
      out(r, c) = t.unscale(static_cast<std::size_t>(c), out(r, c));
  return out;
}

}  // namespace

ImputationResult impute_gmm(const FeatureMatrix& m, const EmConfig& em, const RobustConfig& robust) {
  const std::string method = robust.enabled ? "rgmm" : "gmm";
  if (m.fully_observed()) return assemble(m, m.values(), method);
  const ScalingTransform t = fit_scaling(m);
  const FeatureMatrix scaled = apply_scaling(m, t);
  Selection sel = select_k(scaled, em.k_range, em, robust);
  const Eigen::MatrixXd filled = unscale_all(impute(scaled, sel.report), t);
  ImputationResult out = assemble(m, filled, method);
  out.fit = std::make_shared<const FitReport>(std::move(sel.report));
  return out;
}

ImputationResult impute_knn(const FeatureMatrix& m, int k) {
  if (k < 1) throw ValidationError("KNN needs k >= 1");
  if (m.fully_observed()) return assemble(m, m.values(), "knn");
  const ScalingTransform t = fit_scaling(m);
  const FeatureMatrix scaled = apply_scaling(m, t);
  const Eigen::MatrixXd& x = scaled.values();
  const auto& obs = scaled.observed();
  const auto n = x.rows();
  const auto d = x.cols();

  Eigen::VectorXd col_mean(d);
  for (Eigen::Index c = 0; c < d; ++c) {
    double s = 0.0;
    int cnt = 0;
    for (Eigen::Index r = 0; r < n; ++r)
      if (obs(r, c)) {
        s += x(r, c);
        ++cnt;
      }
    col_mean(c) = s / cnt;
  }

  // Zero where missing so masked dot products skip them.
  const Eigen::MatrixXd xz = obs.select(x, 0.0);
  const Eigen::MatrixXd mask = obs.cast<double>();

  Eigen::MatrixXd filled = x;
  ImputationResult out;
  KnnDiagnostics diag;
  std::vector<double> dist(static_cast<std::size_t>(n));
  std::vector<int> donors;
  for (Eigen::Index r = 0; r < n; ++r) {
    if (obs.row(r).all()) continue;
    // Squared distance over mutually observed coordinates, rescaled by D / n_shared.
    const Eigen::VectorXd shared = mask * mask.row(r).transpose();
    const Eigen::VectorXd cross = xz * xz.row(r).transpose();
    const Eigen::VectorXd other_sq = (xz.array().square().matrix()) * mask.row(r).transpose();
    const Eigen::VectorXd self_sq = mask * xz.row(r).array().square().matrix().transpose();
    for (Eigen::Index o = 0; o < n; ++o) {
      if (o == r || shared(o) <= 0.0) {
        dist[static_cast<std::size_t>(o)] = std::numeric_limits<double>::infinity();
        continue;
      }
      const double d2 = std::max(0.0, other_sq(o) + self_sq(o) - 2.0 * cross(o));
      dist[static_cast<std::size_t>(o)] = std::sqrt(d2 * static_cast<double>(d) / shared(o));
    }
    for (Eigen::Index c = 0; c < d; ++c) {
      if (obs(r, c)) continue;
      donors.clear();
      for (Eigen::Index o = 0; o < n; ++o)
        if (obs(o, c) && std::isfinite(dist[static_cast<std::size_t>(o)])) donors.push_back(static_cast<int>(o));
      if (donors.empty()) {
        filled(r, c) = col_mean(c);
        diag.fallbacks.emplace_back(static_cast<int>(r), static_cast<int>(c));
        diag.neighbor_counts.push_back(0);
        continue;
      }
      const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), donors.size());
      std::partial_sort(donors.begin(), donors.begin() + static_cast<std::ptrdiff_t>(take), donors.end(),
                        [&](int a, int b) {
                          const double da = dist[static_cast<std::size_t>(a)];
                          const double db = dist[static_cast<std::size_t>(b)];
                          return da < db || (da == db && a < b);
                        });
      // Exact matches take precedence: average them and ignore the rest.
      double zero_sum = 0.0;
      int zero_cnt = 0;
      for (std::size_t i = 0; i < take; ++i)
        if (dist[static_cast<std::size_t>(donors[i])] == 0.0) {
          zero_sum += x(donors[i], c);
          ++zero_cnt;
        }
      if (zero_cnt > 0) {
        filled(r, c) = zero_sum / zero_cnt;
      } else {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < take; ++i) {
          const double w = 1.0 / dist[static_cast<std::size_t>(donors[i])];
          num += w * x(donors[i], c);
          den += w;
        }
        filled(r, c) = num / den;
      }
      diag.neighbor_counts.push_back(static_cast<int>(take));
    }
  }
  out = assemble(m, unscale_all(filled, t), "knn");
  out.knn = std::move(diag);
  return out;
}

ImputationResult impute_mean(const FeatureMatrix& m) {
  Eigen::MatrixXd filled = m.values();
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double s = 0.0;
    int cnt = 0;
    for (std::size_t r = 0; r < m.rows(); ++r)
      if (m.is_observed(r, c)) {
        s += m.values()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        ++cnt;
      }
    if (cnt == 0)
      throw ValidationError(fmt::format("column {} has no observed value", m.columns()[c].header()));
    double mean = s / cnt;
    const auto col = m.values().col(static_cast<Eigen::Index>(c));
    const auto seen = m.observed().col(static_cast<Eigen::Index>(c));
    const double lo = seen.select(col.array(), std::numeric_limits<double>::infinity()).minCoeff();
    const double hi = seen.select(col.array(), -std::numeric_limits<double>::infinity()).maxCoeff();
    if (lo == hi) mean = lo;
    for (std::size_t r = 0; r < m.rows(); ++r)
      if (!m.is_observed(r, c)) filled(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = mean;
  }
  return assemble(m, filled, "mean");
}

}  // namespace rgmm
