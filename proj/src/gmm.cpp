#include "rgmm/gmm.hpp"

#include "rgmm/errors.hpp"
#include "rgmm/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace rgmm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Turns per-(n,k) log joint densities into responsibilities; returns sum_n log p(x_n^o).
double normalize_log_responsibilities(const Eigen::MatrixXd& log_joint, Eigen::MatrixXd& resp) {
  resp.resize(log_joint.rows(), log_joint.cols());
  double total = 0.0;
  for (Eigen::Index n = 0; n < log_joint.rows(); ++n) {
    const double mx = log_joint.row(n).maxCoeff();
    if (!std::isfinite(mx))
      throw NumericalError(fmt::format("row {} has zero density under every component", n));
    double s = 0.0;
    for (Eigen::Index k = 0; k < log_joint.cols(); ++k) s += std::exp(log_joint(n, k) - mx);
    const double lse = mx + std::log(s);
    for (Eigen::Index k = 0; k < log_joint.cols(); ++k)
      resp(n, k) = std::exp(log_joint(n, k) - lse);
    total += lse;
  }
  return total;
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

GaussianComponent make_component(Eigen::VectorXd mean, Eigen::MatrixXd cov, int k) {
  try {
    return GaussianComponent(std::move(mean), std::move(cov));
  } catch (const NumericalError& e) {
    throw NumericalError(fmt::format("component {}: {}", k, e.what()), k);
  }
}

// Shared M-step kernel. mean_coef(n,k) weights the mean, cov_coef(n,k) the covariance.
MStepResult m_step_kernel(const FeatureMatrix& m, const EStepResult& e,
                          const Eigen::MatrixXd& mean_coef, const Eigen::MatrixXd& cov_coef,
                          const MStepOptions& opt) {
  const auto n = static_cast<Eigen::Index>(m.rows());
  const auto d = static_cast<Eigen::Index>(m.cols());
  const auto kk = e.responsibilities.cols();
  const double occupancy_floor =
      std::max(opt.min_occupancy, opt.min_occupancy_fraction * static_cast<double>(n));

  MStepResult out;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;
  std::vector<double> pis;
  std::vector<int> kept;

  for (Eigen::Index k = 0; k < kk; ++k) {
    const double nk = e.responsibilities.col(k).sum();
    const Eigen::VectorXd a = mean_coef.col(k);
    const Eigen::VectorXd b = cov_coef.col(k);
    const double sa = a.sum();
    const double sb = b.sum();
    if (nk < occupancy_floor || !(sa > 0.0) || !(sb > 0.0)) {
      if (opt.abort_on_collapse)
        throw NumericalError(
            fmt::format("component {} collapsed (occupancy {:.3g})", k, nk), static_cast<int>(k));
      out.dropped.push_back(static_cast<int>(k));
      continue;
    }
    const Eigen::MatrixXd& xk = e.completed[static_cast<std::size_t>(k)];
    Eigen::VectorXd mu = (xk.transpose() * a) / sa;
    const Eigen::MatrixXd centered = xk.rowwise() - mu.transpose();
    Eigen::MatrixXd cov = (centered.array().colwise() * b.array()).matrix().transpose() * centered;
    for (std::size_t p = 0; p < e.patterns.size(); ++p) {
      const auto& pat = e.patterns[p];
      if (pat.missing.empty()) continue;
      double sp = 0.0;
      for (int r : pat.rows) sp += b(r);
      const Eigen::MatrixXd& cc = e.cond_cov[static_cast<std::size_t>(k)][p];
      for (std::size_t i = 0; i < pat.missing.size(); ++i)
        for (std::size_t j = 0; j < pat.missing.size(); ++j)
          cov(pat.missing[i], pat.missing[j]) +=
              sp * cc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    cov = symmetrized(cov / sb);
    means.push_back(std::move(mu));
    covs.push_back(std::move(cov));
    pis.push_back(nk / static_cast<double>(n));
    kept.push_back(static_cast<int>(k));
  }
  if (kept.empty()) throw NumericalError("every component collapsed");

  if (opt.regularize) {
    out.regularization = regularize_components(covs, opt.scree_threshold);
  } else {
    out.regularization.intrinsic_dims.assign(covs.size(), static_cast<int>(d));
  }

  out.params.weights.resize(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    out.params.weights(static_cast<Eigen::Index>(i)) = pis[i];
    out.params.components.push_back(make_component(std::move(means[i]), std::move(covs[i]), kept[i]));
  }
  if (!out.dropped.empty()) out.params.weights /= out.params.weights.sum();
  return out;
}

}  // namespace

void GmmParams::validate() const {
  if (components.empty()) throw ValidationError("mixture has no components");
  if (weights.size() != static_cast<Eigen::Index>(components.size()))
    throw ValidationError("mixing weights and components differ in count");
  if ((weights.array() <= 0.0).any()) throw ValidationError("mixing weights must be positive");
  if (std::abs(weights.sum() - 1.0) > 1e-12) throw ValidationError("mixing weights must sum to 1");
  for (const auto& c : components)
    if (c.dim() != dim()) throw ValidationError("components differ in dimension");
}

std::vector<MissingPattern> group_patterns(const FeatureMatrix& m) {
  std::map<std::vector<bool>, std::size_t> index;
  std::vector<MissingPattern> out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::vector<bool> key(m.cols());
    for (std::size_t c = 0; c < m.cols(); ++c) key[c] = m.is_observed(r, c);
    auto [it, inserted] = index.emplace(key, out.size());
    if (inserted) {
      MissingPattern p;
      for (std::size_t c = 0; c < m.cols(); ++c)
        (key[c] ? p.observed : p.missing).push_back(static_cast<int>(c));
      out.push_back(std::move(p));
    }
    out[it->second].rows.push_back(static_cast<int>(r));
  }
  return out;
}

Eigen::MatrixXd EStepResult::padded_cov(int row, int k) const {
  const auto& pat = patterns[static_cast<std::size_t>(row_pattern[static_cast<std::size_t>(row)])];
  const int d = static_cast<int>(completed.front().cols());
  return pad_cov(cond_cov[static_cast<std::size_t>(k)]
                         [static_cast<std::size_t>(row_pattern[static_cast<std::size_t>(row)])],
                 pat.missing, d);
}

Eigen::MatrixXd EStepResult::aggregated_completion() const {
  Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(completed.front().rows(), completed.front().cols());
  for (std::size_t k = 0; k < completed.size(); ++k)
    agg += (completed[k].array().colwise() *
            responsibilities.col(static_cast<Eigen::Index>(k)).array())
               .matrix();
  return agg;
}

EStepResult e_step(const FeatureMatrix& m, const GmmParams& params) {
  return e_step(m, params, group_patterns(m));
}

EStepResult e_step(const FeatureMatrix& m, const GmmParams& params,
                   const std::vector<MissingPattern>& patterns) {
  if (params.dim() != static_cast<int>(m.cols()))
    throw ValidationError("parameters and matrix differ in dimension");
  const auto n = static_cast<Eigen::Index>(m.rows());
  const int kk = params.k();
  const Eigen::MatrixXd& x = m.values();

  EStepResult r;
  r.patterns = patterns;
  r.row_pattern.assign(m.rows(), -1);
  for (std::size_t p = 0; p < patterns.size(); ++p)
    for (int row : patterns[p].rows) r.row_pattern[static_cast<std::size_t>(row)] = static_cast<int>(p);

  Eigen::MatrixXd log_joint(n, kk);
  r.completed.assign(static_cast<std::size_t>(kk), x);
  r.cond_cov.assign(static_cast<std::size_t>(kk), std::vector<Eigen::MatrixXd>(patterns.size()));

  Eigen::VectorXd lp;
  Eigen::MatrixXd cm;
  for (int k = 0; k < kk; ++k) {
    const double log_pi = std::log(params.weights(k));
    Eigen::MatrixXd& xk = r.completed[static_cast<std::size_t>(k)];
    for (std::size_t p = 0; p < patterns.size(); ++p) {
      const auto& pat = patterns[p];
      try {
        MarginalFactor factor(params.components[static_cast<std::size_t>(k)], pat.observed,
                              pat.missing);
        Eigen::MatrixXd xo(static_cast<Eigen::Index>(pat.rows.size()),
                           static_cast<Eigen::Index>(pat.observed.size()));
        for (std::size_t i = 0; i < pat.rows.size(); ++i)
          for (std::size_t j = 0; j < pat.observed.size(); ++j)
            xo(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                x(pat.rows[i], pat.observed[j]);
        factor.evaluate(xo, lp, cm);
        for (std::size_t i = 0; i < pat.rows.size(); ++i) {
          const int row = pat.rows[i];
          log_joint(row, k) = log_pi + lp(static_cast<Eigen::Index>(i));
          for (std::size_t j = 0; j < pat.missing.size(); ++j)
            xk(row, pat.missing[j]) = cm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        r.cond_cov[static_cast<std::size_t>(k)][p] = factor.conditional_cov();
      } catch (const NumericalError& err) {
        throw NumericalError(fmt::format("component {}: {}", k, err.what()), k);
      }
    }
  }
  r.log_likelihood = normalize_log_responsibilities(log_joint, r.responsibilities);
  return r;
}

Eigen::MatrixXd complete_data_responsibilities(const Eigen::MatrixXd& x, const GmmParams& params) {
  Eigen::MatrixXd log_joint(x.rows(), params.k());
  for (int k = 0; k < params.k(); ++k) {
    const double log_pi = std::log(params.weights(k));
    for (Eigen::Index n = 0; n < x.rows(); ++n)
      log_joint(n, k) = log_pi + params.components[static_cast<std::size_t>(k)].log_pdf(x.row(n).transpose());
  }
  Eigen::MatrixXd resp;
  normalize_log_responsibilities(log_joint, resp);
  return resp;
}

std::vector<int> hard_labels(const Eigen::MatrixXd& responsibilities) {
  std::vector<int> labels(static_cast<std::size_t>(responsibilities.rows()));
  for (Eigen::Index n = 0; n < responsibilities.rows(); ++n) {
    Eigen::Index best = 0;
    responsibilities.row(n).maxCoeff(&best);
    labels[static_cast<std::size_t>(n)] = static_cast<int>(best);
  }
  return labels;
}

ScreeDecomposition scree_decompose(const Eigen::MatrixXd& cov, double scree_threshold) {
  if (cov.rows() != cov.cols() || cov.rows() == 0)
    throw ValidationError("scree_decompose needs a non-empty square matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(cov));
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const auto d = cov.rows();
  ScreeDecomposition out;
  out.eigenvalues = es.eigenvalues().reverse();
  out.eigenvectors = es.eigenvectors().rowwise().reverse();
  if (!out.eigenvalues.allFinite()) throw NumericalError("non-finite eigenvalues");

  if (d == 1) {
    out.intrinsic_dim = 1;
    return out;
  }
  const double top = out.eigenvalues(0);
  if (!(top > 0.0)) {
    out.intrinsic_dim = 1;
    return out;
  }
  // First (1-based) gap index from which every later gap stays below the
  // threshold; d + 1 when even the last gap is large.
  Eigen::Index start = d + 1;
  for (Eigen::Index j = d - 1; j >= 1; --j) {
    const double gap = (out.eigenvalues(j - 1) - out.eigenvalues(j)) / top;
    if (gap < scree_threshold)
      start = j;
    else
      break;
  }
  out.intrinsic_dim = static_cast<int>(std::max<Eigen::Index>(1, start - 1));
  return out;
}

namespace {

Eigen::MatrixXd reconstruct(const ScreeDecomposition& s, double b) {
  Eigen::VectorXd lam = s.eigenvalues;
  for (Eigen::Index j = s.intrinsic_dim; j < lam.size(); ++j) lam(j) = b;
  lam = lam.cwiseMax(kEigenFloor);
  return symmetrized(s.eigenvectors * lam.asDiagonal() * s.eigenvectors.transpose());
}

double tail_mean(const ScreeDecomposition& s) {
  const auto d = s.eigenvalues.size();
  if (s.intrinsic_dim >= d) return 0.0;
  return s.eigenvalues.tail(d - s.intrinsic_dim).mean();
}

}  // namespace

Eigen::MatrixXd regularize_covariance(const Eigen::MatrixXd& cov, double scree_threshold) {
  const ScreeDecomposition s = scree_decompose(cov, scree_threshold);
  return reconstruct(s, std::max(tail_mean(s), kEigenFloor));
}

RegularizationSummary regularize_components(std::vector<Eigen::MatrixXd>& covs,
                                            double scree_threshold) {
  RegularizationSummary out;
  std::vector<ScreeDecomposition> dec;
  double tail_sum = 0.0;
  Eigen::Index tail_count = 0;
  for (const auto& c : covs) {
    dec.push_back(scree_decompose(c, scree_threshold));
    const auto& s = dec.back();
    out.intrinsic_dims.push_back(s.intrinsic_dim);
    const auto t = s.eigenvalues.size() - s.intrinsic_dim;
    if (t > 0) {
      tail_sum += s.eigenvalues.tail(t).sum();
      tail_count += t;
    }
  }
  out.any_tail = tail_count > 0;
  out.shared_b = out.any_tail ? std::max(tail_sum / static_cast<double>(tail_count), kEigenFloor) : 0.0;
  for (std::size_t i = 0; i < covs.size(); ++i) {
    const bool needs_floor = (dec[i].eigenvalues.array() < kEigenFloor).any();
    if (out.any_tail || needs_floor) covs[i] = reconstruct(dec[i], out.shared_b);
  }
  return out;
}

double robust_weight(double score, double alpha, double th) {
  const double z = alpha * (score - th);
  if (z > 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

Eigen::VectorXd compute_weights(const Eigen::MatrixXd& completed, const RobustConfig& cfg,
                                const IsolationForest& forest) {
  if (!cfg.enabled) return Eigen::VectorXd::Ones(completed.rows());
  const Eigen::VectorXd scores = forest.score_all(completed);
  Eigen::VectorXd w(scores.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i) w(i) = robust_weight(scores(i), cfg.alpha, cfg.th);
  return w;
}

MStepResult m_step(const FeatureMatrix& m, const EStepResult& e, const MStepOptions& opt) {
  return m_step_kernel(m, e, e.responsibilities, e.responsibilities, opt);
}

MStepResult m_step(const FeatureMatrix& m, const EStepResult& e, const Eigen::VectorXd& weights,
                   const MStepOptions& opt) {
  if (weights.size() != e.responsibilities.rows())
    throw ValidationError("one weight per row is required");
  if ((weights.array() < 0.0).any() || (weights.array() > 1.0).any())
    throw ValidationError("weights must lie in [0, 1]");
  const Eigen::MatrixXd mean_coef = (e.responsibilities.array().colwise() * weights.array()).matrix();
  const Eigen::MatrixXd cov_coef = (mean_coef.array().colwise() * weights.array()).matrix();
  return m_step_kernel(m, e, mean_coef, cov_coef, opt);
}

KMeansInit init_kmeans(const FeatureMatrix& m, int k, std::uint64_t seed, int restarts) {
  const int n = static_cast<int>(m.rows());
  const auto d = static_cast<Eigen::Index>(m.cols());
  if (k < 1) throw ValidationError("K must be at least 1");
  if (k > n) throw ValidationError(fmt::format("K = {} exceeds the {} rows", k, n));

  Eigen::MatrixXd x = m.values();
  for (Eigen::Index c = 0; c < d; ++c) {
    double s = 0.0;
    int cnt = 0;
    for (int r = 0; r < n; ++r)
      if (m.is_observed(static_cast<std::size_t>(r), static_cast<std::size_t>(c))) {
        s += x(r, c);
        ++cnt;
      }
    const double mean = cnt ? s / cnt : 0.0;
    for (int r = 0; r < n; ++r)
      if (!m.is_observed(static_cast<std::size_t>(r), static_cast<std::size_t>(c))) x(r, c) = mean;
  }

  // One Lloyd run from uniformly drawn rows; false when a cluster empties.
  auto lloyd = [&](Rng& rng, Eigen::MatrixXd& centroids, std::vector<int>& labels, std::vector<int>& counts) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<int> pick(i, n - 1);
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
      centroids.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
    }
    if (k == 1) centroids.row(0) = x.colwise().mean();

    for (int iter = 0; iter < 100; ++iter) {
      bool changed = iter == 0;
      for (int r = 0; r < n; ++r) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int j = 0; j < k; ++j) {
          const double dist = (x.row(r) - centroids.row(j)).squaredNorm();
          if (dist < best_d) {
            best_d = dist;
            best = j;
          }
        }
        if (labels[static_cast<std::size_t>(r)] != best) changed = true;
        labels[static_cast<std::size_t>(r)] = best;
      }
      std::fill(counts.begin(), counts.end(), 0);
      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, d);
      for (int r = 0; r < n; ++r) {
        sums.row(labels[static_cast<std::size_t>(r)]) += x.row(r);
        ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(r)])];
      }
      if (std::find(counts.begin(), counts.end(), 0) != counts.end()) return false;
      for (int j = 0; j < k; ++j) centroids.row(j) = sums.row(j) / counts[static_cast<std::size_t>(j)];
      if (!changed) break;
    }
    return true;
  };

  Eigen::MatrixXd centroids(k, d);
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  double best_inertia = std::numeric_limits<double>::infinity();
  const int starts = k == 1 ? 1 : std::max(restarts, 1);
  for (int start = 0; start < starts; ++start) {
    Eigen::MatrixXd c(k, d);
    std::vector<int> l(static_cast<std::size_t>(n), 0);
    std::vector<int> cnt(static_cast<std::size_t>(k), 0);
    bool ok = false;
    for (int attempt = 0; attempt <= 3 && !ok; ++attempt) {
      Rng rng(derive_seed(seed, {0x6b6d65616e73ULL, static_cast<std::uint64_t>(start),
                                 static_cast<std::uint64_t>(attempt)}));
      std::fill(l.begin(), l.end(), 0);
      ok = lloyd(rng, c, l, cnt);
    }
    if (!ok) continue;
    double inertia = 0.0;
    for (int r = 0; r < n; ++r) inertia += (x.row(r) - c.row(l[static_cast<std::size_t>(r)])).squaredNorm();
    if (inertia < best_inertia) {
      best_inertia = inertia;
      centroids = std::move(c);
      labels = std::move(l);
      counts = std::move(cnt);
    }
  }
  if (!std::isfinite(best_inertia)) throw NumericalError("k-means left an empty cluster after 3 reseeds");

  Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
  for (int r = 0; r < n; ++r)
    var += (x.row(r) - centroids.row(labels[static_cast<std::size_t>(r)])).array().square().matrix().transpose();
  var = (var / n).cwiseMax(1e-6);

  KMeansInit out;
  out.labels = labels;
  Eigen::VectorXd pi(k);
  for (int j = 0; j < k; ++j) {
    pi(j) = std::max(static_cast<double>(counts[static_cast<std::size_t>(j)]) / n, 1.0 / (10.0 * k));
    if (counts[static_cast<std::size_t>(j)] < 2) out.degenerate = true;
  }
  out.params.weights = pi / pi.sum();
  for (int j = 0; j < k; ++j)
    out.params.components.push_back(
        make_component(centroids.row(j).transpose(), var.asDiagonal().toDenseMatrix(), j));
  return out;
}

double free_parameters(int k, int dim, const std::vector<int>& intrinsic_dims, bool shared_b) {
  double p = (k - 1) + static_cast<double>(k) * dim;
  for (int di : intrinsic_dims) {
    const int dd = std::min(di, dim);
    p += dd * (2.0 * dim - dd - 1.0) / 2.0 + dd;
  }
  if (shared_b) p += 1.0;
  return p;
}

double bic(const FitReport& report, const FeatureMatrix& m) {
  const double n = static_cast<double>(m.rows());
  const double p = free_parameters(report.params.k(), report.params.dim(),
                                   report.regularization.intrinsic_dims,
                                   report.regularization.any_tail);
  return -2.0 * report.estep.log_likelihood + p * std::log(n);
}

FitReport fit(const FeatureMatrix& m, int k, const EmConfig& em, const RobustConfig& robust) {
  const int n = static_cast<int>(m.rows());
  if (n <= k) throw ValidationError(fmt::format("need more rows ({}) than components ({})", n, k));
  if (!(em.loglik_tolerance > 0.0) || !(em.scree_threshold > 0.0))
    throw ValidationError("tolerances must be positive");
  if (em.max_iterations < 1) throw ValidationError("max_iterations must be at least 1");

  const auto patterns = group_patterns(m);
  KMeansInit init = init_kmeans(m, k, em.seed, em.kmeans_restarts);

  FitReport report;
  if (init.degenerate) report.warnings.push_back("k-means produced a cluster with fewer than two rows");
  GmmParams params = std::move(init.params);
  report.regularization.intrinsic_dims.assign(static_cast<std::size_t>(params.k()),
                                              static_cast<int>(m.cols()));
  report.weights = Eigen::VectorXd::Ones(n);

  MStepOptions opt;
  opt.regularize = em.regularize;
  opt.scree_threshold = em.scree_threshold;
  opt.min_occupancy = em.min_occupancy;
  opt.min_occupancy_fraction = em.min_occupancy_fraction;
  opt.abort_on_collapse = em.abort_on_collapse;

  IfConfig forest_cfg = robust.forest;
  forest_cfg.seed = derive_seed(em.seed, {0x69666f72ULL, robust.forest.seed});

  EStepResult e;
  for (int t = 1; t <= em.max_iterations; ++t) {
    e = e_step(m, params, patterns);
    report.loglik_trace.push_back(e.log_likelihood);
    report.iterations = t;
    if (t > 1) {
      const double delta = report.loglik_trace[t - 1] - report.loglik_trace[t - 2];
      if (std::abs(delta) / n < em.loglik_tolerance) {
        report.converged = true;
        break;
      }
    }
    if (t == em.max_iterations) break;

    MStepResult ms;
    if (robust.enabled) {
      const Eigen::MatrixXd agg = e.aggregated_completion();
      const IsolationForest forest = IsolationForest::fit(agg, forest_cfg);
      report.weights = compute_weights(agg, robust, forest);
      ms = m_step(m, e, report.weights, opt);
    } else {
      ms = m_step(m, e, opt);
    }
    for (int dropped : ms.dropped)
      report.warnings.push_back(fmt::format("iteration {}: dropped collapsed component {}", t, dropped));
    params = std::move(ms.params);
    report.regularization = std::move(ms.regularization);
  }
  if (!report.converged)
    report.warnings.push_back(fmt::format("no convergence within {} iterations", em.max_iterations));

  report.k = params.k();
  report.params = std::move(params);
  report.estep = std::move(e);
  report.bic = bic(report, m);
  return report;
}

Selection select_k(const FeatureMatrix& m, const std::vector<int>& k_range, const EmConfig& em,
                   const RobustConfig& robust) {
  if (k_range.empty()) throw ValidationError("empty K range");
  Selection best;
  bool have = false;
  std::vector<std::pair<int, double>> table;
  std::string last_error;
  for (int k : k_range) {
    if (k < 1 || k >= static_cast<int>(m.rows())) {
      table.emplace_back(k, kNaN);
      continue;
    }
    try {
      FitReport r = fit(m, k, em, robust);
      table.emplace_back(k, r.bic);
      if (!have || r.bic < best.report.bic) {
        best.best_k = k;
        best.report = std::move(r);
        have = true;
      }
    } catch (const NumericalError& err) {
      table.emplace_back(k, kNaN);
      last_error = err.what();
    }
  }
  if (!have) throw NumericalError("all candidate fits failed: " + last_error);
  best.report.bic_by_k = std::move(table);
  return best;
}

Eigen::MatrixXd impute(const FeatureMatrix& m, const FitReport& report) {
  const auto& e = report.estep;
  if (e.responsibilities.rows() != static_cast<Eigen::Index>(m.rows()) ||
      e.completed.empty() || e.completed.front().cols() != static_cast<Eigen::Index>(m.cols()))
    throw ValidationError("fit report does not belong to this matrix");
  Eigen::MatrixXd out = m.values();
  for (const auto& pat : e.patterns) {
    if (pat.missing.empty()) continue;
    for (int r : pat.rows)
      for (int c : pat.missing) {
        double v = 0.0;
        for (std::size_t k = 0; k < e.completed.size(); ++k)
          v += e.responsibilities(r, static_cast<Eigen::Index>(k)) * e.completed[k](r, c);
        out(r, c) = v;
      }
  }
  return out;
}

std::string format_report(const FitReport& report) {
  std::string s;
  s += fmt::format("k: {}\n", report.k);
  s += fmt::format("bic: {}\n", report.bic);
  s += fmt::format("iterations: {}\n", report.iterations);
  s += fmt::format("converged: {}\n", report.converged ? "true" : "false");
  s += "loglik_trace:\n";
  for (double v : report.loglik_trace) s += fmt::format("  - {}\n", v);
  if (!report.bic_by_k.empty()) {
    s += "bic_by_k:\n";
    for (const auto& [k, b] : report.bic_by_k) s += fmt::format("  {}: {}\n", k, b);
  }
  s += "mixing_weights:\n";
  for (Eigen::Index k = 0; k < report.params.weights.size(); ++k)
    s += fmt::format("  - {}\n", report.params.weights(k));
  s += "intrinsic_dims:\n";
  for (int d : report.regularization.intrinsic_dims) s += fmt::format("  - {}\n", d);
  s += fmt::format("shared_b: {}\n", report.regularization.shared_b);
  // ten equal bins over [0, 1]
  std::array<int, 10> hist{};
  for (Eigen::Index i = 0; i < report.weights.size(); ++i) {
    const int bin = std::clamp(static_cast<int>(report.weights(i) * 10.0), 0, 9);
    ++hist[static_cast<std::size_t>(bin)];
  }
  s += "weight_histogram:\n";
  for (int b = 0; b < 10; ++b)
    s += fmt::format("  - {{lo: {:.1f}, hi: {:.1f}, count: {}}}\n", b / 10.0, (b + 1) / 10.0,
                     hist[static_cast<std::size_t>(b)]);
  if (!report.warnings.empty()) {
    s += "warnings:\n";
    for (const auto& w : report.warnings) s += fmt::format("  - \"{}\"\n", w);
  }
  return s;
}

}  // namespace rgmm
