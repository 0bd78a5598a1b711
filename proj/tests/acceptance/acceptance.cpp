// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.

#include "cli.hpp"
#include "rgmm/config.hpp"
#include "rgmm/data_model.hpp"
#include "rgmm/experiments.hpp"
#include "rgmm/gaussian.hpp"
#include "rgmm/gmm.hpp"
#include "rgmm/isolation_forest.hpp"
#include "rgmm/masking.hpp"
#include "rgmm/random.hpp"
#include "rgmm/synthetic.hpp"

#include <fmt/core.h>

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace fs = std::filesystem;
using namespace rgmm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }
double uniform(Rng& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

Eigen::MatrixXd random_pd(int d, double lo, double hi, Rng& rng) {
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd lambda(d);
  for (int i = 0; i < d; ++i) lambda(i) = uniform(rng, lo, hi);
  Eigen::MatrixXd s = q * lambda.asDiagonal() * q.transpose();
  return 0.5 * (s + s.transpose());
}

Eigen::VectorXd draw(const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov, Rng& rng) {
  Eigen::MatrixXd l = cov.llt().matrixL();
  Eigen::VectorXd z(mu.size());
  for (int i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return mu + l * z;
}

std::vector<ColumnDescriptor> plain_columns(int d) {
  std::vector<ColumnDescriptor> cols;
  for (int c = 0; c < d; ++c) cols.push_back({Sensor::S2, "X", Statistic::Median, c, std::nullopt});
  return cols;
}

std::vector<std::string> plain_ids(int n) {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("p" + std::to_string(i));
  return ids;
}

/// Gaussian mixture sample with entries missing completely at random; every
/// row keeps at least one observed entry.
struct MixtureSample {
  FeatureMatrix masked;
  Eigen::MatrixXd full;
  std::vector<int> label;
};

MixtureSample mixture_sample(const std::vector<Eigen::VectorXd>& means, const std::vector<Eigen::MatrixXd>& covs,
                             int n, double missing, Rng& rng) {
  const int d = static_cast<int>(means.front().size());
  const int k = static_cast<int>(means.size());
  MixtureSample s;
  s.full.resize(n, d);
  BoolMatrix obs(n, d);
  std::bernoulli_distribution drop(missing);
  for (int i = 0; i < n; ++i) {
    int c = i % k;
    s.label.push_back(c);
    s.full.row(i) = draw(means[c], covs[c], rng).transpose();
    do {
      for (int j = 0; j < d; ++j) obs(i, j) = !drop(rng);
    } while (!obs.row(i).any());
  }
  s.masked = FeatureMatrix(s.full, obs, plain_columns(d), plain_ids(n));
  return s;
}

// 1. Conditioning against brute-force integration of the joint density.
Outcome criterion1() {
  Rng rng(101);
  double worst_mean = 0.0, worst_chain = 0.0;
  for (int t = 0; t < 50; ++t) {
    int d = 3 + t % 4;
    int m = 1 + t % 2;
    Eigen::MatrixXd cov = random_pd(d, 0.2, 5.0, rng);
    Eigen::VectorXd mu(d);
    for (int i = 0; i < d; ++i) mu(i) = uniform(rng, -2.0, 2.0);
    GaussianComponent g(mu, cov);
    Eigen::VectorXd x = draw(mu, cov, rng);

    std::vector<int> all(d);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<int> mis(all.begin(), all.begin() + m), obs(all.begin() + m, all.end());
    std::sort(mis.begin(), mis.end());
    std::sort(obs.begin(), obs.end());
    Eigen::VectorXd x_obs = gather(x, obs);
    ConditionalMoments cm = condition(g, x_obs, obs, mis);

    // Trapezoid grid over the missing block; the conditional spread is at
    // least sqrt(0.2), so a step of 0.1 resolves it.
    const double h = 0.1;
    std::vector<std::vector<double>> axes(m);
    for (int a = 0; a < m; ++a) {
      double sd = std::sqrt(cov(mis[a], mis[a]));
      for (double v = mu(mis[a]) - 12.0 * sd; v <= mu(mis[a]) + 12.0 * sd; v += h) axes[a].push_back(v);
    }
    Eigen::VectorXd y = x;
    double mass = 0.0;
    Eigen::VectorXd first = Eigen::VectorXd::Zero(m);
    const double ref = g.log_pdf(complete_sample(x_obs, obs, mis, cm.mean));
    auto accumulate = [&](const Eigen::VectorXd& pt) {
      for (int a = 0; a < m; ++a) y(mis[a]) = pt(a);
      double w = std::exp(g.log_pdf(y) - ref);
      mass += w;
      first += w * pt;
    };
    Eigen::VectorXd pt(m);
    if (m == 1) {
      for (double u : axes[0]) {
        pt(0) = u;
        accumulate(pt);
      }
    } else {
      for (double u : axes[0])
        for (double v : axes[1]) {
          pt << u, v;
          accumulate(pt);
        }
    }
    Eigen::VectorXd numeric_mean = first / mass;
    worst_mean = std::max(worst_mean, (numeric_mean - cm.mean).cwiseAbs().maxCoeff());

    GaussianComponent conditional(cm.mean, cm.cov);
    double chain = log_pdf_observed(g, x_obs, obs) + conditional.log_pdf(gather(x, mis));
    worst_chain = std::max(worst_chain, std::abs(chain - g.log_pdf(x)));
  }
  return {worst_mean <= 1e-4 && worst_chain <= 1e-8,
          fmt::format("max |E[x_m|x_o] - grid| = {:.2e} (tol 1e-4), max chain-rule gap = {:.2e} (tol 1e-8)",
                      worst_mean, worst_chain)};
}

// 2. Observed log-likelihood never decreases without robustness or regularisation.
Outcome criterion2() {
  int monotone = 0;
  double worst = 0.0;
  for (int s = 0; s < 20; ++s) {
    Rng rng(derive_seed(202, {static_cast<std::uint64_t>(s)}));
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
    for (int k = 0; k < 3; ++k) {
      Eigen::VectorXd mu(8);
      for (int i = 0; i < 8; ++i) mu(i) = 3.0 * normal(rng);
      means.push_back(mu);
      covs.push_back(random_pd(8, 0.2, 2.0, rng));
    }
    MixtureSample d = mixture_sample(means, covs, 500, 0.2, rng);
    EmConfig em;
    em.regularize = false;
    em.seed = static_cast<std::uint64_t>(s);
    FitReport r = fit(d.masked, 3, em, RobustConfig{});
    double step_min = 0.0;
    for (std::size_t i = 1; i < r.loglik_trace.size(); ++i)
      step_min = std::min(step_min, r.loglik_trace[i] - r.loglik_trace[i - 1]);
    worst = std::min(worst, step_min);
    if (step_min >= -1e-8 && r.loglik_trace.size() >= 2) ++monotone;
  }
  return {monotone == 20, fmt::format("{}/20 fits monotone, most negative step {:.2e} (tol -1e-8)", monotone, worst)};
}

bool bitwise_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

// 3. Reductions to the complete-data and the standard updates.
Outcome criterion3() {
  int estep_ok = 0, mstep_ok = 0;
  for (int s = 0; s < 10; ++s) {
    Rng rng(derive_seed(303, {static_cast<std::uint64_t>(s)}));
    const int d = 4 + s % 3, k = 2 + s % 2;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
    GmmParams params;
    params.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
    for (int c = 0; c < k; ++c) {
      Eigen::VectorXd mu(d);
      for (int i = 0; i < d; ++i) mu(i) = 2.0 * normal(rng);
      means.push_back(mu);
      covs.push_back(random_pd(d, 0.3, 2.0, rng));
      params.components.emplace_back(means.back() + Eigen::VectorXd::Constant(d, 0.3), covs.back());
    }
    MixtureSample full = mixture_sample(means, covs, 300, 0.0, rng);
    EStepResult e = e_step(full.masked, params);
    if (bitwise_equal(e.responsibilities, complete_data_responsibilities(full.full, params))) ++estep_ok;

    MixtureSample part = mixture_sample(means, covs, 300, 0.25, rng);
    EStepResult ep = e_step(part.masked, params);
    MStepOptions opt;
    opt.regularize = s % 2 == 0;
    MStepResult a = m_step(part.masked, ep, opt);
    MStepResult b = m_step(part.masked, ep, Eigen::VectorXd::Ones(300), opt);
    bool same = bitwise_equal(a.params.weights, b.params.weights) && a.params.k() == b.params.k();
    for (int c = 0; same && c < a.params.k(); ++c)
      same = bitwise_equal(a.params.components[c].mean(), b.params.components[c].mean()) &&
             bitwise_equal(a.params.components[c].covariance(), b.params.components[c].covariance());
    if (same) ++mstep_ok;
  }
  return {estep_ok == 10 && mstep_ok == 10,
          fmt::format("E-step exact in {}/10, unit-weight M-step bitwise in {}/10", estep_ok, mstep_ok)};
}

// 4. Recovery of means, and BIC choosing the true K.
Outcome criterion4() {
  int recovered = 0;
  double worst = 0.0;
  for (int s = 0; s < 10; ++s) {
    Rng rng(derive_seed(404, {static_cast<std::uint64_t>(s)}));
    std::vector<Eigen::VectorXd> means{Eigen::VectorXd::Zero(5), Eigen::VectorXd::Constant(5, 3.0)};
    std::vector<Eigen::MatrixXd> covs{random_pd(5, 0.02, 0.25, rng), random_pd(5, 0.02, 0.25, rng)};
    MixtureSample d = mixture_sample(means, covs, 2000, 0.2, rng);
    EmConfig em;
    em.seed = static_cast<std::uint64_t>(s);
    FitReport r = fit(d.masked, 2, em, RobustConfig{});
    double err = 1e300;
    if (r.k == 2) {
      for (int flip = 0; flip < 2; ++flip) {
        double e = 0.0;
        for (int c = 0; c < 2; ++c)
          e = std::max(e, (r.params.components[c].mean() - means[(c + flip) % 2]).cwiseAbs().maxCoeff());
        err = std::min(err, e);
      }
    }
    worst = std::max(worst, err);
    if (err <= 0.05) ++recovered;
  }
  int chose_three = 0;
  std::vector<int> picks;
  for (int s = 0; s < 10; ++s) {
    Rng rng(derive_seed(405, {static_cast<std::uint64_t>(s)}));
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
    for (int c = 0; c < 3; ++c) {
      Eigen::VectorXd mu = Eigen::VectorXd::Zero(5);
      if (c > 0) mu(c - 1) = 4.0;
      means.push_back(mu);
      covs.push_back(random_pd(5, 0.02, 0.25, rng));
    }
    MixtureSample d = mixture_sample(means, covs, 1500, 0.2, rng);
    EmConfig em;
    em.seed = static_cast<std::uint64_t>(s);
    Selection sel = select_k(d.masked, {1, 2, 3, 4, 5}, em, RobustConfig{});
    picks.push_back(sel.best_k);
    if (sel.best_k == 3) ++chose_three;
  }
  std::string pk;
  for (int p : picks) pk += std::to_string(p);
  return {recovered >= 9 && chose_three >= 9,
          fmt::format("means within 0.05 in {}/10 (worst {:.4f}), BIC picks K=3 in {}/10 (picks {})", recovered, worst,
                      chose_three, pk)};
}

ExperimentSpec base_spec(ExperimentKind kind, const std::string& name, std::vector<Method> methods) {
  ExperimentSpec spec;
  spec.kind = kind;
  spec.name = name;
  spec.methods = std::move(methods);
  spec.em.k_range = {1};
  return spec;
}

// 5. GMM < KNN < mean at every grid point; S1 helps the median groups.
Outcome criterion5() {
  ExperimentSpec spec = base_spec(ExperimentKind::MissingSweep, "ordering", {Method::Gmm, Method::Knn, Method::Mean});
  spec.grid = {0.08, 0.23, 0.46, 0.70};
  spec.n_runs = 20;
  spec.base_seed = 55;
  spec.compare_s1 = true;
  RunSummary s = run_experiment(spec);

  bool ordered = true;
  std::string table;
  for (int g = 0; g < 4; ++g) {
    double gm = s.value("gmm", "S1+S2", g, "all", "mae", "mean");
    double kn = s.value("knn", "S1+S2", g, "all", "mae", "mean");
    double me = s.value("mean", "S1+S2", g, "all", "mae", "mean");
    ordered = ordered && gm < kn && kn < me;
    table += fmt::format(" {:.0f}%: {:.4f}<{:.4f}<{:.4f}", 100 * spec.grid[g], gm, kn, me);
  }
  std::set<std::string> median_groups;
  for (const RunRecord& r : s.runs)
    if (r.group.size() > 7 && r.group.ends_with(":median")) median_groups.insert(r.group);
  bool s1_helps = !median_groups.empty();
  std::string s1;
  for (int g : {2, 3})
    for (const std::string& key : median_groups) {
      double with = s.value("gmm", "S1+S2", g, key, "mae", "mean");
      double without = s.value("gmm", "S2", g, key, "mae", "mean");
      if (!(with <= without)) {
        s1_helps = false;
        s1 += fmt::format(" {}@{:.0f}%", key, 100 * spec.grid[g]);
      }
    }
  return {ordered && s1_helps,
          fmt::format("mean MAE gmm<knn<mean:{}; S1 helps all {} median groups at 46%/70%{}", table,
                      median_groups.size(), s1.empty() ? "" : " except" + s1)};
}

// 6. Robust GMM under 20% contaminant rows.
Outcome criterion6() {
  ExperimentSpec spec = base_spec(ExperimentKind::ContaminationSweep, "contamination", {Method::RobustGmm, Method::Gmm});
  spec.grid = {0.0, 0.2};
  spec.n_runs = 20;
  spec.base_seed = 66;
  RunSummary s = run_experiment(spec);
  double r0 = s.value("rgmm", "S1+S2", 0, "all", "mae", "median");
  double r20 = s.value("rgmm", "S1+S2", 1, "all", "mae", "median");
  double g20 = s.value("gmm", "S1+S2", 1, "all", "mae", "median");
  return {r20 <= g20 && r20 <= 1.3 * r0,
          fmt::format("median MAE at 20%: robust {:.5f} vs standard {:.5f}; robust 20%/0% = {:.3f} (max 1.3)", r20,
                      g20, r20 / r0)};
}

// 7. Sigmoid weights.
Outcome criterion7() {
  bool half = robust_weight(0.5, 40.0, 0.5) == 0.5 && robust_weight(0.62, 12.0, 0.62) == 0.5;
  double tail = robust_weight(1.0, 40.0, 0.5);
  bool monotone = true, inflection = true;
  const double h = 1e-3;
  std::vector<double> w;
  for (int i = 0; i <= 1000; ++i) w.push_back(robust_weight(i * h, 40.0, 0.5));
  for (std::size_t i = 1; i < w.size(); ++i) monotone = monotone && w[i] < w[i - 1];
  for (std::size_t i = 1; i + 1 < w.size(); ++i) {
    double s = i * h;
    if (std::abs(s - 0.5) < 5e-3 || std::abs(s - 0.5) > 0.2) continue;
    double curv = w[i + 1] - 2.0 * w[i] + w[i - 1];
    inflection = inflection && (s < 0.5 ? curv < 0.0 : curv > 0.0);
  }
  return {half && tail < 1e-8 && monotone && inflection,
          fmt::format("w(th)=0.5 {}, w(1.0)={:.2e} (<1e-8), strictly decreasing {}, concave-to-convex at th {}",
                      half ? "yes" : "no", tail, monotone ? "yes" : "no", inflection ? "yes" : "no")};
}

// 8. Isolation forest sanity.
Outcome criterion8() {
  int top = 0;
  double lo = 1.0, hi = 0.0;
  for (int s = 0; s < 20; ++s) {
    Rng rng(derive_seed(808, {static_cast<std::uint64_t>(s)}));
    Eigen::MatrixXd x(501, 3);
    for (int i = 0; i < 500; ++i)
      for (int j = 0; j < 3; ++j) x(i, j) = normal(rng);
    Eigen::Vector3d dir(normal(rng), normal(rng), normal(rng));
    x.row(500) = 10.0 * dir.normalized().transpose();
    IfConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(s);
    Eigen::VectorXd sc = IsolationForest::fit(x, cfg).score_all(x);
    Eigen::Index arg;
    sc.maxCoeff(&arg);
    if (arg == 500) ++top;
    lo = std::min(lo, sc.minCoeff());
    hi = std::max(hi, sc.maxCoeff());
  }
  Rng rng(8080);
  Eigen::MatrixXd u(500, 3);
  for (int i = 0; i < u.size(); ++i) u.data()[i] = uniform(rng, 0.0, 1.0);
  IfConfig cfg;
  cfg.seed = 1;
  double mean_u = IsolationForest::fit(u, cfg).score_all(u).mean();
  return {top >= 19 && lo > 0.0 && hi < 1.0 && std::abs(mean_u - 0.5) <= 0.1,
          fmt::format("outlier ranked first in {}/20, scores in [{:.3f}, {:.3f}], uniform-cloud mean {:.3f}", top, lo,
                      hi, mean_u)};
}

// 9. Impute-then-detect against discarding the cloudy images.
Outcome criterion9() {
  ExperimentSpec spec = base_spec(ExperimentKind::DetectionSweep, "detection", {Method::RobustGmm, Method::Discard});
  spec.dataset.anomaly_fraction = 0.05;
  spec.dataset.heterogeneity_spike = 0.3;
  spec.dataset.spike_width = 3;
  spec.dataset.growth_delay_days = 45.0;
  spec.grid = {0.46};
  spec.n_runs = 20;
  spec.base_seed = 9;
  RunSummary s = run_experiment(spec);
  std::map<int, double> rg, dc;
  for (const RunRecord& r : s.runs) {
    if (r.group != "all") continue;
    if (r.method == "rgmm") rg[r.run] = r.auc;
    if (r.method == "discard") dc[r.run] = r.auc;
  }
  int wins = 0;
  for (auto [run, auc] : rg)
    if (dc.count(run) && auc > dc[run]) ++wins;
  // One-sided sign test under p = 1/2.
  double p = 0.0;
  for (int k = wins; k <= 20; ++k) p += std::exp(std::lgamma(21.0) - std::lgamma(k + 1.0) - std::lgamma(21.0 - k)) / std::pow(2.0, 20);
  return {wins >= 15,
          fmt::format("robust GMM beats discard in {}/20 runs (sign test p = {:.4f}); median AUC {:.4f} vs {:.4f}", wins,
                      p, s.value("rgmm", "S1+S2", 0, "all", "auc", "median"),
                      s.value("discard", "S1+S2", 0, "all", "auc", "median"))};
}

// 10. Spread over initialisations.
Outcome criterion10() {
  ExperimentSpec spec = base_spec(ExperimentKind::InitSensitivity, "inits", {Method::Gmm});
  spec.em.k_range = {3};
  spec.pct_cloudy_images = 0.08;
  spec.pct_affected = 0.5;
  spec.n_inits = 50;
  spec.base_seed = 4;
  RunSummary s = run_experiment(spec);
  double rel = s.value("gmm", "S1+S2", 0, "all", "relative_spread", "mean");
  double lo = s.value("gmm", "S1+S2", 0, "all", "mae", "min");
  double hi = s.value("gmm", "S1+S2", 0, "all", "mae", "max");
  return {rel < 0.05, fmt::format("MAE in [{:.5f}, {:.5f}], spread/median = {:.4f} (< 0.05)", lo, hi, rel)};
}

std::map<std::string, std::string> read_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = read_text_file(e.path());
  return out;
}

// 11. Reproducible outputs and a lossless matrix format.
Outcome criterion11() {
  fs::path tmp = fs::temp_directory_path() / fmt::format("rgmm_acceptance_{}", ::getpid());
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  {
    std::ofstream f(tmp / "spec.yaml");
    f << "kind: missing_sweep\nname: repeat\ndataset:\n  n_parcels: 300\n"
         "methods: [rgmm, gmm, knn, mean]\ngrid: [0.23]\nn_runs: 2\nbase_seed: 7\n"
         "em:\n  k_range: [1]\n";
  }
  std::vector<std::map<std::string, std::string>> outputs;
  bool exit_ok = true;
  for (const char* sub : {"a", "b"}) {
    std::string spec = (tmp / "spec.yaml").string(), out = (tmp / sub).string();
    const char* argv[] = {"rgmm", "experiment", "--spec", spec.c_str(), "--out", out.c_str(), "--quiet"};
    std::ostringstream o, e;
    exit_ok = exit_ok && cli::dispatch(7, argv, o, e) == 0;
    outputs.push_back(exit_ok ? read_dir(out) : std::map<std::string, std::string>{});
  }
  bool same = exit_ok && !outputs[0].empty() && outputs[0] == outputs[1];

  SyntheticConfig cfg;
  cfg.n_parcels = 200;
  cfg.seed = 3;
  MaskingScenario sc;
  sc.pct_cloudy_images = 0.46;
  sc.seed = 5;
  FeatureMatrix m = apply_scenario(generate(cfg).matrix, sc).masked;
  save_matrix(m, tmp / "m.csv");
  FeatureMatrix back = load_matrix(tmp / "m.csv");
  bool round = back.columns() == m.columns() && back.row_ids() == m.row_ids() &&
               back.observed().rows() == m.observed().rows() && (back.observed() == m.observed()).all();
  for (std::size_t r = 0; round && r < m.rows(); ++r)
    for (std::size_t c = 0; round && c < m.cols(); ++c)
      if (m.is_observed(r, c)) round = back.values()(r, c) == m.values()(r, c);
  fs::remove_all(tmp);
  return {same && round, fmt::format("{} output files identical across runs: {}; matrix round-trip exact: {}",
                                     outputs[0].size(), same ? "yes" : "no", round ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                 criterion5, criterion6, criterion7, criterion8,
                                                 criterion9, criterion10, criterion11};
  // Runtime budgets in seconds; 0 means none stated.
  const std::vector<double> budget{30, 60, 0, 180, 600, 600, 0, 0, 600, 0, 0};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  int failed = 0;
  for (int i = 0; i < static_cast<int>(criteria.size()); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool in_time = budget[i] == 0 || secs < budget[i];
    bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::string limit = budget[i] == 0 ? "" : fmt::format(" of {:.0f}s", budget[i]);
    fmt::print("criterion {:>2}: {}  {} [{:.1f}s{}]\n", i + 1, pass ? "PASS" : "FAIL", o.detail, secs, limit);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
