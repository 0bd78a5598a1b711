#include "cli.hpp"

#include "rgmm/config.hpp"
#include "rgmm/data_model.hpp"
#include "rgmm/errors.hpp"
#include "rgmm/experiments.hpp"
#include "rgmm/imputers.hpp"
#include "rgmm/isolation_forest.hpp"
#include "rgmm/masking.hpp"
#include "rgmm/metrics.hpp"
#include "rgmm/synthetic.hpp"
#include "rgmm/version.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

namespace rgmm::cli {

namespace {

std::vector<int> parse_k_range(const std::string& text) {
  std::vector<int> out;
  auto to_int = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("bad --k-range '{}'", text));
    }
  };
  auto dash = text.find('-');
  if (dash != std::string::npos) {
    int lo = to_int(text.substr(0, dash)), hi = to_int(text.substr(dash + 1));
    if (lo < 1 || hi < lo) throw ValidationError(fmt::format("bad --k-range '{}'", text));
    for (int k = lo; k <= hi; ++k) out.push_back(k);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int k = to_int(item);
    if (k < 1) throw ValidationError(fmt::format("bad --k-range '{}'", text));
    out.push_back(k);
  }
  if (out.empty()) throw ValidationError("empty --k-range");
  return out;
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError(fmt::format("cannot write '{}'", path));
  f << body;
}

std::vector<RowLabel> load_labels(const std::string& path, const FeatureMatrix& m) {
  std::map<std::string, RowLabel> by_id;
  std::stringstream ss(read_text_file(path));
  std::string line;
  std::getline(ss, line);
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto a = line.find(','), b = line.find(',', a + 1);
    if (a == std::string::npos || b == std::string::npos)
      throw ValidationError(fmt::format("malformed labels line '{}'", line));
    by_id[line.substr(0, a)] = parse_row_label(line.substr(a + 1, b - a - 1));
  }
  std::vector<RowLabel> out;
  for (const auto& id : m.row_ids()) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw ValidationError(fmt::format("no label for parcel '{}'", id));
    out.push_back(it->second);
  }
  return out;
}

struct SynthArgs {
  std::string config, out, labels;
  std::optional<int> n_parcels, clusters;
  std::optional<double> noise, anomaly, contamination;
  std::uint64_t seed = 0;
};

struct MaskArgs {
  std::string in, out_masked, out_truth;
  double pct_images = 0.0, pct_parcels = 0.5;
  std::vector<int> acquisitions;
  std::uint64_t seed = 0;
};

struct ImputeArgs {
  std::string in, out, method = "rgmm", k_range = "1-5", report;
  int k = 5, max_iter = 100, n_trees = 100, subsample = 256;
  double alpha = 40.0, th = 0.5, scree = 1e-5, tol = 1e-3;
  bool no_regularize = false;
  std::uint64_t seed = 0;
};

struct DetectArgs {
  std::string in, out, labels, out_curve;
  int n_trees = 100, subsample = 256;
  std::uint64_t seed = 0;
};

struct ScoreArgs {
  std::string truth, masked, imputed, labels, out;
};

struct ExperimentArgs {
  std::string spec, out;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

int run_synth(const SynthArgs& a, std::ostream& out) {
  SyntheticConfig cfg = a.config.empty() ? SyntheticConfig{} : load_synthetic_config(a.config);
  if (a.n_parcels) cfg.n_parcels = *a.n_parcels;
  if (a.clusters) cfg.n_latent_clusters = *a.clusters;
  if (a.noise) cfg.noise_scale = *a.noise;
  if (a.anomaly) cfg.anomaly_fraction = *a.anomaly;
  if (a.contamination) cfg.contamination_fraction = *a.contamination;
  cfg.seed = a.seed;
  LabeledDataset d = generate(cfg);
  save_matrix(d.matrix, a.out);
  if (!a.labels.empty()) write_file(a.labels, format_labels(d));
  out << fmt::format("wrote {} parcels x {} columns\n", d.matrix.rows(), d.matrix.cols());
  return 0;
}

int run_mask(const MaskArgs& a, std::ostream& out, std::ostream& err) {
  FeatureMatrix m = load_matrix(a.in);
  MaskingScenario s;
  s.pct_cloudy_images = a.pct_images;
  s.pct_affected_parcels = a.pct_parcels;
  s.seed = a.seed;
  if (!a.acquisitions.empty()) s.cloudy_acquisitions = a.acquisitions;
  MaskedDataset md = apply_scenario(m, s);
  if (md.zero_mask_warning) err << "warning: the image percentage rounds to zero cloudy images\n";
  save_matrix(md.masked, a.out_masked);
  save_truth(md.masked, md.truth, a.out_truth);
  std::string acqs;
  for (int c : md.cloudy_acquisitions) acqs += (acqs.empty() ? "" : ",") + std::to_string(c);
  out << fmt::format("cloudy acquisitions: [{}]; masked entries: {}\n", acqs, md.truth.size());
  return 0;
}

int run_impute(const ImputeArgs& a, std::ostream& out) {
  FeatureMatrix m = load_matrix(a.in);
  ImputationResult res;
  if (a.method == "rgmm" || a.method == "gmm") {
    EmConfig em;
    em.k_range = parse_k_range(a.k_range);
    em.max_iterations = a.max_iter;
    em.loglik_tolerance = a.tol;
    em.scree_threshold = a.scree;
    em.regularize = !a.no_regularize;
    em.seed = a.seed;
    RobustConfig robust;
    robust.enabled = a.method == "rgmm";
    robust.alpha = a.alpha;
    robust.th = a.th;
    robust.forest.n_trees = a.n_trees;
    robust.forest.subsample_size = a.subsample;
    res = impute_gmm(m, em, robust);
  } else if (a.method == "knn") {
    res = impute_knn(m, a.k);
  } else {
    res = impute_mean(m);
  }
  save_matrix(res.completed, a.out);
  if (!a.report.empty()) {
    std::string body = fmt::format("method: {}\n", res.method);
    if (res.fit) body += format_report(*res.fit);
    if (a.method == "knn") body += fmt::format("fallbacks: {}\n", res.knn.fallbacks.size());
    write_file(a.report, body);
  }
  out << fmt::format("method {}: imputed {} entries\n", res.method, m.missing_count());
  return 0;
}

int run_detect(const DetectArgs& a, std::ostream& out) {
  FeatureMatrix m = load_matrix(a.in);
  if (!m.fully_observed()) throw ValidationError("detect needs a complete matrix; impute it first");
  std::vector<RowLabel> labels;
  if (!a.labels.empty()) labels = load_labels(a.labels, m);
  IfConfig cfg;
  cfg.n_trees = a.n_trees;
  cfg.subsample_size = a.subsample;
  cfg.seed = a.seed;
  IsolationForest forest = IsolationForest::fit(m, cfg);
  Eigen::VectorXd sc = forest.score_all(m.values());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(sc.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return sc(a) > sc(b); });
  std::string body = "parcel_id,score\n";
  for (Eigen::Index i : order) body += fmt::format("{},{}\n", m.row_ids()[i], sc(i));
  std::optional<DetectionCurve> curve;
  if (!labels.empty()) {
    std::vector<bool> positive(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) positive[i] = labels[i] != RowLabel::Normal;
    curve = precision_curve(std::vector<double>(sc.data(), sc.data() + sc.size()), positive, default_ratio_grid());
  }
  write_file(a.out, body);
  if (curve) {
    if (!a.out_curve.empty()) {
      std::string c = "ratio,precision\n";
      for (std::size_t i = 0; i < curve->ratios.size(); ++i)
        c += fmt::format("{},{}\n", curve->ratios[i], curve->precision[i]);
      write_file(a.out_curve, c);
    }
    out << fmt::format("auc {} normalized_auc {}\n", curve->auc, curve->normalized_auc);
  } else {
    out << fmt::format("scored {} parcels\n", sc.size());
  }
  return 0;
}

int run_score(const ScoreArgs& a, std::ostream& out) {
  FeatureMatrix masked = load_matrix(a.masked);
  FeatureMatrix done = load_matrix(a.imputed);
  if (done.columns() != masked.columns() || done.row_ids() != masked.row_ids())
    throw ValidationError("imputed and masked matrices have different layouts");
  if (!done.fully_observed()) throw ValidationError("imputed matrix still has missing entries");
  for (std::size_t r = 0; r < masked.rows(); ++r)
    for (std::size_t c = 0; c < masked.cols(); ++c)
      if (masked.is_observed(r, c) && masked.values()(r, c) != done.values()(r, c))
        throw ValidationError("imputed matrix alters an observed entry");
  std::vector<TruthEntry> truth = load_truth(a.truth, masked);
  std::optional<ScalingTransform> scaling;
  if (!a.labels.empty()) {
    std::vector<RowLabel> labels = load_labels(a.labels, masked);
    std::vector<int> keep;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] != RowLabel::Contaminant) keep.push_back(static_cast<int>(i));
    truth = filter_rows(truth, keep);
    scaling = scaling_for_rows(masked, keep);
  }
  ImputationResult res;
  res.completed = done;
  res.imputed = !masked.observed();
  res.method = "external";
  ReconstructionScores sc = reconstruction_scores(truth, res, scaling);
  std::string body = "group,count,mae,rmse,r2\n";
  auto row = [&](const std::string& g, const ErrorStats& s) {
    body += fmt::format("{},{},{},{},{}\n", g, s.count, s.mae, s.rmse, s.r2);
  };
  row("all", sc.overall_scaled);
  for (const auto& [g, s] : sc.by_group) row(g, s);
  for (const auto& [acq, s] : sc.by_acquisition) row(fmt::format("acq:{}", acq), s);
  if (!a.out.empty()) write_file(a.out, body);
  out << body;
  return 0;
}

int run_experiment_cmd(const ExperimentArgs& a, std::ostream& out, std::ostream& err) {
  ExperimentSpec spec = load_experiment_spec(a.spec);
  if (a.seed) spec.base_seed = *a.seed;
  RunOptions opt;
  opt.jobs = a.jobs;
  if (!a.quiet) opt.progress = [&err](int done, int total) { err << fmt::format("\r{}/{} tasks", done, total) << std::flush; };
  RunSummary s = run_experiment(spec, opt);
  if (!a.quiet) err << "\n";
  auto files = write_outputs(s, a.out);
  for (const auto& n : s.notes) err << "note: " << n << "\n";
  out << fmt::format("wrote {} files to {}\n", files.size(), a.out);
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust GMM imputation of parcel time series"};
  app.require_subcommand(0, 1);
  bool version = false;
  app.add_flag("--version", version, "Print the build version");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a labelled synthetic dataset");
  synth->add_option("--config", sa.config, "YAML dataset config")->check(CLI::ExistingFile);
  synth->add_option("--n-parcels", sa.n_parcels, "Number of parcels");
  synth->add_option("--clusters", sa.clusters, "Latent clusters");
  synth->add_option("--noise", sa.noise, "Within-cluster noise scale");
  synth->add_option("--anomaly-fraction", sa.anomaly, "Fraction of anomalous parcels");
  synth->add_option("--contamination", sa.contamination, "Appended contaminant fraction");
  synth->add_option("--seed", sa.seed, "Random seed");
  synth->add_option("--out", sa.out, "Matrix CSV")->required();
  synth->add_option("--labels", sa.labels, "Labels CSV");

  MaskArgs ma;
  auto* mask = app.add_subcommand("mask", "Simulate cloudy S2 acquisitions");
  mask->add_option("--in", ma.in, "Complete matrix CSV")->required()->check(CLI::ExistingFile);
  mask->add_option("--pct-images", ma.pct_images, "Fraction of cloudy S2 images")->check(CLI::Range(0.0, 1.0));
  mask->add_option("--pct-parcels", ma.pct_parcels, "Fraction of parcels per cloudy image")
      ->check(CLI::Range(0.0, 1.0));
  mask->add_option("--acquisitions", ma.acquisitions, "Explicit cloudy acquisition indices");
  mask->add_option("--seed", ma.seed, "Random seed");
  mask->add_option("--out-masked", ma.out_masked, "Masked matrix CSV")->required();
  mask->add_option("--out-truth", ma.out_truth, "Held-out truth CSV")->required();

  ImputeArgs ia;
  auto* imp = app.add_subcommand("impute", "Fill missing entries");
  imp->add_option("--in", ia.in, "Masked matrix CSV")->required()->check(CLI::ExistingFile);
  imp->add_option("--out", ia.out, "Completed matrix CSV")->required();
  imp->add_option("--method", ia.method, "rgmm, gmm, knn or mean")
      ->check(CLI::IsMember({"rgmm", "gmm", "knn", "mean"}));
  imp->add_option("--k", ia.k, "KNN neighbours")->check(CLI::PositiveNumber);
  imp->add_option("--alpha", ia.alpha, "Sigmoid slope of the robust weights")->check(CLI::PositiveNumber);
  imp->add_option("--th", ia.th, "Score threshold of the robust weights");
  imp->add_option("--scree", ia.scree, "Scree-test threshold")->check(CLI::NonNegativeNumber);
  imp->add_option("--k-range", ia.k_range, "Candidate K, e.g. 1-5 or 2,3");
  imp->add_option("--max-iter", ia.max_iter, "EM iteration cap")->check(CLI::PositiveNumber);
  imp->add_option("--tol", ia.tol, "Per-sample log-likelihood tolerance")->check(CLI::NonNegativeNumber);
  imp->add_option("--n-trees", ia.n_trees, "Isolation-forest trees")->check(CLI::PositiveNumber);
  imp->add_option("--subsample", ia.subsample, "Isolation-forest subsample size")->check(CLI::Range(2, 1 << 30));
  imp->add_flag("--no-regularize", ia.no_regularize, "Disable covariance regularisation");
  imp->add_option("--seed", ia.seed, "Random seed");
  imp->add_option("--report", ia.report, "Fit diagnostics file");

  DetectArgs da;
  auto* det = app.add_subcommand("detect", "Isolation-forest outlier scores");
  det->add_option("--in", da.in, "Complete matrix CSV")->required()->check(CLI::ExistingFile);
  det->add_option("--out", da.out, "Scores CSV")->required();
  det->add_option("--labels", da.labels, "Labels CSV for the precision curve")->check(CLI::ExistingFile);
  det->add_option("--out-curve", da.out_curve, "Precision curve CSV");
  det->add_option("--n-trees", da.n_trees, "Trees")->check(CLI::PositiveNumber);
  det->add_option("--subsample", da.subsample, "Subsample size")->check(CLI::Range(2, 1 << 30));
  det->add_option("--seed", da.seed, "Random seed");

  ScoreArgs sc;
  auto* score = app.add_subcommand("score", "Reconstruction error on held-out entries");
  score->add_option("--truth", sc.truth, "Truth CSV")->required()->check(CLI::ExistingFile);
  score->add_option("--masked", sc.masked, "Masked matrix CSV")->required()->check(CLI::ExistingFile);
  score->add_option("--imputed", sc.imputed, "Completed matrix CSV")->required()->check(CLI::ExistingFile);
  score->add_option("--labels", sc.labels, "Labels CSV; contaminants are not scored")->check(CLI::ExistingFile);
  score->add_option("--out", sc.out, "Scores CSV");

  ExperimentArgs ea;
  auto* exp = app.add_subcommand("experiment", "Run a Monte-Carlo study");
  exp->add_option("--spec", ea.spec, "YAML experiment spec")->required()->check(CLI::ExistingFile);
  exp->add_option("--out", ea.out, "Output directory")->required();
  exp->add_option("--jobs", ea.jobs, "Worker threads")->check(CLI::PositiveNumber);
  exp->add_option("--seed", ea.seed, "Override the base seed");
  exp->add_flag("--quiet", ea.quiet, "No progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }
  if (version) {
    out << "rgmm " << kVersion << "\n";
    return 0;
  }
  try {
    if (synth->parsed()) return run_synth(sa, out);
    if (mask->parsed()) return run_mask(ma, out, err);
    if (imp->parsed()) return run_impute(ia, out);
    if (det->parsed()) return run_detect(da, out);
    if (score->parsed()) return run_score(sc, out);
    if (exp->parsed()) return run_experiment_cmd(ea, out, err);
    err << app.help();
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace rgmm::cli
