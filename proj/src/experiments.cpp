#include "rgmm/experiments.hpp"

#include "rgmm/config.hpp"
#include "rgmm/errors.hpp"
#include "rgmm/random.hpp"
#include "rgmm/version.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>
#include <tuple>

namespace rgmm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
const char* const kBoth = "S1+S2";
const char* const kS2 = "S2";

struct TaskOutput {
  std::vector<RunRecord> records;
  std::vector<CurvePoint> curves;
};

template <typename F>
void parallel_for(int n, const RunOptions& opt, F&& body) {
  std::atomic<int> next{0};
  std::atomic<int> done{0};
  std::mutex mu;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      int i = next++;
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
      }
      int d = ++done;
      if (opt.progress) {
        std::lock_guard<std::mutex> lock(mu);
        opt.progress(d, n);
      }
    }
  };
  int jobs = std::clamp(opt.jobs, 1, std::max(n, 1));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

RunRecord base_record(Method m, const std::string& variant, int g, double gv, int run, std::uint64_t seed,
                      const std::string& group) {
  RunRecord r;
  r.method = to_string(m);
  r.variant = variant;
  r.grid_index = g;
  r.grid_value = gv;
  r.run = run;
  r.seed = seed;
  r.group = group;
  r.auc = r.normalized_auc = kNaN;
  return r;
}

RunRecord failed_record(RunRecord r, const std::string& why) {
  r.mae = r.rmse = r.r2 = r.auc = r.normalized_auc = kNaN;
  r.status = "failed: " + why;
  return r;
}

void push_stats(std::vector<RunRecord>& out, RunRecord r, const ErrorStats& s) {
  r.count = s.count;
  r.mae = s.mae;
  r.rmse = s.rmse;
  r.r2 = s.r2;
  out.push_back(std::move(r));
}

/// Scores one imputation; `groups` adds the per indicator x statistic rows.
void score_imputation(std::vector<RunRecord>& out, const RunRecord& proto, const std::vector<TruthEntry>& truth,
                      const ImputationResult& res, const ScalingTransform& scaling, bool groups) {
  ReconstructionScores sc = reconstruction_scores(truth, res, scaling);
  RunRecord all = proto;
  all.group = "all";
  push_stats(out, all, sc.overall_scaled);
  if (!groups) return;
  for (const auto& [key, st] : sc.by_group) {
    RunRecord g = proto;
    g.group = key;
    push_stats(out, g, st);
  }
}

std::vector<std::string> variant_list(const ExperimentSpec& spec) {
  std::vector<std::string> v{kBoth};
  if (spec.compare_s1) v.emplace_back(kS2);
  return v;
}

std::vector<RunRecord> impute_and_score(const ExperimentSpec& spec, const MaskedDataset& md,
                                        const std::vector<int>& score_rows, const std::vector<std::string>& variants,
                                        int g, double gv, int run, std::uint64_t seed) {
  std::vector<RunRecord> out;
  for (const auto& variant : variants) {
    MaskedDataset view;
    try {
      view = variant == kS2 ? s2_only(md) : md;
    } catch (const std::exception& e) {
      for (Method m : spec.methods)
        out.push_back(failed_record(base_record(m, variant, g, gv, run, seed, "all"), e.what()));
      continue;
    }
    std::vector<TruthEntry> truth = filter_rows(view.truth, score_rows);
    ScalingTransform scaling = scaling_for_rows(view.masked, score_rows);
    for (Method m : spec.methods) {
      RunRecord proto = base_record(m, variant, g, gv, run, seed, "all");
      try {
        ImputationResult res = run_imputer(m, view.masked, spec, seed);
        score_imputation(out, proto, truth, res, scaling, true);
      } catch (const std::exception& e) {
        out.push_back(failed_record(proto, e.what()));
      }
    }
  }
  return out;
}

bool is_reconstruction(ExperimentKind k) { return k != ExperimentKind::DetectionSweep; }

void summarise(RunSummary& s) {
  using Key = std::tuple<std::string, std::string, int, std::string>;
  std::map<Key, std::vector<const RunRecord*>> cells;
  std::vector<Key> order;
  for (const auto& r : s.runs) {
    Key k{r.method, r.variant, r.grid_index, r.group};
    auto [it, fresh] = cells.try_emplace(k);
    if (fresh) order.push_back(k);
    it->second.push_back(&r);
  }
  std::sort(order.begin(), order.end(), [&](const Key& a, const Key& b) {
    auto ma = std::find(s.spec.methods.begin(), s.spec.methods.end(), parse_method(std::get<0>(a)));
    auto mb = std::find(s.spec.methods.begin(), s.spec.methods.end(), parse_method(std::get<0>(b)));
    return std::make_tuple(std::get<2>(a), ma, std::get<1>(a), std::get<3>(a) != "all", std::get<3>(a)) <
           std::make_tuple(std::get<2>(b), mb, std::get<1>(b), std::get<3>(b) != "all", std::get<3>(b));
  });
  std::vector<std::pair<std::string, double RunRecord::*>> metrics;
  if (is_reconstruction(s.spec.kind))
    metrics = {{"mae", &RunRecord::mae}, {"rmse", &RunRecord::rmse}, {"r2", &RunRecord::r2}};
  else
    metrics = {{"auc", &RunRecord::auc}, {"normalized_auc", &RunRecord::normalized_auc}};
  for (const auto& k : order) {
    const auto& rows = cells[k];
    for (const auto& [name, field] : metrics) {
      std::vector<double> v;
      for (const RunRecord* r : rows)
        if (r->status == "ok") v.push_back(r->*field);
      SummaryRecord rec;
      rec.method = std::get<0>(k);
      rec.variant = std::get<1>(k);
      rec.grid_index = std::get<2>(k);
      rec.grid_value = rows.front()->grid_value;
      rec.group = std::get<3>(k);
      rec.metric = name;
      rec.stats = aggregate(v);
      s.summary.push_back(rec);
    }
  }
}

RunSummary collect(const ExperimentSpec& spec, std::vector<TaskOutput>& outs) {
  RunSummary s;
  s.spec = spec;
  for (auto& o : outs) {
    for (auto& r : o.records) s.runs.push_back(std::move(r));
    for (auto& c : o.curves) s.curves.push_back(c);
  }
  for (const auto& r : s.runs)
    if (r.status.rfind("failed", 0) == 0)
      s.notes.push_back(fmt::format("grid {} run {} {} {}: {}", r.grid_index, r.run, r.method, r.variant, r.status));
  summarise(s);
  return s;
}

std::string csv_double(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{}", v);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::vector<int> scored_rows(const LabeledDataset& d) { return d.rows_without(RowLabel::Contaminant); }

void require_methods(const ExperimentSpec& spec, ExperimentKind kind) {
  if (spec.kind != kind) throw ValidationError("experiment kind does not match the runner");
  spec.validate();
}

}  // namespace

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::MissingSweep: return "missing_sweep";
    case ExperimentKind::ContaminationSweep: return "contamination_sweep";
    case ExperimentKind::DayByDay: return "day_by_day";
    case ExperimentKind::DetectionSweep: return "detection_sweep";
    case ExperimentKind::PerFeatureTable: return "per_feature_table";
    case ExperimentKind::InitSensitivity: return "init_sensitivity";
  }
  return "missing_sweep";
}

ExperimentKind parse_experiment_kind(const std::string& s) {
  for (ExperimentKind k : {ExperimentKind::MissingSweep, ExperimentKind::ContaminationSweep, ExperimentKind::DayByDay,
                           ExperimentKind::DetectionSweep, ExperimentKind::PerFeatureTable,
                           ExperimentKind::InitSensitivity})
    if (to_string(k) == s) return k;
  throw ValidationError(fmt::format("unknown experiment kind '{}'", s));
}

std::string to_string(Method m) {
  switch (m) {
    case Method::RobustGmm: return "rgmm";
    case Method::Gmm: return "gmm";
    case Method::Knn: return "knn";
    case Method::Mean: return "mean";
    case Method::Discard: return "discard";
  }
  return "rgmm";
}

Method parse_method(const std::string& s) {
  for (Method m : {Method::RobustGmm, Method::Gmm, Method::Knn, Method::Mean, Method::Discard})
    if (to_string(m) == s) return m;
  throw ValidationError(fmt::format("unknown method '{}'", s));
}

void ExperimentSpec::validate() const {
  dataset.validate();
  if (methods.empty()) throw ValidationError("experiment needs at least one method");
  if (n_runs < 1) throw ValidationError("n_runs must be at least 1");
  bool grid_used = kind == ExperimentKind::MissingSweep || kind == ExperimentKind::ContaminationSweep ||
                   kind == ExperimentKind::DetectionSweep;
  if (grid_used && grid.empty()) throw ValidationError("experiment grid is empty");
  double cap = kind == ExperimentKind::ContaminationSweep ? 0.5 : 1.0;
  for (double g : grid)
    if (!(g >= 0.0 && g <= cap)) throw ValidationError(fmt::format("grid value {} outside [0, {}]", g, cap));
  if (!(pct_affected >= 0.0 && pct_affected <= 1.0)) throw ValidationError("pct_affected must lie in [0, 1]");
  if (!(pct_cloudy_images >= 0.0 && pct_cloudy_images <= 1.0))
    throw ValidationError("pct_cloudy_images must lie in [0, 1]");
  for (Method m : methods)
    if (m == Method::Discard && kind != ExperimentKind::DetectionSweep)
      throw ValidationError("the discard baseline only applies to detection sweeps");
  if (kind == ExperimentKind::InitSensitivity)
    for (Method m : methods)
      if (m != Method::RobustGmm && m != Method::Gmm)
        throw ValidationError("init sensitivity needs GMM methods");
  if (em.k_range.empty()) throw ValidationError("em.k_range is empty");
  for (int k : em.k_range)
    if (k < 1) throw ValidationError("em.k_range values must be at least 1");
  if (em.max_iterations < 1) throw ValidationError("em.max_iterations must be at least 1");
  if (em.kmeans_restarts < 1) throw ValidationError("em.kmeans_restarts must be at least 1");
  if (!(em.loglik_tolerance >= 0.0)) throw ValidationError("em.loglik_tolerance must be nonnegative");
  if (!(robust.alpha > 0.0)) throw ValidationError("robust.alpha must be positive");
  if (knn_k < 1) throw ValidationError("knn_k must be at least 1");
  if (detector.n_trees < 1 || detector.subsample_size < 2) throw ValidationError("bad detector settings");
  if (robust.forest.n_trees < 1 || robust.forest.subsample_size < 2) throw ValidationError("bad robust forest settings");
  if (ratios.empty()) throw ValidationError("ratio grid is empty");
  for (std::size_t i = 0; i < ratios.size(); ++i)
    if (!(ratios[i] > 0.0 && ratios[i] <= 1.0) || (i > 0 && !(ratios[i] > ratios[i - 1])))
      throw ValidationError("ratios must increase strictly within (0, 1]");
  if (n_inits < 1) throw ValidationError("n_inits must be at least 1");
  if (histogram_bins < 1) throw ValidationError("histogram_bins must be at least 1");
}

double RunSummary::value(const std::string& method, const std::string& variant, int grid_index,
                         const std::string& group, const std::string& metric, const std::string& stat) const {
  for (const auto& r : summary) {
    if (r.method != method || r.variant != variant || r.grid_index != grid_index || r.group != group ||
        r.metric != metric)
      continue;
    if (stat == "mean") return r.stats.mean;
    if (stat == "median") return r.stats.median;
    if (stat == "std") return r.stats.std;
    if (stat == "min") return r.stats.min;
    if (stat == "max") return r.stats.max;
    if (stat == "n") return static_cast<double>(r.stats.count);
    throw ValidationError(fmt::format("unknown statistic '{}'", stat));
  }
  return kNaN;
}

std::uint64_t run_seed(std::uint64_t base, int grid_index, int run) {
  return derive_seed(base, {static_cast<std::uint64_t>(grid_index), static_cast<std::uint64_t>(run)});
}

ImputationResult run_imputer(Method method, const FeatureMatrix& m, const ExperimentSpec& spec, std::uint64_t seed) {
  EmConfig em = spec.em;
  em.seed = seed;
  RobustConfig robust = spec.robust;
  switch (method) {
    case Method::RobustGmm:
      robust.enabled = true;
      return impute_gmm(m, em, robust);
    case Method::Gmm:
      robust.enabled = false;
      return impute_gmm(m, em, robust);
    case Method::Knn: return impute_knn(m, spec.knn_k);
    case Method::Mean: return impute_mean(m);
    case Method::Discard: break;
  }
  throw ValidationError("discard is a detection baseline, not an imputer");
}

MaskedDataset s2_only(const MaskedDataset& d) {
  std::vector<int> keep = d.masked.columns_where([](const ColumnDescriptor& c) { return c.sensor == Sensor::S2; });
  std::vector<int> remap(d.masked.cols(), -1);
  for (std::size_t i = 0; i < keep.size(); ++i) remap[keep[i]] = static_cast<int>(i);
  MaskedDataset out;
  out.masked = d.masked.select_columns(keep);
  for (const auto& t : d.truth)
    if (remap[t.col] >= 0) out.truth.push_back({t.row, remap[t.col], t.value});
  out.cloudy_acquisitions = d.cloudy_acquisitions;
  out.zero_mask_warning = d.zero_mask_warning;
  return out;
}

RunSummary run_missing_sweep(const ExperimentSpec& spec, const RunOptions& opt) {
  require_methods(spec, ExperimentKind::MissingSweep);
  const int n_grid = static_cast<int>(spec.grid.size());
  const int n_tasks = n_grid * spec.n_runs;
  std::vector<TaskOutput> outs(static_cast<std::size_t>(n_tasks));
  auto variants = variant_list(spec);
  parallel_for(n_tasks, opt, [&](int t) {
    int g = t / spec.n_runs, r = t % spec.n_runs;
    std::uint64_t seed = run_seed(spec.base_seed, g, r);
    SyntheticConfig ds = spec.dataset;
    ds.seed = seed;
    LabeledDataset d = generate(ds);
    MaskedDataset md = apply_scenario(d.matrix, {spec.grid[g], std::nullopt, spec.pct_affected, seed});
    outs[t].records = impute_and_score(spec, md, scored_rows(d), variants, g, spec.grid[g], r, seed);
  });
  RunSummary s = collect(spec, outs);
  for (int t = 0; t < n_tasks; ++t) s.seeds.push_back(run_seed(spec.base_seed, t / spec.n_runs, t % spec.n_runs));
  return s;
}

RunSummary run_contamination_sweep(const ExperimentSpec& spec, const RunOptions& opt) {
  require_methods(spec, ExperimentKind::ContaminationSweep);
  const int n_grid = static_cast<int>(spec.grid.size());
  const int n_tasks = n_grid * spec.n_runs;
  std::vector<TaskOutput> outs(static_cast<std::size_t>(n_tasks));
  parallel_for(n_tasks, opt, [&](int t) {
    int g = t / spec.n_runs, r = t % spec.n_runs;
    std::uint64_t seed = run_seed(spec.base_seed, g, r);
    SyntheticConfig ds = spec.dataset;
    ds.seed = seed;
    ds.contamination_fraction = spec.grid[g];
    LabeledDataset d = generate(ds);
    MaskedDataset md = apply_scenario(d.matrix, {spec.pct_cloudy_images, std::nullopt, spec.pct_affected, seed});
    outs[t].records = impute_and_score(spec, md, scored_rows(d), {kBoth}, g, spec.grid[g], r, seed);
  });
  RunSummary s = collect(spec, outs);
  for (int t = 0; t < n_tasks; ++t) s.seeds.push_back(run_seed(spec.base_seed, t / spec.n_runs, t % spec.n_runs));
  return s;
}

RunSummary run_day_by_day(const ExperimentSpec& spec, const RunOptions& opt) {
  require_methods(spec, ExperimentKind::DayByDay);
  std::vector<TaskOutput> outs(static_cast<std::size_t>(spec.n_runs));
  parallel_for(spec.n_runs, opt, [&](int r) {
    std::uint64_t seed = run_seed(spec.base_seed, 0, r);
    SyntheticConfig ds = spec.dataset;
    ds.seed = seed;
    LabeledDataset d = generate(ds);
    std::vector<int> rows = scored_rows(d);
    auto scenarios = day_by_day_scenarios(d.matrix, spec.pct_affected, seed);
    for (std::size_t j = 0; j < scenarios.size(); ++j) {
      int acq = scenarios[j].cloudy_acquisitions.front();
      std::vector<TruthEntry> truth = filter_rows(scenarios[j].truth, rows);
      for (Method m : spec.methods) {
        RunRecord proto = base_record(m, kBoth, static_cast<int>(j), acq, r, seed, "all");
        if (truth.empty()) {
          proto.mae = proto.rmse = proto.r2 = kNaN;
          proto.status = "undefined";
          outs[r].records.push_back(proto);
          continue;
        }
        try {
          ImputationResult res = run_imputer(m, scenarios[j].masked, spec, seed);
          score_imputation(outs[r].records, proto, truth, res, scaling_for_rows(scenarios[j].masked, rows), false);
        } catch (const std::exception& e) {
          outs[r].records.push_back(failed_record(proto, e.what()));
        }
      }
    }
  });
  RunSummary s = collect(spec, outs);
  for (int r = 0; r < spec.n_runs; ++r) s.seeds.push_back(run_seed(spec.base_seed, 0, r));
  return s;
}

RunSummary run_detection_sweep(const ExperimentSpec& spec, const RunOptions& opt) {
  require_methods(spec, ExperimentKind::DetectionSweep);
  if (spec.dataset.anomaly_fraction <= 0.0 && spec.dataset.contamination_fraction <= 0.0)
    throw ValidationError("detection sweeps need a dataset with anomaly labels");
  const int n_grid = static_cast<int>(spec.grid.size());
  const int n_tasks = n_grid * spec.n_runs;
  std::vector<TaskOutput> outs(static_cast<std::size_t>(n_tasks));
  parallel_for(n_tasks, opt, [&](int t) {
    int g = t / spec.n_runs, r = t % spec.n_runs;
    std::uint64_t seed = run_seed(spec.base_seed, g, r);
    SyntheticConfig ds = spec.dataset;
    ds.seed = seed;
    LabeledDataset d = generate(ds);
    std::vector<bool> positive(d.labels.size());
    for (std::size_t i = 0; i < d.labels.size(); ++i) positive[i] = d.labels[i] != RowLabel::Normal;
    MaskedDataset md = apply_scenario(d.matrix, {spec.grid[g], std::nullopt, spec.pct_affected, seed});
    IfConfig det = spec.detector;
    det.seed = derive_seed(seed, {5});
    for (Method m : spec.methods) {
      RunRecord rec = base_record(m, kBoth, g, spec.grid[g], r, seed, "all");
      try {
        Eigen::MatrixXd x;
        if (m == Method::Discard) {
          const auto& cloudy = md.cloudy_acquisitions;
          std::vector<int> keep = md.masked.columns_where([&](const ColumnDescriptor& c) {
            return c.sensor != Sensor::S2 ||
                   !std::binary_search(cloudy.begin(), cloudy.end(), c.acquisition_index);
          });
          FeatureMatrix kept = md.masked.select_columns(keep);
          if (!kept.fully_observed()) throw ValidationError("discarding cloudy images left missing entries");
          x = kept.values();
        } else {
          x = run_imputer(m, md.masked, spec, seed).completed.values();
        }
        IsolationForest forest = IsolationForest::fit(x, det);
        Eigen::VectorXd sc = forest.score_all(x);
        std::vector<double> scores(sc.data(), sc.data() + sc.size());
        DetectionCurve curve = precision_curve(scores, positive, spec.ratios);
        rec.count = scores.size();
        rec.mae = rec.rmse = rec.r2 = kNaN;
        rec.auc = curve.auc;
        rec.normalized_auc = curve.normalized_auc;
        outs[t].records.push_back(rec);
        for (std::size_t i = 0; i < curve.ratios.size(); ++i)
          outs[t].curves.push_back({rec.method, g, r, curve.ratios[i], curve.precision[i]});
      } catch (const std::exception& e) {
        outs[t].records.push_back(failed_record(rec, e.what()));
      }
    }
  });
  RunSummary s = collect(spec, outs);
  for (int t = 0; t < n_tasks; ++t) s.seeds.push_back(run_seed(spec.base_seed, t / spec.n_runs, t % spec.n_runs));
  return s;
}

RunSummary run_per_feature_table(const ExperimentSpec& spec, const RunOptions& opt) {
  require_methods(spec, ExperimentKind::PerFeatureTable);
  std::vector<TaskOutput> outs(static_cast<std::size_t>(spec.n_runs));
  const double one_image = 1.0 / spec.dataset.n_s2_acquisitions;
  parallel_for(spec.n_runs, opt, [&](int r) {
    std::uint64_t seed = run_seed(spec.base_seed, 0, r);
    SyntheticConfig ds = spec.dataset;
    ds.seed = seed;
    LabeledDataset d = generate(ds);
    MaskedDataset md = apply_scenario(d.matrix, {one_image, std::nullopt, spec.pct_affected, seed});
    outs[r].records = impute_and_score(spec, md, scored_rows(d), {kBoth}, 0, one_image, r, seed);
  });
  RunSummary s = collect(spec, outs);
  for (int r = 0; r < spec.n_runs; ++r) s.seeds.push_back(run_seed(spec.base_seed, 0, r));
  return s;
}

RunSummary run_init_sensitivity(const ExperimentSpec& spec, const RunOptions& opt) {
  require_methods(spec, ExperimentKind::InitSensitivity);
  const std::uint64_t data_seed = run_seed(spec.base_seed, 0, 0);
  SyntheticConfig ds = spec.dataset;
  ds.seed = data_seed;
  LabeledDataset d = generate(ds);
  MaskedDataset md = apply_scenario(d.matrix, {spec.pct_cloudy_images, std::nullopt, spec.pct_affected, data_seed});
  std::vector<TruthEntry> truth = filter_rows(md.truth, scored_rows(d));
  const ScalingTransform scaling = scaling_for_rows(md.masked, scored_rows(d));

  std::vector<TaskOutput> outs(static_cast<std::size_t>(spec.n_inits));
  parallel_for(spec.n_inits, opt, [&](int i) {
    std::uint64_t seed = derive_seed(data_seed, {static_cast<std::uint64_t>(i) + 1});
    for (Method m : spec.methods) {
      RunRecord proto = base_record(m, kBoth, 0, spec.pct_cloudy_images, i, seed, "all");
      try {
        ImputationResult res = run_imputer(m, md.masked, spec, seed);
        score_imputation(outs[i].records, proto, truth, res, scaling, false);
      } catch (const std::exception& e) {
        outs[i].records.push_back(failed_record(proto, e.what()));
      }
    }
  });
  RunSummary s = collect(spec, outs);
  s.seeds.push_back(data_seed);
  for (int i = 0; i < spec.n_inits; ++i) s.seeds.push_back(derive_seed(data_seed, {static_cast<std::uint64_t>(i) + 1}));

  const std::string first = to_string(spec.methods.front());
  std::vector<double> maes;
  for (const auto& r : s.runs)
    if (r.method == first && r.status == "ok") maes.push_back(r.mae);
  Aggregate a = aggregate(maes);
  for (Method m : spec.methods) {
    std::vector<double> v;
    for (const auto& r : s.runs)
      if (r.method == to_string(m) && r.status == "ok") v.push_back(r.mae);
    Aggregate am = aggregate(v);
    double spread = am.max - am.min;
    for (auto [name, val] : {std::pair{"spread", spread}, std::pair{"relative_spread", spread / am.median}}) {
      SummaryRecord rec{to_string(m), kBoth, 0, spec.pct_cloudy_images, "all", name, {}};
      rec.stats = aggregate({val});
      s.summary.push_back(rec);
    }
  }
  if (!maes.empty()) {
    const int bins = spec.histogram_bins;
    double width = (a.max - a.min) / bins;
    s.histogram_counts.assign(static_cast<std::size_t>(bins), 0);
    for (int b = 0; b < bins; ++b) s.histogram_edges.push_back(a.min + b * width);
    for (double v : maes) {
      int b = width > 0.0 ? static_cast<int>((v - a.min) / width) : 0;
      s.histogram_counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))]++;
    }
  }
  return s;
}

RunSummary run_experiment(const ExperimentSpec& spec, const RunOptions& opt) {
  switch (spec.kind) {
    case ExperimentKind::MissingSweep: return run_missing_sweep(spec, opt);
    case ExperimentKind::ContaminationSweep: return run_contamination_sweep(spec, opt);
    case ExperimentKind::DayByDay: return run_day_by_day(spec, opt);
    case ExperimentKind::DetectionSweep: return run_detection_sweep(spec, opt);
    case ExperimentKind::PerFeatureTable: return run_per_feature_table(spec, opt);
    case ExperimentKind::InitSensitivity: return run_init_sensitivity(spec, opt);
  }
  throw ValidationError("unknown experiment kind");
}

std::map<std::string, std::string> format_tables(const RunSummary& s) {
  std::map<std::string, std::string> t;
  const std::string exp = csv_field(s.spec.name);

  std::string runs = "experiment,method,variant,grid_index,grid_value,run,seed,group,count,mae,rmse,r2,auc,"
                     "normalized_auc,status\n";
  for (const auto& r : s.runs)
    runs += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", exp, r.method, r.variant, r.grid_index,
                        csv_double(r.grid_value), r.run, r.seed, csv_field(r.group), r.count, csv_double(r.mae),
                        csv_double(r.rmse), csv_double(r.r2), csv_double(r.auc), csv_double(r.normalized_auc),
                        csv_field(r.status));
  t["runs.csv"] = runs;

  std::string sum = "experiment,method,variant,grid_index,grid_value,group,metric,n,mean,median,std,min,max\n";
  for (const auto& r : s.summary)
    sum += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", exp, r.method, r.variant, r.grid_index,
                       csv_double(r.grid_value), csv_field(r.group), r.metric, r.stats.count,
                       csv_double(r.stats.mean), csv_double(r.stats.median), csv_double(r.stats.std),
                       csv_double(r.stats.min), csv_double(r.stats.max));
  t["summary.csv"] = sum;

  if (s.spec.kind == ExperimentKind::DetectionSweep) {
    std::string c = "experiment,method,grid_index,run,ratio,precision\n";
    for (const auto& p : s.curves)
      c += fmt::format("{},{},{},{},{},{}\n", exp, p.method, p.grid_index, p.run, csv_double(p.ratio),
                       csv_double(p.precision));
    t["curves.csv"] = c;
  }
  if (s.spec.kind == ExperimentKind::PerFeatureTable) {
    std::string c = "group,method,n,mae_mean,mae_std,rmse_mean,rmse_std,r2_mean,r2_std\n";
    std::vector<std::string> groups;
    for (const auto& r : s.summary)
      if (r.group != "all" && std::find(groups.begin(), groups.end(), r.group) == groups.end())
        groups.push_back(r.group);
    for (const auto& g : groups)
      for (Method m : s.spec.methods) {
        std::string name = to_string(m);
        auto v = [&](const char* metric, const char* stat) {
          return csv_double(s.value(name, kBoth, 0, g, metric, stat));
        };
        c += fmt::format("{},{},{},{},{},{},{},{},{}\n", csv_field(g), name,
                         static_cast<int>(s.value(name, kBoth, 0, g, "mae", "n")), v("mae", "mean"),
                         v("mae", "std"), v("rmse", "mean"), v("rmse", "std"), v("r2", "mean"), v("r2", "std"));
      }
    t["table.csv"] = c;
  }
  if (s.spec.kind == ExperimentKind::InitSensitivity) {
    std::string c = "bin_lower,count\n";
    for (std::size_t b = 0; b < s.histogram_counts.size(); ++b)
      c += fmt::format("{},{}\n", csv_double(s.histogram_edges[b]), s.histogram_counts[b]);
    t["histogram.csv"] = c;
  }
  return t;
}

std::vector<std::string> write_outputs(const RunSummary& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto tables = format_tables(s);
  std::vector<std::string> written;
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw ValidationError(fmt::format("cannot write '{}'", (dir / name).string()));
    f << body;
    written.push_back(name);
  };
  for (const auto& [name, body] : tables) write(name, body);

  std::string manifest = fmt::format("version: \"{}\"\nkind: {}\nname: \"{}\"\n", kVersion, to_string(s.spec.kind),
                                     s.spec.name);
  manifest += "tables:\n";
  for (const auto& [name, body] : tables) manifest += fmt::format("  - {}\n", name);
  manifest += "seeds:\n";
  for (auto seed : s.seeds) manifest += fmt::format("  - {}\n", seed);
  manifest += "notes:\n";
  for (std::string n : s.notes) {
    std::replace(n.begin(), n.end(), '"', '\'');
    manifest += fmt::format("  - \"{}\"\n", n);
  }
  if (s.notes.empty()) manifest.replace(manifest.size() - 1, 1, " []\n");
  manifest += "spec:\n";
  std::string echo = format_experiment_spec(s.spec);
  std::size_t pos = 0;
  while (pos < echo.size()) {
    std::size_t end = echo.find('\n', pos);
    if (end == std::string::npos) end = echo.size();
    manifest += "  " + echo.substr(pos, end - pos) + "\n";
    pos = end + 1;
  }
  write("manifest.yaml", manifest);
  return written;
}

}  // namespace rgmm
