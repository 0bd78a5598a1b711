#pragma once

#include "rgmm/gmm.hpp"
#include "rgmm/imputers.hpp"
#include "rgmm/isolation_forest.hpp"
#include "rgmm/masking.hpp"
#include "rgmm/metrics.hpp"
#include "rgmm/synthetic.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace rgmm {

enum class ExperimentKind {
  MissingSweep,
  ContaminationSweep,
  DayByDay,
  DetectionSweep,
  PerFeatureTable,
  InitSensitivity,
};

std::string to_string(ExperimentKind k);
ExperimentKind parse_experiment_kind(const std::string& s);

/// rgmm, gmm, knn, mean; detection sweeps also accept discard.
enum class Method { RobustGmm, Gmm, Knn, Mean, Discard };

std::string to_string(Method m);
Method parse_method(const std::string& s);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::MissingSweep;
  std::string name = "experiment";
  SyntheticConfig dataset;
  std::vector<Method> methods{Method::RobustGmm, Method::Knn, Method::Mean};
  /// Meaning depends on the kind: cloudy-image fraction for missing and
  /// detection sweeps, contamination fraction for contamination sweeps.
  /// Day-by-day, per-feature and init-sensitivity runs ignore it.
  std::vector<double> grid{0.08, 0.23, 0.46, 0.70};
  int n_runs = 50;
  std::uint64_t base_seed = 0;

  double pct_affected = 0.5;
  /// Cloudy-image fraction where the grid does not set it.
  double pct_cloudy_images = 0.23;
  /// Missing sweeps also score every method on the S2 columns alone.
  bool compare_s1 = true;

  EmConfig em;
  RobustConfig robust{true, 40.0, 0.5, {}};
  int knn_k = 5;
  IfConfig detector;
  std::vector<double> ratios = default_ratio_grid();
  int n_inits = 50;
  int histogram_bins = 10;

  void validate() const;
};

/// One scored (method, variant, grid point, run, group) cell.
struct RunRecord {
  std::string method;
  /// "S1+S2" or "S2".
  std::string variant;
  int grid_index = 0;
  double grid_value = 0.0;
  int run = 0;
  std::uint64_t seed = 0;
  /// "all", an "INDICATOR:STAT" key, or "acq:<index>".
  std::string group;
  std::size_t count = 0;
  double mae = 0.0;
  double rmse = 0.0;
  double r2 = 0.0;
  double auc = 0.0;
  double normalized_auc = 0.0;
  /// ok, undefined (nothing to score), or failed: <reason>.
  std::string status = "ok";
};

struct SummaryRecord {
  std::string method;
  std::string variant;
  int grid_index = 0;
  double grid_value = 0.0;
  std::string group;
  std::string metric;
  Aggregate stats;
};

struct CurvePoint {
  std::string method;
  int grid_index = 0;
  int run = 0;
  double ratio = 0.0;
  double precision = 0.0;
};

struct RunSummary {
  ExperimentSpec spec;
  std::vector<RunRecord> runs;
  std::vector<SummaryRecord> summary;
  std::vector<CurvePoint> curves;
  /// Seeds of every (grid point, run) pair, in grid-major order.
  std::vector<std::uint64_t> seeds;
  /// Init-sensitivity histogram: bin lower edges and counts.
  std::vector<double> histogram_edges;
  std::vector<int> histogram_counts;
  std::vector<std::string> notes;

  /// Looks up a summary value; NaN when absent.
  double value(const std::string& method, const std::string& variant, int grid_index, const std::string& group,
               const std::string& metric, const std::string& stat) const;
};

struct RunOptions {
  int jobs = 1;
  /// Called after each finished task with (done, total).
  std::function<void(int, int)> progress;
};

std::uint64_t run_seed(std::uint64_t base, int grid_index, int run);

RunSummary run_experiment(const ExperimentSpec& spec, const RunOptions& opt = {});
RunSummary run_missing_sweep(const ExperimentSpec& spec, const RunOptions& opt = {});
RunSummary run_contamination_sweep(const ExperimentSpec& spec, const RunOptions& opt = {});
RunSummary run_day_by_day(const ExperimentSpec& spec, const RunOptions& opt = {});
RunSummary run_detection_sweep(const ExperimentSpec& spec, const RunOptions& opt = {});
RunSummary run_per_feature_table(const ExperimentSpec& spec, const RunOptions& opt = {});
RunSummary run_init_sensitivity(const ExperimentSpec& spec, const RunOptions& opt = {});

/// Imputation by one method. Discard is not an imputer and is rejected.
ImputationResult run_imputer(Method method, const FeatureMatrix& m, const ExperimentSpec& spec, std::uint64_t seed);

/// The S2 columns of a masked dataset, with truth remapped to the new columns.
MaskedDataset s2_only(const MaskedDataset& d);

/// runs.csv, summary.csv and the kind-specific tables.
std::map<std::string, std::string> format_tables(const RunSummary& s);
/// Writes the tables and manifest.yaml into `dir`; returns the written file names.
std::vector<std::string> write_outputs(const RunSummary& s, const std::filesystem::path& dir);

}  // namespace rgmm
