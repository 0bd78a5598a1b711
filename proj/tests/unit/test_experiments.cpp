#include "helpers.hpp"

#include "rgmm/config.hpp"
#include "rgmm/errors.hpp"
#include "rgmm/experiments.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

using namespace rgmm;

namespace {

ExperimentSpec tiny(ExperimentKind kind) {
  ExperimentSpec s;
  s.kind = kind;
  s.name = "tiny";
  s.dataset.n_parcels = 60;
  s.methods = {Method::Gmm, Method::Knn, Method::Mean};
  s.grid = {0.23};
  s.n_runs = 2;
  s.base_seed = 3;
  s.em.k_range = {1};
  s.em.kmeans_restarts = 1;
  s.n_inits = 4;
  s.histogram_bins = 3;
  return s;
}

int count_runs(const RunSummary& s, const std::string& method, const std::string& group) {
  int n = 0;
  for (const auto& r : s.runs) n += r.method == method && r.group == group;
  return n;
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("run seeds are a pure function of their inputs") {
  CHECK(run_seed(1, 0, 0) == run_seed(1, 0, 0));
  std::set<std::uint64_t> seen;
  for (int g = 0; g < 4; ++g)
    for (int r = 0; r < 10; ++r) seen.insert(run_seed(7, g, r));
  CHECK(seen.size() == 40);
  CHECK(run_seed(7, 0, 1) != run_seed(8, 0, 1));
}

TEST_CASE("no cloudy images means nothing to reconstruct") {
  ExperimentSpec s = tiny(ExperimentKind::MissingSweep);
  s.grid = {0.0};
  s.compare_s1 = false;
  RunSummary out = run_experiment(s);
  for (const auto& r : out.runs) {
    CHECK(r.status == "ok");
    CHECK(r.count == 0);
    CHECK(r.mae == 0.0);
  }
}

TEST_CASE("missing sweep masks the expected number of images") {
  ExperimentSpec s = tiny(ExperimentKind::MissingSweep);
  RunSummary out = run_experiment(s);
  // 3 images x 30 parcels x 10 S2 columns.
  for (const auto& r : out.runs) {
    REQUIRE(r.status == "ok");
    if (r.group == "all") CHECK(r.count == 3u * 30u * 10u);
    if (r.group == "NDVI:median") CHECK(r.count == 3u * 30u);
  }
  CHECK(out.seeds.size() == 2);
  CHECK(out.seeds[1] == run_seed(3, 0, 1));
  for (const char* m : {"gmm", "knn", "mean"})
    for (const char* v : {"S1+S2", "S2"}) CHECK(out.value(m, v, 0, "all", "mae", "n") == 2.0);
  CHECK(std::isnan(out.value("rgmm", "S2", 0, "all", "mae", "mean")));
}

TEST_CASE("identical specs give byte-identical tables") {
  ExperimentSpec s = tiny(ExperimentKind::MissingSweep);
  s.compare_s1 = false;
  auto a = format_tables(run_experiment(s));
  RunOptions two;
  two.jobs = 2;
  auto b = format_tables(run_experiment(s, two));
  CHECK(a == b);
  REQUIRE(a.count("runs.csv"));
  REQUIRE(a.count("summary.csv"));
  CHECK(a["runs.csv"].rfind("experiment,method,variant,", 0) == 0);
}

TEST_CASE("contamination rows are excluded from scoring") {
  ExperimentSpec s = tiny(ExperimentKind::ContaminationSweep);
  s.methods = {Method::Mean};
  s.grid = {0.0, 0.5};
  s.n_runs = 1;
  RunSummary out = run_experiment(s);
  std::vector<std::size_t> counts;
  for (const auto& r : out.runs)
    if (r.group == "all") counts.push_back(r.count);
  REQUIRE(counts.size() == 2);
  CHECK(counts[0] == 3u * 30u * 10u);
  // 45 of 90 rows masked per image; only the 60 base rows count.
  CHECK(counts[1] > 0);
  CHECK(counts[1] < 3u * 45u * 10u);
  CHECK(counts[1] % 10 == 0);
}

TEST_CASE("day by day covers every acquisition") {
  ExperimentSpec s = tiny(ExperimentKind::DayByDay);
  s.methods = {Method::Mean};
  s.n_runs = 1;
  RunSummary out = run_experiment(s);
  CHECK(count_runs(out, "mean", "all") == 13);
  std::set<double> acqs;
  for (const auto& r : out.runs) acqs.insert(r.grid_value);
  CHECK(acqs.size() == 13);
}

TEST_CASE("per-feature table has one row per group and method") {
  ExperimentSpec s = tiny(ExperimentKind::PerFeatureTable);
  s.methods = {Method::Knn, Method::Mean};
  RunSummary out = run_experiment(s);
  auto t = format_tables(out);
  REQUIRE(t.count("table.csv"));
  const std::string& csv = t["table.csv"];
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 10 * 2);
}

TEST_CASE("detection sweep") {
  ExperimentSpec s = tiny(ExperimentKind::DetectionSweep);
  CHECK_THROWS_AS(run_experiment(s), ValidationError);
  s.dataset.anomaly_fraction = 0.1;
  s.methods = {Method::Mean, Method::Discard};
  s.detector.n_trees = 20;
  RunSummary out = run_experiment(s);
  auto t = format_tables(out);
  REQUIRE(t.count("curves.csv"));
  CHECK(out.curves.size() == 2u * 2u * s.ratios.size());
  for (const auto& r : out.runs) {
    CHECK(r.status == "ok");
    CHECK(r.auc >= 0.0);
    CHECK(r.normalized_auc <= 1.0);
  }
}

TEST_CASE("init sensitivity histogram") {
  ExperimentSpec s = tiny(ExperimentKind::InitSensitivity);
  s.methods = {Method::Gmm};
  s.em.k_range = {2};
  s.dataset.n_parcels = 80;
  RunSummary out = run_experiment(s);
  CHECK(std::accumulate(out.histogram_counts.begin(), out.histogram_counts.end(), 0) == 4);
  CHECK(out.histogram_edges.size() == 3);
  CHECK(out.seeds.size() == 5);
  CHECK(out.value("gmm", "S1+S2", 0, "all", "spread", "mean") >= 0.0);
  s.methods = {Method::Knn};
  CHECK_THROWS_AS(run_experiment(s), ValidationError);
}

TEST_CASE("imputer dispatch") {
  ExperimentSpec s = tiny(ExperimentKind::MissingSweep);
  Rng rng(1);
  Eigen::MatrixXd x = test::gaussian_block(20, 3, rng);
  BoolMatrix obs = test::mcar_mask(20, 3, 0.2, rng);
  FeatureMatrix m = test::masked_matrix(x, obs);
  CHECK(run_imputer(Method::Mean, m, s, 1).method == "mean");
  CHECK(run_imputer(Method::Knn, m, s, 1).method == "knn");
  CHECK(run_imputer(Method::RobustGmm, m, s, 1).method == "rgmm");
  CHECK_THROWS_AS(run_imputer(Method::Discard, m, s, 1), ValidationError);
}

TEST_CASE("S2-only view remaps the truth") {
  SyntheticConfig cfg;
  cfg.n_parcels = 20;
  MaskedDataset d = apply_scenario(generate(cfg).matrix, {0.23, std::nullopt, 0.5, 2});
  MaskedDataset v = s2_only(d);
  CHECK(v.masked.cols() == 130);
  REQUIRE(v.truth.size() == d.truth.size());
  for (std::size_t i = 0; i < v.truth.size(); ++i) {
    CHECK(v.masked.columns()[v.truth[i].col] == d.masked.columns()[d.truth[i].col]);
    CHECK(v.truth[i].value == d.truth[i].value);
  }
}

TEST_CASE("spec validation") {
  ExperimentSpec s = tiny(ExperimentKind::MissingSweep);
  s.methods = {Method::Discard};
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = tiny(ExperimentKind::ContaminationSweep);
  s.grid = {0.6};
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = tiny(ExperimentKind::MissingSweep);
  s.n_runs = 0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  CHECK_THROWS_AS(parse_method("em"), ValidationError);
  CHECK_THROWS_AS(parse_experiment_kind("sweep"), ValidationError);
  for (auto k : {ExperimentKind::MissingSweep, ExperimentKind::DayByDay, ExperimentKind::InitSensitivity})
    CHECK(parse_experiment_kind(to_string(k)) == k);
}

TEST_CASE("spec YAML round trip") {
  ExperimentSpec s = tiny(ExperimentKind::DetectionSweep);
  s.dataset.anomaly_fraction = 0.05;
  s.robust.alpha = 25.0;
  s.ratios = {0.1, 0.2};
  const std::string text = format_experiment_spec(s);
  ExperimentSpec back = parse_experiment_spec(text);
  CHECK(format_experiment_spec(back) == text);
  CHECK(back.dataset.n_parcels == 60);
  CHECK(back.robust.alpha == 25.0);
  CHECK(back.em.k_range == std::vector<int>{1});
  CHECK_THROWS_AS(parse_experiment_spec("kind: missing_sweep\nbogus: 1\n"), ValidationError);
  CHECK_THROWS_AS(parse_experiment_spec("kind: missing_sweep\nem:\n  nope: 2\n"), ValidationError);
  CHECK_THROWS_AS(parse_experiment_spec("kind: [\n"), ValidationError);
  CHECK(parse_experiment_spec("kind: contamination_sweep\n").grid ==
        std::vector<double>{0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30});
  CHECK(parse_experiment_spec("kind: missing_sweep\n").grid == std::vector<double>{0.08, 0.23, 0.46, 0.70});

  SyntheticConfig cfg;
  cfg.n_parcels = 123;
  cfg.noise_scale = 0.7;
  SyntheticConfig cfg2 = parse_synthetic_config(format_synthetic_config(cfg));
  CHECK(cfg2.n_parcels == 123);
  CHECK(cfg2.noise_scale == 0.7);
}

TEST_CASE("shipped specs parse") {
  int n = 0;
  for (const auto& f : std::filesystem::directory_iterator(RGMM_CONFIG_DIR)) {
    if (f.path().extension() != ".yaml") continue;
    CAPTURE(f.path().string());
    ExperimentSpec s = load_experiment_spec(f.path());
    CHECK(s.name == f.path().stem().string());
    ++n;
  }
  CHECK(n == 6);
}

TEST_CASE("outputs and manifest") {
  ExperimentSpec s = tiny(ExperimentKind::MissingSweep);
  s.methods = {Method::Mean};
  s.n_runs = 1;
  auto dir = test::scratch_dir("experiments");
  auto files = write_outputs(run_experiment(s), dir);
  CHECK(std::find(files.begin(), files.end(), "manifest.yaml") != files.end());
  std::string manifest = read_text_file(dir / "manifest.yaml");
  CHECK(manifest.find("kind: missing_sweep") != std::string::npos);
  CHECK(manifest.find(std::to_string(run_seed(3, 0, 0))) != std::string::npos);
}

}
