#include "helpers.hpp"

#include "cli.hpp"
#include "rgmm/config.hpp"
#include "rgmm/masking.hpp"
#include "rgmm/version.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

using namespace rgmm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "rgmm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string p(const fs::path& f) { return f.string(); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("version and usage errors") {
  Outcome v = run({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find(kVersion) != std::string::npos);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"impute", "--method", "knn"}).code == 1);
  CHECK(run({}).code == 1);
}

TEST_CASE("a missing input leaves no outputs behind") {
  auto dir = test::scratch_dir("cli_missing");
  Outcome o = run({"mask", "--in", p(dir / "nope.csv"), "--out-masked", p(dir / "m.csv"), "--out-truth",
                   p(dir / "t.csv")});
  CHECK(o.code == 1);
  CHECK_FALSE(fs::exists(dir / "m.csv"));
  CHECK_FALSE(fs::exists(dir / "t.csv"));
}

TEST_CASE("invalid file contents exit with 1") {
  auto dir = test::scratch_dir("cli_invalid");
  {
    std::ofstream f(dir / "bad.csv");
    f << "id,S2:NDVI:median:0\nr0,1\n";
  }
  Outcome o = run({"impute", "--in", p(dir / "bad.csv"), "--out", p(dir / "out.csv"), "--method", "mean"});
  CHECK(o.code == 1);
  CHECK(o.err.find("error") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "out.csv"));
}

TEST_CASE("pipeline from synthesis to scoring") {
  auto dir = test::scratch_dir("cli_pipeline");
  const std::string data = p(dir / "data.csv"), labels = p(dir / "labels.csv");
  Outcome s = run({"synth", "--n-parcels", "80", "--anomaly-fraction", "0.1", "--seed", "4", "--out", data,
                   "--labels", labels});
  REQUIRE(s.code == 0);
  FeatureMatrix full = load_matrix(data);
  CHECK(full.rows() == 80);
  CHECK(full.cols() == 150);

  Outcome m = run({"mask", "--in", data, "--pct-images", "0.23", "--seed", "2", "--out-masked",
                   p(dir / "masked.csv"), "--out-truth", p(dir / "truth.csv")});
  REQUIRE(m.code == 0);
  FeatureMatrix masked = load_matrix(dir / "masked.csv");
  auto truth = load_truth(dir / "truth.csv", masked);
  std::set<int> acqs;
  for (const auto& t : truth) acqs.insert(masked.columns()[t.col].acquisition_index);
  CHECK(acqs.size() == 3);
  CHECK(truth.size() == 3u * 40u * 10u);

  for (const char* method : {"gmm", "knn", "mean"}) {
    const std::string out = p(dir / (std::string(method) + ".csv"));
    Outcome i = run({"impute", "--in", p(dir / "masked.csv"), "--out", out, "--method", method, "--k-range", "1",
                     "--report", p(dir / "report.txt")});
    REQUIRE(i.code == 0);
    FeatureMatrix done = load_matrix(out);
    CHECK(done.fully_observed());
    Outcome sc = run({"score", "--truth", p(dir / "truth.csv"), "--masked", p(dir / "masked.csv"), "--imputed", out,
                      "--labels", labels, "--out", p(dir / "score.csv")});
    REQUIRE(sc.code == 0);
    CHECK(sc.out.rfind("group,count,mae,rmse,r2\nall,1200,", 0) == 0);
    CHECK(read_text_file(dir / "score.csv") == sc.out);
  }

  Outcome d = run({"detect", "--in", p(dir / "gmm.csv"), "--labels", labels, "--out", p(dir / "scores.csv"),
                   "--out-curve", p(dir / "curve.csv"), "--n-trees", "50"});
  REQUIRE(d.code == 0);
  CHECK(d.out.find("normalized_auc") != std::string::npos);
  std::stringstream scores(read_text_file(dir / "scores.csv"));
  std::string line;
  std::getline(scores, line);
  CHECK(line == "parcel_id,score");
  std::vector<double> listed;
  while (std::getline(scores, line)) listed.push_back(std::stod(line.substr(line.find(',') + 1)));
  CHECK(listed.size() == 80);
  CHECK(std::is_sorted(listed.rbegin(), listed.rend()));
  std::string curve = read_text_file(dir / "curve.csv");
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 21);
  CHECK(run({"detect", "--in", p(dir / "masked.csv"), "--out", p(dir / "x.csv")}).code == 1);
  CHECK(run({"score", "--truth", p(dir / "truth.csv"), "--masked", p(dir / "masked.csv"), "--imputed",
             p(dir / "masked.csv")})
            .code == 1);
}

TEST_CASE("the experiment command writes the tables") {
  auto dir = test::scratch_dir("cli_experiment");
  {
    std::ofstream f(dir / "spec.yaml");
    f << "kind: missing_sweep\nname: cli\ndataset:\n  n_parcels: 50\nmethods: [knn, mean]\ngrid: [0.08]\n"
         "n_runs: 2\nbase_seed: 5\n";
  }
  Outcome o = run({"experiment", "--spec", p(dir / "spec.yaml"), "--out", p(dir / "out"), "--quiet"});
  REQUIRE(o.code == 0);
  for (const char* f : {"runs.csv", "summary.csv", "manifest.yaml"}) CHECK(fs::exists(dir / "out" / f));
  ExperimentSpec echoed = parse_experiment_spec(read_text_file(dir / "spec.yaml"));
  CHECK(echoed.robust.alpha == 40.0);
  CHECK(echoed.robust.th == 0.5);
  {
    std::ofstream f(dir / "bad.yaml");
    f << "kind: missing_sweep\nmystery: true\n";
  }
  CHECK(run({"experiment", "--spec", p(dir / "bad.yaml"), "--out", p(dir / "bad")}).code == 1);
  CHECK_FALSE(fs::exists(dir / "bad"));
}

TEST_CASE("numerical failure exits with 2") {
  auto dir = test::scratch_dir("cli_numeric");
  Rng rng(3);
  Eigen::MatrixXd x = test::gaussian_block(4, 30, rng);
  BoolMatrix obs = BoolMatrix::Constant(4, 30, true);
  obs(0, 0) = false;
  save_matrix(test::masked_matrix(x, obs), dir / "m.csv");
  Outcome o = run({"impute", "--in", p(dir / "m.csv"), "--out", p(dir / "o.csv"), "--method", "gmm", "--k-range",
                   "1", "--no-regularize"});
  CHECK(o.code == 2);
  CHECK(o.err.find("numerical") != std::string::npos);
}

}
