#include "helpers.hpp"

#include "rgmm/data_model.hpp"
#include "rgmm/errors.hpp"

#include <doctest.h>

#include <algorithm>

using namespace rgmm;

namespace {

std::vector<ColumnDescriptor> grid_columns(int s1_images, int s2_images) {
  std::vector<ColumnDescriptor> cols;
  for (int a = 0; a < s1_images; ++a)
    for (const char* ind : {"VV", "VH"}) cols.push_back({Sensor::S1, ind, Statistic::Median, a, std::nullopt});
  for (int a = 0; a < s2_images; ++a)
    for (const char* ind : {"NDVI", "NDWI_SWIR", "NDWI_GREEN", "GRVI", "MCARI_OSAVI"})
      for (Statistic s : {Statistic::Median, Statistic::IQR}) cols.push_back({Sensor::S2, ind, s, a, std::nullopt});
  return cols;
}

}  // namespace

TEST_SUITE("data_model") {

TEST_CASE("empty cell parses as unobserved") {
  FeatureMatrix m = parse_matrix("parcel_id,S2:NDVI:median:0,S2:NDVI:IQR:0\na,0.5,\nb,0.25,0.1\n");
  REQUIRE(m.rows() == 2);
  CHECK_FALSE(m.is_observed(0, 1));
  CHECK(m.is_observed(1, 1));
  CHECK(std::isnan(m.values()(0, 1)));
  CHECK(m.values()(1, 0) == 0.25);
  CHECK(m.missing_count() == 1);
}

TEST_CASE("header parsing") {
  ColumnDescriptor d = ColumnDescriptor::parse("S2:NDVI:median:3");
  CHECK(d.sensor == Sensor::S2);
  CHECK(d.indicator == "NDVI");
  CHECK(d.statistic == Statistic::Median);
  CHECK(d.acquisition_index == 3);
  CHECK_FALSE(d.acquisition_date.has_value());

  ColumnDescriptor dated = ColumnDescriptor::parse("S1:VV:median:0:2016-09-12");
  CHECK(dated.acquisition_date == "2016-09-12");
  CHECK(ColumnDescriptor::parse(dated.header()) == dated);

  CHECK_THROWS_AS(ColumnDescriptor::parse("S3:NDVI:median:0"), ValidationError);
  CHECK_THROWS_AS(ColumnDescriptor::parse("S2:NDVI:mean:0"), ValidationError);
  CHECK_THROWS_AS(ColumnDescriptor::parse("S2:NDVI:median:-1"), ValidationError);
  CHECK_THROWS_AS(ColumnDescriptor::parse("S2:NDVI"), ValidationError);
}

TEST_CASE("row without observations is rejected by name") {
  try {
    parse_matrix("parcel_id,S2:NDVI:median:0,S2:NDVI:IQR:0\nok,1,2\nblank,,\n");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("blank") != std::string::npos);
  }
}

TEST_CASE("structural violations") {
  Eigen::MatrixXd v = Eigen::MatrixXd::Ones(2, 2);
  std::vector<ColumnDescriptor> dup{{Sensor::S2, "NDVI", Statistic::Median, 0, std::nullopt},
                                    {Sensor::S2, "NDVI", Statistic::Median, 0, std::string("2017-01-01")}};
  CHECK_THROWS_AS(FeatureMatrix::complete(v, dup, test::row_ids(2)), ValidationError);
  std::vector<ColumnDescriptor> s1_iqr{{Sensor::S1, "VV", Statistic::Median, 0, std::nullopt},
                                       {Sensor::S1, "VV", Statistic::IQR, 0, std::nullopt}};
  CHECK_THROWS_AS(FeatureMatrix::complete(v, s1_iqr, test::row_ids(2)), ValidationError);
  CHECK_THROWS_AS(FeatureMatrix::complete(v, test::s2_columns(3), test::row_ids(2)), ValidationError);
  CHECK_THROWS_AS(parse_matrix("parcel_id,S2:NDVI:median:0\na,1,2\n"), ValidationError);
  CHECK_THROWS_AS(parse_matrix("id,S2:NDVI:median:0\na,1\n"), ValidationError);
  CHECK_THROWS_AS(parse_matrix("parcel_id,S2:NDVI:median:0\na,abc\n"), ValidationError);
}

TEST_CASE("column grid counts") {
  ColumnCounts c = column_counts(grid_columns(40, 13));
  CHECK(c.n1_images == 40);
  CHECK(c.n1_features == 2);
  CHECK(c.n1_stats == 1);
  CHECK(c.n2_images == 13);
  CHECK(c.n2_features == 5);
  CHECK(c.n2_stats == 2);
  CHECK(c.n_columns == 210);

  std::vector<ColumnDescriptor> one{{Sensor::S2, "NDVI", Statistic::Median, 0, std::nullopt}};
  CHECK(column_counts(one).n_columns == 1);

  std::vector<ColumnDescriptor> ragged;
  for (int a = 0; a < 2; ++a)
    for (const char* ind : {"NDVI", "GRVI"})
      if (!(a == 1 && std::string(ind) == "GRVI")) ragged.push_back({Sensor::S2, ind, Statistic::Median, a, std::nullopt});
  CHECK_THROWS_AS(column_counts(ragged), ValidationError);
}

TEST_CASE("column counts ignore column order") {
  std::vector<ColumnDescriptor> cols = grid_columns(4, 3);
  ColumnCounts ref = column_counts(cols);
  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(cols.begin(), cols.end(), rng);
    ColumnCounts c = column_counts(cols);
    CHECK(c.n_columns == ref.n_columns);
    CHECK(c.n1_images == ref.n1_images);
    CHECK(c.n2_features == ref.n2_features);
    CHECK(c.n2_stats == ref.n2_stats);
  }
}

TEST_CASE("min-max scaling examples") {
  Eigen::MatrixXd v(3, 2);
  v << 0.2, 0.3, 0.8, 0.3, 0.5, 0.3;
  FeatureMatrix m = test::complete_matrix(v);
  ScalingTransform t = fit_scaling(m);
  CHECK(t.scale(0, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(t.scale(0, 0.2) == 0.0);
  CHECK(t.zero_span[1]);
  CHECK_FALSE(t.zero_span[0]);
  FeatureMatrix s = apply_scaling(m, t);
  CHECK(s.values()(0, 1) == 0.5);
  FeatureMatrix back = invert_scaling(s, t);
  for (int r = 0; r < 3; ++r) CHECK(back.values()(r, 1) == 0.3);
}

TEST_CASE("scaling round trip on observed entries") {
  Rng rng(11);
  for (int t = 0; t < 5; ++t) {
    Eigen::MatrixXd x = test::gaussian_block(40, 6, rng, 3.0);
    FeatureMatrix m = test::masked_matrix(x, test::mcar_mask(40, 6, 0.3, rng));
    ScalingTransform tr = fit_scaling(m);
    FeatureMatrix s = apply_scaling(m, tr);
    FeatureMatrix back = invert_scaling(s, tr);
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t c = 0; c < m.cols(); ++c) {
        if (!m.is_observed(r, c)) {
          CHECK(std::isnan(back.values()(r, c)));
          continue;
        }
        CHECK(s.values()(r, c) >= 0.0);
        CHECK(s.values()(r, c) <= 1.0);
        CHECK(std::abs(back.values()(r, c) - m.values()(r, c)) <= 1e-12);
      }
  }
}

TEST_CASE("scaling needs two observed entries per column") {
  Eigen::MatrixXd x(2, 2);
  x << 1, 2, 3, 4;
  BoolMatrix obs(2, 2);
  obs << true, true, true, false;
  CHECK_THROWS_AS(fit_scaling(test::masked_matrix(x, obs)), ValidationError);
}

TEST_CASE("save and load round trip") {
  Rng rng(3);
  std::vector<ColumnDescriptor> cols = grid_columns(2, 2);
  for (auto& c : cols) c.acquisition_date = "2017-0" + std::to_string(c.acquisition_index + 1) + "-15";
  const int n = 25;
  Eigen::MatrixXd x = test::gaussian_block(n, static_cast<int>(cols.size()), rng);
  x(0, 0) = 1.0 / 3.0;
  x(1, 1) = -1e-300;
  FeatureMatrix m(x, test::mcar_mask(n, static_cast<int>(cols.size()), 0.25, rng), cols, test::row_ids(n));
  auto dir = test::scratch_dir("data_model");
  save_matrix(m, dir / "m.csv");
  FeatureMatrix back = load_matrix(dir / "m.csv");
  CHECK(back.columns() == m.columns());
  CHECK(back.row_ids() == m.row_ids());
  CHECK((back.observed() == m.observed()).all());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      if (m.is_observed(r, c)) CHECK(back.values()(r, c) == m.values()(r, c));
  CHECK(format_matrix(back) == format_matrix(m));
  CHECK_THROWS_AS(load_matrix(dir / "absent.csv"), ValidationError);
}

TEST_CASE("row and column selection") {
  Eigen::MatrixXd x(3, 3);
  x << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  FeatureMatrix m = test::complete_matrix(x);
  FeatureMatrix c = m.select_columns({2, 0});
  CHECK(c.values()(1, 0) == 6);
  CHECK(c.columns()[1] == m.columns()[0]);
  FeatureMatrix r = m.select_rows({2});
  CHECK(r.rows() == 1);
  CHECK(r.row_ids()[0] == "r2");
  CHECK(r.values()(0, 1) == 8);
  CHECK(acquisitions(m, Sensor::S2) == std::vector<int>{0, 1, 2});
  CHECK(acquisitions(m, Sensor::S1).empty());
}

}
