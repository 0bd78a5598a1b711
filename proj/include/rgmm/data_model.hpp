#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rgmm {

enum class Sensor { S1, S2 };
enum class Statistic { Median, IQR };

std::string to_string(Sensor s);
std::string to_string(Statistic s);

struct ColumnDescriptor {
  Sensor sensor = Sensor::S2;
  std::string indicator;
  Statistic statistic = Statistic::Median;
  int acquisition_index = 0;
  std::optional<std::string> acquisition_date;

  /// Header form `SENSOR:INDICATOR:STAT:ACQ_INDEX[:DATE]`.
  std::string header() const;
  static ColumnDescriptor parse(const std::string& text);

  bool same_key(const ColumnDescriptor& other) const;
  bool operator==(const ColumnDescriptor&) const = default;
};

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// N x D matrix of parcel features with a per-entry observed mask.
///
/// Immutable once constructed. Missing entries hold NaN so that any read of a
/// masked value without imputation poisons downstream arithmetic.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;

  /// Validates shapes, descriptor uniqueness, S1/IQR exclusion, and that every
  /// row observes at least one entry. Values under a false mask are replaced
  /// by NaN.
  FeatureMatrix(Eigen::MatrixXd values, BoolMatrix observed,
                std::vector<ColumnDescriptor> columns,
                std::vector<std::string> row_ids);

  /// Fully observed matrix.
  static FeatureMatrix complete(Eigen::MatrixXd values,
                                std::vector<ColumnDescriptor> columns,
                                std::vector<std::string> row_ids);

  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values_.cols()); }

  const Eigen::MatrixXd& values() const { return values_; }
  const BoolMatrix& observed() const { return observed_; }
  bool is_observed(std::size_t r, std::size_t c) const { return observed_(r, c); }
  const std::vector<ColumnDescriptor>& columns() const { return columns_; }
  const std::vector<std::string>& row_ids() const { return row_ids_; }

  std::size_t missing_count() const;
  bool fully_observed() const { return missing_count() == 0; }

  std::vector<int> observed_indices(std::size_t row) const;
  std::vector<int> missing_indices(std::size_t row) const;

  /// New matrix keeping the listed columns, in the given order.
  FeatureMatrix select_columns(const std::vector<int>& keep) const;
  /// New matrix keeping the listed rows, in the given order.
  FeatureMatrix select_rows(const std::vector<int>& keep) const;
  /// Same layout, new values and mask.
  FeatureMatrix with_values(Eigen::MatrixXd values, BoolMatrix observed) const;

  /// Column indices whose descriptor satisfies `pred`.
  template <typename Pred>
  std::vector<int> columns_where(Pred pred) const {
    std::vector<int> out;
    for (std::size_t c = 0; c < columns_.size(); ++c)
      if (pred(columns_[c])) out.push_back(static_cast<int>(c));
    return out;
  }

 private:
  Eigen::MatrixXd values_;
  BoolMatrix observed_;
  std::vector<ColumnDescriptor> columns_;
  std::vector<std::string> row_ids_;
};

FeatureMatrix load_matrix(const std::filesystem::path& path);
FeatureMatrix parse_matrix(const std::string& text);
void save_matrix(const FeatureMatrix& m, const std::filesystem::path& path);
std::string format_matrix(const FeatureMatrix& m);

struct ColumnCounts {
  int n1_images = 0;
  int n1_features = 0;
  int n1_stats = 0;
  int n2_images = 0;
  int n2_features = 0;
  int n2_stats = 0;
  int n_columns = 0;
};

/// Grid dimensions of the column layout. Throws ValidationError when some
/// acquisition lacks an indicator x statistic combination its sensor uses.
ColumnCounts column_counts(const std::vector<ColumnDescriptor>& columns);
ColumnCounts column_counts(const FeatureMatrix& m);

/// Distinct acquisition indices used by a sensor, ascending.
std::vector<int> acquisitions(const FeatureMatrix& m, Sensor sensor);

/// Per-column min/max of the observed entries, mapping them onto [0, 1].
struct ScalingTransform {
  std::vector<double> min;
  std::vector<double> max;
  /// Columns with max == min; they map to 0.5 and back to the constant.
  std::vector<bool> zero_span;

  double scale(std::size_t col, double v) const;
  double unscale(std::size_t col, double v) const;
};

ScalingTransform fit_scaling(const FeatureMatrix& m);
FeatureMatrix apply_scaling(const FeatureMatrix& m, const ScalingTransform& t);
FeatureMatrix invert_scaling(const FeatureMatrix& m, const ScalingTransform& t);

}  // namespace rgmm
