#pragma once

#include "rgmm/data_model.hpp"
#include "rgmm/imputers.hpp"
#include "rgmm/masking.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rgmm {

struct ErrorStats {
  double mae = 0.0;
  double rmse = 0.0;
  /// NaN when the truth values have zero variance. An empty set scores
  /// MAE = RMSE = 0.
  double r2 = 0.0;
  std::size_t count = 0;
};

ErrorStats error_stats(const std::vector<double>& truth, const std::vector<double>& estimate);

struct ReconstructionScores {
  /// All masked entries, after mapping every column onto [0, 1].
  ErrorStats overall_scaled;
  /// Keyed by "INDICATOR:STAT", natural scale.
  std::map<std::string, ErrorStats> by_group;
  /// Keyed by S2 acquisition index, scaled.
  std::map<int, ErrorStats> by_acquisition;
};

std::string group_key(const ColumnDescriptor& c);

/// Scores the imputed cells listed in `truth`. The scaled variant uses
/// `scaling` when given, otherwise the min/max of the observed input entries.
ReconstructionScores reconstruction_scores(const std::vector<TruthEntry>& truth, const ImputationResult& imputed,
                                           const std::optional<ScalingTransform>& scaling = std::nullopt);

/// Min/max scaling fitted on the observed entries of the listed rows only, so
/// that scores ignore the spread added by excluded rows.
ScalingTransform scaling_for_rows(const FeatureMatrix& masked, const std::vector<int>& rows);

/// Truth entries whose row is in `rows`.
std::vector<TruthEntry> filter_rows(const std::vector<TruthEntry>& truth, const std::vector<int>& rows);

struct DetectionCurve {
  std::vector<double> ratios;
  std::vector<double> precision;
  /// Trapezoid over the requested ratios, starting at the smallest one.
  double auc = 0.0;
  /// auc divided by the ratio span; equals the precision for a single ratio.
  double normalized_auc = 0.0;
};

/// 0.02, 0.04, ..., 0.40.
std::vector<double> default_ratio_grid();

/// Flags the ceil(rN) highest scores for each ratio r; ties keep row order.
DetectionCurve precision_curve(const std::vector<double>& scores, const std::vector<bool>& labels,
                               const std::vector<double>& ratios);

struct Aggregate {
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

/// NaN values are skipped; an empty input gives NaN statistics.
Aggregate aggregate(const std::vector<double>& values);

}  // namespace rgmm
