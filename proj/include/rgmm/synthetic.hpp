#pragma once

#include "rgmm/data_model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rgmm {

struct ControlPoint {
  double day = 0.0;
  double value = 0.0;
};

/// Piecewise-linear curve over the season, held constant beyond its ends.
using Curve = std::vector<ControlPoint>;

double evaluate_curve(const Curve& c, double day);

struct IndicatorTemplate {
  std::string name;
  Curve median;
  Curve iqr;
  /// Response of the indicator to the parcel vigour factor.
  double vigor_loading = 1.0;
  double lower = -1.0;
  double upper = 1.0;
};

struct PhenologyTemplate {
  std::string crop_type;
  std::vector<IndicatorTemplate> indicators;
};

/// S1 coefficient = offset + gain * (driving S2 median) + noise.
struct S1Link {
  std::string name;  // S1 column indicator, e.g. VV
  std::string indicator;
  double offset = 0.0;
  double gain = 1.0;
};

enum class RowLabel { Normal, GrowthDelay, HeterogeneitySpike, Contaminant };
std::string to_string(RowLabel l);
RowLabel parse_row_label(const std::string& s);

struct SyntheticConfig {
  int n_parcels = 2000;
  int n_s2_acquisitions = 13;
  int n_s1_acquisitions = 10;
  double season_first_day = 10.0;
  double season_last_day = 290.0;
  std::string season_origin = "2016-09-01";

  int n_latent_clusters = 3;
  double cluster_shift_days = 18.0;
  double cluster_amplitude_step = 0.06;

  /// Multiplies every source of within-cluster variation; 0 puts each row on
  /// its cluster template.
  double noise_scale = 1.0;
  double vigor_sd = 0.05;
  double slope_sd = 0.03;
  /// Smooth parcel-specific deviation shared by every S2 median and by S1.
  double local_sd = 0.04;
  double local_spacing_days = 30.0;
  double local_width_days = 25.0;
  /// Per-entry median noise, multiplied by the indicator's vigor loading.
  double entry_noise_sd = 0.005;
  /// Relative IQR variation: a shared parcel factor and a per-entry term.
  double iqr_heterogeneity_sd = 0.25;
  double iqr_noise_sd = 0.025;
  /// Target within-cluster correlation between S1 and the driving S2 median.
  double s1_correlation = 0.7;
  /// Per-S2-acquisition multiplier on entry noise; empty means all ones.
  std::vector<double> s2_noise_multipliers;

  double anomaly_fraction = 0.0;
  std::vector<RowLabel> anomaly_kinds{RowLabel::GrowthDelay, RowLabel::HeterogeneitySpike};
  double growth_delay_days = 30.0;
  double heterogeneity_spike = 0.15;
  int spike_width = 2;

  double contamination_fraction = 0.0;
  double contaminant_shift_days = 40.0;

  std::uint64_t seed = 0;

  PhenologyTemplate crop = default_rapeseed_template();
  std::vector<PhenologyTemplate> contaminants = default_contaminant_templates();
  std::vector<S1Link> s1_links = default_s1_links();

  void validate() const;

  static PhenologyTemplate default_rapeseed_template();
  static std::vector<PhenologyTemplate> default_contaminant_templates();
  static std::vector<S1Link> default_s1_links();
};

struct LabeledDataset {
  FeatureMatrix matrix;  // fully observed
  std::vector<RowLabel> labels;
  /// Latent cluster per row; -1 for contaminants.
  std::vector<int> cluster;
  SyntheticConfig config;
  std::vector<double> s2_days;
  std::vector<double> s1_days;

  std::vector<int> rows_with(RowLabel label) const;
  std::vector<int> rows_without(RowLabel label) const;
};

/// Builds every built-in S2 indicator from an NDVI curve by fixed affine maps.
PhenologyTemplate template_from_ndvi(const std::string& crop_type, const Curve& ndvi);

/// Zero-noise value of every column for one cluster.
Eigen::VectorXd cluster_template(const SyntheticConfig& cfg, int cluster);

/// Deterministic in cfg (including its seed).
LabeledDataset generate(const SyntheticConfig& cfg);

/// Appends round(fraction * N) rows drawn from the contaminant crops.
LabeledDataset inject_contamination(const LabeledDataset& d, double fraction, std::uint64_t seed);

/// Round half up, the rule used for every fractional count.
int round_count(double fraction, int total);

/// row_id,label,cluster
std::string format_labels(const LabeledDataset& d);

}  // namespace rgmm
