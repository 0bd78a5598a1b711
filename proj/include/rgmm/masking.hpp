#pragma once

#include "rgmm/data_model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rgmm {

struct MaskingScenario {
  /// Fraction of S2 acquisitions made cloudy; ignored when an explicit list is given.
  double pct_cloudy_images = 0.0;
  std::optional<std::vector<int>> cloudy_acquisitions;
  double pct_affected_parcels = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TruthEntry {
  int row = 0;
  int col = 0;
  double value = 0.0;
  bool operator==(const TruthEntry&) const = default;
};

struct MaskedDataset {
  FeatureMatrix masked;
  std::vector<TruthEntry> truth;
  /// S2 acquisition indices that were made cloudy, ascending.
  std::vector<int> cloudy_acquisitions;
  /// Set when a positive percentage rounded to zero images.
  bool zero_mask_warning = false;
};

MaskedDataset apply_scenario(const FeatureMatrix& m, const MaskingScenario& s);

/// One scenario per S2 acquisition, each masking that acquisition alone.
std::vector<MaskedDataset> day_by_day_scenarios(const FeatureMatrix& m, double pct_affected, std::uint64_t seed);

/// Writes the held-out values back; the result equals the unmasked matrix.
FeatureMatrix restore(const FeatureMatrix& masked, const std::vector<TruthEntry>& truth);

/// `parcel_id,column,value` rows.
std::string format_truth(const FeatureMatrix& m, const std::vector<TruthEntry>& truth);
std::vector<TruthEntry> parse_truth(const std::string& text, const FeatureMatrix& m);
void save_truth(const FeatureMatrix& m, const std::vector<TruthEntry>& truth, const std::filesystem::path& path);
std::vector<TruthEntry> load_truth(const std::filesystem::path& path, const FeatureMatrix& m);

}  // namespace rgmm
