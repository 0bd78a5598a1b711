#pragma once

#include "rgmm/data_model.hpp"
#include "rgmm/gmm.hpp"

#include <memory>
#include <string>
#include <vector>

namespace rgmm {

struct KnnDiagnostics {
  /// Entries that had no qualifying donor and fell back to the column mean.
  std::vector<std::pair<int, int>> fallbacks;
  /// Number of donors actually averaged, per imputed entry in row-major order.
  std::vector<int> neighbor_counts;
};

/// Completed matrix plus which entries were filled in.
struct ImputationResult {
  FeatureMatrix completed;  // fully observed
  BoolMatrix imputed;       // true where the input was missing
  std::string method;
  std::shared_ptr<const FitReport> fit;  // GMM methods only
  KnnDiagnostics knn;                    // KNN only
};

/// Robust or standard GMM imputation. The matrix is scaled to [0, 1] from its
/// observed entries, K is chosen by BIC over em.k_range, and imputed values
/// are mapped back to the natural scale. Observed entries are copied through.
ImputationResult impute_gmm(const FeatureMatrix& m, const EmConfig& em, const RobustConfig& robust);

/// Inverse-distance-weighted k nearest neighbours on the scaled matrix.
ImputationResult impute_knn(const FeatureMatrix& m, int k);

/// Column mean of the observed entries.
ImputationResult impute_mean(const FeatureMatrix& m);

}  // namespace rgmm
