#pragma once

#include "rgmm/data_model.hpp"
#include "rgmm/gaussian.hpp"
#include "rgmm/isolation_forest.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace rgmm {

/// Mixing weights and one Gaussian per component.
struct GmmParams {
  Eigen::VectorXd weights;
  std::vector<GaussianComponent> components;

  int k() const { return static_cast<int>(components.size()); }
  int dim() const { return components.empty() ? 0 : components.front().dim(); }
  /// Throws ValidationError unless weights are positive and sum to 1 within 1e-12.
  void validate() const;
};

/// Sigmoid down-weighting of samples by their isolation-forest score.
struct RobustConfig {
  bool enabled = false;
  double alpha = 40.0;
  double th = 0.5;
  IfConfig forest;
};

struct EmConfig {
  /// Candidate component counts; BIC picks among them.
  std::vector<int> k_range{1, 2, 3, 4, 5};
  int max_iterations = 100;
  /// Stop when the per-sample observed log-likelihood changes by less than this.
  double loglik_tolerance = 1e-3;
  double scree_threshold = 1e-5;
  bool regularize = true;
  std::uint64_t seed = 0;
  /// Components whose occupancy sum_n gamma_nk falls below
  /// max(min_occupancy, min_occupancy_fraction * N) are dropped.
  double min_occupancy = 2.0;
  double min_occupancy_fraction = 0.005;
  /// Throw on collapse instead of dropping the component.
  bool abort_on_collapse = false;
  /// Independent k-means starts at initialisation.
  int kmeans_restarts = 10;
};

/// Rows sharing one observed/missing split.
struct MissingPattern {
  std::vector<int> observed;
  std::vector<int> missing;
  std::vector<int> rows;
};

/// Groups rows by mask pattern, ordered by first occurrence.
std::vector<MissingPattern> group_patterns(const FeatureMatrix& m);

struct EStepResult {
  /// N x K posterior membership probabilities.
  Eigen::MatrixXd responsibilities;
  /// Per component, the N x D matrix of completed samples x_hat_nk.
  std::vector<Eigen::MatrixXd> completed;
  std::vector<MissingPattern> patterns;
  std::vector<int> row_pattern;
  /// cond_cov[k][p]: conditional covariance of pattern p's missing block.
  std::vector<std::vector<Eigen::MatrixXd>> cond_cov;
  double log_likelihood = 0.0;

  /// D x D padded conditional covariance Sigma_hat_nk.
  Eigen::MatrixXd padded_cov(int row, int k) const;
  /// sum_k gamma_nk x_hat_nk.
  Eigen::MatrixXd aggregated_completion() const;
};

EStepResult e_step(const FeatureMatrix& m, const GmmParams& params);
EStepResult e_step(const FeatureMatrix& m, const GmmParams& params,
                   const std::vector<MissingPattern>& patterns);

/// Responsibilities of a fully observed matrix straight from the full-vector
/// densities; e_step must agree with this exactly on complete data.
Eigen::MatrixXd complete_data_responsibilities(const Eigen::MatrixXd& x, const GmmParams& params);

/// Per-row argmax of the responsibilities.
std::vector<int> hard_labels(const Eigen::MatrixXd& responsibilities);

struct ScreeDecomposition {
  Eigen::VectorXd eigenvalues;   // descending
  Eigen::MatrixXd eigenvectors;  // columns match eigenvalues
  int intrinsic_dim = 0;
};

/// Eigendecomposition plus the retained dimension: the smallest d >= 1 such that
/// every normalised gap (l_j - l_{j+1}) / l_1 with j > d is below the threshold.
ScreeDecomposition scree_decompose(const Eigen::MatrixXd& cov, double scree_threshold);

inline constexpr double kEigenFloor = 1e-8;

/// Single-matrix regularisation: trailing eigenvalues replaced by their mean,
/// floored at kEigenFloor.
Eigen::MatrixXd regularize_covariance(const Eigen::MatrixXd& cov, double scree_threshold);

struct RegularizationSummary {
  std::vector<int> intrinsic_dims;
  /// Noise level shared by every component; 0 when no component had a tail.
  double shared_b = 0.0;
  bool any_tail = false;
};

/// Regularises all components with one pooled noise level b.
RegularizationSummary regularize_components(std::vector<Eigen::MatrixXd>& covs,
                                            double scree_threshold);

double robust_weight(double score, double alpha, double th);

/// w_n from the forest's scores of the completed rows; all ones when disabled.
Eigen::VectorXd compute_weights(const Eigen::MatrixXd& completed, const RobustConfig& cfg,
                                const IsolationForest& forest);

struct MStepResult {
  GmmParams params;
  std::vector<int> dropped;  // indices (pre-drop) of collapsed components
  RegularizationSummary regularization;
};

struct MStepOptions {
  bool regularize = true;
  double scree_threshold = 1e-5;
  double min_occupancy = 2.0;
  double min_occupancy_fraction = 0.005;
  bool abort_on_collapse = false;
};

/// Standard update: means and covariances weighted by gamma only.
MStepResult m_step(const FeatureMatrix& m, const EStepResult& e, const MStepOptions& opt);
/// Robust update: means weighted by w*gamma, covariances by w^2*gamma,
/// mixing weights left at N_k / N.
MStepResult m_step(const FeatureMatrix& m, const EStepResult& e, const Eigen::VectorXd& weights,
                   const MStepOptions& opt);

struct KMeansInit {
  GmmParams params;
  std::vector<int> labels;
  /// Some cluster holds fewer than two rows.
  bool degenerate = false;
};

/// k-means on the column-mean-filled matrix, K centroids drawn uniformly from the
/// rows. The run with the lowest within-cluster sum of squares is kept.
KMeansInit init_kmeans(const FeatureMatrix& m, int k, std::uint64_t seed, int restarts = 10);

struct FitReport {
  int k = 0;
  GmmParams params;
  EStepResult estep;  // E-step at the final parameters
  Eigen::VectorXd weights;
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
  double bic = 0.0;
  RegularizationSummary regularization;
  std::vector<std::string> warnings;
  /// (K, BIC) for every candidate tried by select_k; failures carry NaN.
  std::vector<std::pair<int, double>> bic_by_k;
};

/// EM for a fixed number of components.
FitReport fit(const FeatureMatrix& m, int k, const EmConfig& em, const RobustConfig& robust);

/// Free parameters of the regularised mixture.
double free_parameters(int k, int dim, const std::vector<int>& intrinsic_dims, bool shared_b);
double bic(const FitReport& report, const FeatureMatrix& m);

struct Selection {
  int best_k = 0;
  FitReport report;
};

/// Fits every K in the range and keeps the one minimising BIC.
Selection select_k(const FeatureMatrix& m, const std::vector<int>& k_range, const EmConfig& em,
                   const RobustConfig& robust);

/// Missing entries replaced by sum_k gamma_nk x_hat_nk; observed entries copied.
Eigen::MatrixXd impute(const FeatureMatrix& m, const FitReport& report);

/// Structured-text diagnostics: K, BIC, iterations, trace, weight histogram.
std::string format_report(const FitReport& report);

}  // namespace rgmm
