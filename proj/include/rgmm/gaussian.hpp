#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace rgmm {

/// Multivariate normal with a cached Cholesky factor and precision matrix.
class GaussianComponent {
 public:
  GaussianComponent() = default;
  /// Throws ValidationError on shape mismatch or asymmetry beyond 1e-10,
  /// NumericalError when the covariance is not positive definite.
  GaussianComponent(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  const Eigen::MatrixXd& precision() const { return precision_; }
  const Eigen::MatrixXd& cholesky_lower() const { return chol_; }
  double log_det() const { return log_det_; }

  /// Full-vector log-density.
  double log_pdf(const Eigen::VectorXd& x) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd chol_;
  Eigen::MatrixXd precision_;
  double log_det_ = 0.0;
};

struct ConditionalMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

Eigen::VectorXd gather(const Eigen::VectorXd& v, std::span<const int> idx);
Eigen::MatrixXd gather(const Eigen::MatrixXd& m, std::span<const int> rows,
                       std::span<const int> cols);

/// log N(x_obs | mu^o, Sigma^oo) through the Cholesky factor of Sigma^oo.
double log_pdf_observed(const GaussianComponent& g, const Eigen::VectorXd& x_obs,
                        std::span<const int> obs_idx);

/// Moments of the missing coordinates given the observed ones (Schur complement).
ConditionalMoments condition(const GaussianComponent& g, const Eigen::VectorXd& x_obs,
                             std::span<const int> obs_idx, std::span<const int> mis_idx);

/// D-vector with x_obs at obs_idx and cond_mean at mis_idx.
Eigen::VectorXd complete_sample(const Eigen::VectorXd& x_obs, std::span<const int> obs_idx,
                                std::span<const int> mis_idx,
                                const Eigen::VectorXd& cond_mean);

/// D x D zero matrix carrying cond_cov in the mis_idx x mis_idx block.
Eigen::MatrixXd pad_cov(const Eigen::MatrixXd& cond_cov, std::span<const int> mis_idx, int dim);

/// Factorisation of one component restricted to one missingness pattern,
/// reused for every row sharing that pattern.
///
/// Two algebraic routes give the same marginal density and conditional
/// moments: the Schur route factorises Sigma^oo, the precision route
/// factorises the missing block of Sigma^-1 (cheaper when few coordinates
/// are missing). The default picks by block size.
class MarginalFactor {
 public:
  enum class Route { Auto, Full, Schur, Precision };

  MarginalFactor(const GaussianComponent& g, std::vector<int> obs_idx,
                 std::vector<int> mis_idx, Route route = Route::Auto);

  Route route() const { return route_; }
  const std::vector<int>& observed() const { return obs_; }
  const std::vector<int>& missing() const { return mis_; }
  /// m x m; independent of the observed values.
  const Eigen::MatrixXd& conditional_cov() const { return cond_cov_; }
  double observed_log_det() const { return log_det_oo_; }

  double log_pdf(const Eigen::VectorXd& x_obs) const;
  Eigen::VectorXd conditional_mean(const Eigen::VectorXd& x_obs) const;

  /// Batched form: x_obs is (rows x |obs|). Fills one log-density per row and
  /// the (rows x |mis|) conditional means.
  void evaluate(const Eigen::MatrixXd& x_obs, Eigen::VectorXd& log_pdf,
                Eigen::MatrixXd& cond_mean) const;

 private:
  const GaussianComponent* g_;
  std::vector<int> obs_;
  std::vector<int> mis_;
  Route route_;
  Eigen::VectorXd mu_o_;
  Eigen::VectorXd mu_m_;
  Eigen::MatrixXd chol_oo_;   // Schur route
  Eigen::MatrixXd regress_;   // Sigma^mo (Sigma^oo)^-1, m x o
  Eigen::MatrixXd cond_cov_;
  double log_det_oo_ = 0.0;
};

}  // namespace rgmm
