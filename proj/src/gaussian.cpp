#include "rgmm/gaussian.hpp"

#include "rgmm/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>

namespace rgmm {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

// Lower Cholesky factor or NumericalError.
Eigen::MatrixXd cholesky_or_throw(const Eigen::MatrixXd& a, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success)
    throw NumericalError(fmt::format("{} is not positive definite", what));
  Eigen::MatrixXd l = llt.matrixL();
  for (Eigen::Index i = 0; i < l.rows(); ++i)
    if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i)))
      throw NumericalError(fmt::format("{} is not positive definite", what));
  return l;
}

double log_det_from_chol(const Eigen::MatrixXd& l) {
  return 2.0 * l.diagonal().array().log().sum();
}

}  // namespace

GaussianComponent::GaussianComponent(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), cov_(std::move(covariance)) {
  if (cov_.rows() != cov_.cols() || cov_.rows() != mean_.size())
    throw ValidationError(fmt::format("covariance is {}x{} for a mean of size {}", cov_.rows(),
                                      cov_.cols(), mean_.size()));
  const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw ValidationError("covariance is not symmetric");
  cov_ = symmetrized(cov_);
  chol_ = cholesky_or_throw(cov_, "covariance");
  log_det_ = log_det_from_chol(chol_);
  const auto n = cov_.rows();
  precision_ = chol_.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
  precision_ = chol_.transpose().triangularView<Eigen::Upper>().solve(precision_);
  precision_ = symmetrized(precision_);
}

double GaussianComponent::log_pdf(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
  return -0.5 * (static_cast<double>(dim()) * kLog2Pi + log_det_ + y.squaredNorm());
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, std::span<const int> idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(idx[i]);
  return out;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, std::span<const int> rows,
                       std::span<const int> cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(rows[i], cols[j]);
  return out;
}

double log_pdf_observed(const GaussianComponent& g, const Eigen::VectorXd& x_obs,
                        std::span<const int> obs_idx) {
  if (obs_idx.empty()) throw ValidationError("log_pdf_observed needs at least one coordinate");
  if (static_cast<std::size_t>(x_obs.size()) != obs_idx.size())
    throw ValidationError("observed vector and index set differ in size");
  const Eigen::MatrixXd l =
      cholesky_or_throw(gather(g.covariance(), obs_idx, obs_idx), "observed covariance block");
  Eigen::VectorXd y =
      l.triangularView<Eigen::Lower>().solve(x_obs - gather(g.mean(), obs_idx));
  return -0.5 * (static_cast<double>(obs_idx.size()) * kLog2Pi + log_det_from_chol(l) +
                 y.squaredNorm());
}

ConditionalMoments condition(const GaussianComponent& g, const Eigen::VectorXd& x_obs,
                             std::span<const int> obs_idx, std::span<const int> mis_idx) {
  if (obs_idx.size() + mis_idx.size() != static_cast<std::size_t>(g.dim()))
    throw ValidationError("observed and missing index sets do not partition the dimension");
  if (mis_idx.empty()) return {Eigen::VectorXd(0), Eigen::MatrixXd(0, 0)};
  if (obs_idx.empty()) return {gather(g.mean(), mis_idx), gather(g.covariance(), mis_idx, mis_idx)};

  const Eigen::MatrixXd s_oo = gather(g.covariance(), obs_idx, obs_idx);
  const Eigen::MatrixXd s_mo = gather(g.covariance(), mis_idx, obs_idx);
  const Eigen::MatrixXd s_mm = gather(g.covariance(), mis_idx, mis_idx);
  const Eigen::MatrixXd l = cholesky_or_throw(s_oo, "observed covariance block");
  // (Sigma^oo)^-1 Sigma^om
  Eigen::MatrixXd w = l.triangularView<Eigen::Lower>().solve(s_mo.transpose());
  w = l.transpose().triangularView<Eigen::Upper>().solve(w);

  ConditionalMoments out;
  out.mean = gather(g.mean(), mis_idx) + w.transpose() * (x_obs - gather(g.mean(), obs_idx));
  out.cov = symmetrized(s_mm - s_mo * w);
  return out;
}

Eigen::VectorXd complete_sample(const Eigen::VectorXd& x_obs, std::span<const int> obs_idx,
                                std::span<const int> mis_idx,
                                const Eigen::VectorXd& cond_mean) {
  if (static_cast<std::size_t>(x_obs.size()) != obs_idx.size() ||
      static_cast<std::size_t>(cond_mean.size()) != mis_idx.size())
    throw ValidationError("complete_sample: inconsistent shapes");
  const auto dim = static_cast<Eigen::Index>(obs_idx.size() + mis_idx.size());
  Eigen::VectorXd out = Eigen::VectorXd::Constant(dim, std::nan(""));
  std::vector<bool> seen(static_cast<std::size_t>(dim), false);
  auto place = [&](std::span<const int> idx, const Eigen::VectorXd& v) {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const int j = idx[i];
      if (j < 0 || j >= dim || seen[static_cast<std::size_t>(j)])
        throw ValidationError("complete_sample: overlapping or out-of-range indices");
      seen[static_cast<std::size_t>(j)] = true;
      out(j) = v(static_cast<Eigen::Index>(i));
    }
  };
  place(obs_idx, x_obs);
  place(mis_idx, cond_mean);
  return out;
}

Eigen::MatrixXd pad_cov(const Eigen::MatrixXd& cond_cov, std::span<const int> mis_idx, int dim) {
  if (static_cast<std::size_t>(cond_cov.rows()) != mis_idx.size() ||
      cond_cov.rows() != cond_cov.cols())
    throw ValidationError("pad_cov: inconsistent shapes");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t i = 0; i < mis_idx.size(); ++i)
    for (std::size_t j = 0; j < mis_idx.size(); ++j)
      out(mis_idx[i], mis_idx[j]) =
          cond_cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return out;
}

MarginalFactor::MarginalFactor(const GaussianComponent& g, std::vector<int> obs_idx,
                               std::vector<int> mis_idx, Route route)
    : g_(&g), obs_(std::move(obs_idx)), mis_(std::move(mis_idx)), route_(route) {
  if (obs_.empty()) throw ValidationError("pattern with no observed coordinate");
  if (obs_.size() + mis_.size() != static_cast<std::size_t>(g.dim()))
    throw ValidationError("pattern does not partition the dimension");
  if (mis_.empty()) {
    route_ = Route::Full;
  } else if (route_ == Route::Auto || route_ == Route::Full) {
    route_ = mis_.size() < obs_.size() ? Route::Precision : Route::Schur;
  }
  mu_o_ = gather(g.mean(), obs_);
  mu_m_ = gather(g.mean(), mis_);

  if (route_ == Route::Full) {
    log_det_oo_ = g.log_det();
    cond_cov_.resize(0, 0);
    regress_.resize(0, static_cast<Eigen::Index>(obs_.size()));
    return;
  }

  if (route_ == Route::Schur) {
    const Eigen::MatrixXd s_mo = gather(g.covariance(), mis_, obs_);
    chol_oo_ = cholesky_or_throw(gather(g.covariance(), obs_, obs_), "observed covariance block");
    log_det_oo_ = log_det_from_chol(chol_oo_);
    Eigen::MatrixXd w = chol_oo_.triangularView<Eigen::Lower>().solve(s_mo.transpose());
    w = chol_oo_.transpose().triangularView<Eigen::Upper>().solve(w);
    regress_ = w.transpose();
    cond_cov_ = symmetrized(gather(g.covariance(), mis_, mis_) - s_mo * w);
  } else {
    // Precision route: Sigma^oo^-1 Schur identities on the blocks of Lambda.
    const Eigen::MatrixXd l_mm = gather(g.precision(), mis_, mis_);
    const Eigen::MatrixXd l_mo = gather(g.precision(), mis_, obs_);
    const Eigen::MatrixXd l = cholesky_or_throw(l_mm, "missing precision block");
    Eigen::MatrixXd inv = l.triangularView<Eigen::Lower>().solve(
        Eigen::MatrixXd::Identity(l.rows(), l.cols()));
    inv = l.transpose().triangularView<Eigen::Upper>().solve(inv);
    cond_cov_ = symmetrized(inv);
    regress_ = -(cond_cov_ * l_mo);
    // det Sigma = det Sigma^oo * det (Lambda^mm)^-1
    log_det_oo_ = g.log_det() + log_det_from_chol(l);
  }
}

double MarginalFactor::log_pdf(const Eigen::VectorXd& x_obs) const {
  Eigen::VectorXd lp(1);
  Eigen::MatrixXd cm;
  evaluate(x_obs.transpose(), lp, cm);
  return lp(0);
}

Eigen::VectorXd MarginalFactor::conditional_mean(const Eigen::VectorXd& x_obs) const {
  return mu_m_ + regress_ * (x_obs - mu_o_);
}

void MarginalFactor::evaluate(const Eigen::MatrixXd& x_obs, Eigen::VectorXd& log_pdf,
                              Eigen::MatrixXd& cond_mean) const {
  const auto n = x_obs.rows();
  const auto o = static_cast<Eigen::Index>(obs_.size());
  const auto m = static_cast<Eigen::Index>(mis_.size());
  if (x_obs.cols() != o) throw ValidationError("evaluate: observed block width mismatch");
  log_pdf.resize(n);
  const double norm = static_cast<double>(o) * kLog2Pi + log_det_oo_;

  if (route_ == Route::Full) {
    cond_mean.resize(n, 0);
    for (Eigen::Index r = 0; r < n; ++r) log_pdf(r) = g_->log_pdf(x_obs.row(r).transpose());
    return;
  }

  const Eigen::MatrixXd resid = x_obs.rowwise() - mu_o_.transpose();
  const Eigen::MatrixXd shift = resid * regress_.transpose();
  cond_mean = shift.rowwise() + mu_m_.transpose();

  if (route_ == Route::Schur) {
    Eigen::MatrixXd y = chol_oo_.triangularView<Eigen::Lower>().solve(resid.transpose());
    log_pdf = -0.5 * (y.colwise().squaredNorm().transpose().array() + norm);
  } else {
    // The conditional mean minimises the full quadratic form, whose minimum
    // equals the observed-margin Mahalanobis distance.
    Eigen::MatrixXd delta(n, g_->dim());
    for (Eigen::Index j = 0; j < o; ++j) delta.col(obs_[static_cast<std::size_t>(j)]) = resid.col(j);
    for (Eigen::Index j = 0; j < m; ++j)
      delta.col(mis_[static_cast<std::size_t>(j)]) = shift.col(j);
    Eigen::VectorXd quad = ((delta * g_->precision()).array() * delta.array()).rowwise().sum();
    log_pdf = -0.5 * (quad.array().max(0.0) + norm);
  }
}

}  // namespace rgmm
