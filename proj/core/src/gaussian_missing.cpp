#include "pemix/gaussian_missing.hpp"

#include "pemix/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace pemix {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_dims(const GaussianParams& params, const IncompleteObservation& obs) {
  if (params.dim() != obs.dim() || params.sigma.dim() != obs.dim()) {
    throw InvalidArgument("dimension mismatch between parameters (" +
                          std::to_string(params.dim()) + ") and observation (" +
                          std::to_string(obs.dim()) + ")");
  }
}

}  // namespace

IncompleteObservation::IncompleteObservation(const Vector& values, std::vector<bool> observed)
    : values_(values), observed_(std::move(observed)) {
  if (static_cast<Index>(observed_.size()) != values_.size()) {
    throw InvalidArgument("IncompleteObservation: mask and values differ in length");
  }
  split_ = IndexSplit::from_mask(observed_);
  for (Index j : split_.missing()) {
    values_(j) = std::numeric_limits<double>::quiet_NaN();
  }
  for (Index j : split_.observed()) {
    if (!std::isfinite(values_(j))) {
      throw InvalidArgument("IncompleteObservation: observed value is not finite");
    }
  }
}

IncompleteObservation IncompleteObservation::complete(const Vector& values) {
  return IncompleteObservation(values, std::vector<bool>(static_cast<std::size_t>(values.size()), true));
}

double IncompleteObservation::value(Index j) const {
  if (j < 0 || j >= dim() || !is_observed(j)) {
    throw InvalidArgument("IncompleteObservation: coordinate " + std::to_string(j) +
                          " is not observed");
  }
  return values_(j);
}

Vector IncompleteObservation::observed_values() const {
  return values_(split_.observed());
}

ImputationState ImputationState::initial(const GaussianParams& params,
                                         const IncompleteObservation& obs) {
  check_dims(params, obs);
  const Index p = obs.dim();
  ImputationState s;
  s.y_hat = obs.raw_values();
  s.Y_hat = Matrix::Zero(p, p);
  for (Index j : obs.split().missing()) {
    s.y_hat(j) = params.mu(j);
    s.Y_hat(j, j) = params.sigma.cov()(j, j);
  }
  return s;
}

Matrix ImputationState::missing_block(const IndexSplit& split) const {
  return Y_hat(split.missing(), split.missing());
}

ImputationState exact_conditional(const GaussianParams& params, const IncompleteObservation& obs) {
  check_dims(params, obs);
  const Index p = obs.dim();
  const IndexSplit& split = obs.split();
  ImputationState s;
  s.y_hat = obs.raw_values();
  s.Y_hat = Matrix::Zero(p, p);
  if (split.num_missing() == 0) {
    return s;
  }
  const auto& x = split.observed();
  const auto& z = split.missing();
  const Vector dx = obs.observed_values() - params.mu(x);

  Matrix regression;
  Matrix cond_cov;
  if (split.num_missing() < split.num_observed()) {
    ConditionalBlocks blocks = schur_via_precision(params.sigma, split);
    regression = std::move(blocks.regression);
    cond_cov = blocks.cond_cov.matrix();
  } else {
    const Matrix& sigma = params.sigma.cov().matrix();
    Eigen::LLT<Matrix> llt(sigma(x, x));
    if (llt.info() != Eigen::Success) {
      throw NotPositiveDefinite("exact_conditional: observed covariance block is singular");
    }
    const Matrix sxz = sigma(x, z);
    regression = llt.solve(sxz).transpose();
    cond_cov = sigma(z, z) - regression * sxz;
    cond_cov = 0.5 * (cond_cov + cond_cov.transpose()).eval();
  }
  s.y_hat(z) = params.mu(z) + regression * dx;
  s.Y_hat(z, z) = cond_cov;
  return s;
}

double kl_missing_covariance_part(const ImputationState& state, const GaussianParams& params,
                                  const IncompleteObservation& obs) {
  check_dims(params, obs);
  const auto& z = obs.split().missing();
  if (z.empty()) {
    return 0.0;
  }
  const Matrix xi_zz = params.sigma.prec().matrix()(z, z);
  const Matrix zhat = state.Y_hat(z, z);
  const double l = static_cast<double>(z.size());
  const double trace = (xi_zz.cwiseProduct(zhat)).sum();
  return 0.5 * (trace - logdet_spd(zhat) - logdet_spd(xi_zz) - l);
}

double kl_missing(const ImputationState& state, const GaussianParams& params,
                  const IncompleteObservation& obs) {
  check_dims(params, obs);
  const IndexSplit& split = obs.split();
  if (split.num_missing() == 0) {
    return 0.0;
  }
  const auto& x = split.observed();
  const auto& z = split.missing();
  const double cov_part = kl_missing_covariance_part(state, params, obs);
  const ConditionalBlocks blocks = schur_via_precision(params.sigma, split);
  const Vector cond_mean = params.mu(z) + blocks.regression * (obs.observed_values() - params.mu(x));
  const Vector d = state.y_hat(z) - cond_mean;
  const Matrix xi_zz = params.sigma.prec().matrix()(z, z);
  return cov_part + 0.5 * d.dot(xi_zz * d);
}

SweepCache::SweepCache(const GaussianParams& params) {
  const Index p = params.dim();
  beta_ = Matrix::Zero(p, p);
  cond_var_ = Vector::Zero(p);
  if (p < 2) {
    cond_var_ = params.sigma.cov().matrix().diagonal();
    return;
  }
  const Matrix& sigma = params.sigma.cov().matrix();
  for (Index j = 0; j < p; ++j) {
    const SubmatrixInverse inv = submatrix_inverse_via_precision(params.sigma, j);
    if (inv.used_fallback) ++fallbacks_;
    const PrincipalPart part = principal_submatrix(params.sigma.cov(), j);
    const Vector beta = inv.inverse.matrix() * part.row;
    for (Index k = 0, r = 0; k < p; ++k) {
      if (k == j) continue;
      beta_(j, k) = beta(r++);
    }
    cond_var_(j) = sigma(j, j) - beta.dot(part.row);
  }
}

void sweep_mean_inplace(ImputationState& state, const GaussianParams& params,
                        const IncompleteObservation& obs) {
  const Matrix& xi = params.sigma.prec().matrix();
  const Index p = obs.dim();
  for (Index j : obs.split().missing()) {
    double acc = 0.0;
    for (Index k = 0; k < p; ++k) {
      if (k != j) acc += xi(j, k) * (state.y_hat(k) - params.mu(k));
    }
    state.y_hat(j) = params.mu(j) - acc / xi(j, j);
  }
}

ImputationState sweep_mean(const ImputationState& state, const GaussianParams& params,
                           const IncompleteObservation& obs) {
  check_dims(params, obs);
  ImputationState next = state;
  sweep_mean_inplace(next, params, obs);
  return next;
}

void sweep_cov_inplace(ImputationState& state, const SweepCache& cache,
                       const IncompleteObservation& obs) {
  const auto& z = obs.split().missing();
  const std::size_t l = z.size();
  if (l == 0) return;
  Matrix& Y = state.Y_hat;
  const Matrix& beta = cache.regression_rows();
  // Off-diagonal entries of row j, indexed by position within z.
  Vector off(static_cast<Index>(l));
  for (std::size_t a = 0; a < l; ++a) {
    const Index j = z[a];
    double diag_acc = 0.0;
    for (std::size_t b = 0; b < l; ++b) {
      if (b == a) continue;
      const Index k = z[b];
      double acc = 0.0;
      for (std::size_t c = 0; c < l; ++c) {
        if (c == a) continue;
        acc += beta(j, z[c]) * Y(z[c], k);
      }
      off(static_cast<Index>(b)) = acc;
      diag_acc += beta(j, k) * acc;
    }
    for (std::size_t b = 0; b < l; ++b) {
      if (b == a) continue;
      Y(j, z[b]) = off(static_cast<Index>(b));
      Y(z[b], j) = off(static_cast<Index>(b));
    }
    Y(j, j) = cache.conditional_variance(j) + diag_acc;
  }
}

ImputationState sweep_cov(const ImputationState& state, const GaussianParams& params,
                          const IncompleteObservation& obs) {
  check_dims(params, obs);
  ImputationState next = state;
  if (obs.num_missing() == 0) return next;
  const SweepCache cache(params);
  sweep_cov_inplace(next, cache, obs);
  return next;
}

double gamma_surrogate(const ImputationState& state, const GaussianParams& params) {
  const Matrix d = params.sigma.cov().matrix() - state.Y_hat;
  return (d * params.sigma.prec().matrix() * d).trace();
}

double observed_loglik(const GaussianParams& params, const IncompleteObservation& obs,
                       const ImputationState& state) {
  check_dims(params, obs);
  const Vector d = state.y_hat - params.mu;
  const double quad = d.dot(params.sigma.prec().matrix() * d);
  const double m = static_cast<double>(obs.num_observed());
  return -0.5 * (m * kLog2Pi + logdet_observed_block(params.sigma, obs.split()) + quad);
}

double free_energy_term(const GaussianParams& params, const IncompleteObservation& obs,
                        const ImputationState& state) {
  const Matrix& xi = params.sigma.prec().matrix();
  const Index p = obs.dim();
  const auto& z = obs.split().missing();
  const std::size_t l = z.size();
  double quad = 0.0;
  for (Index c = 0; c < p; ++c) {
    double acc = 0.0;
    for (Index r = 0; r < p; ++r) acc += xi(r, c) * (state.y_hat(r) - params.mu(r));
    quad += acc * (state.y_hat(c) - params.mu(c));
  }
  double trace = 0.0;
  double logdet_zhat = 0.0;
  if (l > 0) {
    // In-place Cholesky of the imputed block; the loop sizes are tiny.
    thread_local std::vector<double> a;
    a.assign(l * l, 0.0);
    for (std::size_t r = 0; r < l; ++r) {
      for (std::size_t c = 0; c < l; ++c) {
        const double y = state.Y_hat(z[r], z[c]);
        a[r * l + c] = y;
        trace += xi(z[r], z[c]) * y;
      }
    }
    for (std::size_t j = 0; j < l; ++j) {
      double djj = a[j * l + j];
      for (std::size_t k = 0; k < j; ++k) djj -= a[j * l + k] * a[j * l + k];
      if (!(djj > 0.0)) {
        throw NotPositiveDefinite("imputed covariance block is not positive definite");
      }
      const double ljj = std::sqrt(djj);
      a[j * l + j] = ljj;
      logdet_zhat += 2.0 * std::log(ljj);
      for (std::size_t r = j + 1; r < l; ++r) {
        double v = a[r * l + j];
        for (std::size_t k = 0; k < j; ++k) v -= a[r * l + k] * a[j * l + k];
        a[r * l + j] = v / ljj;
      }
    }
  }
  const double m = static_cast<double>(obs.num_observed());
  return -0.5 * (m * kLog2Pi + params.sigma.logdet_cov() + quad + trace - logdet_zhat -
                 static_cast<double>(l));
}

double marginal_loglik(const GaussianParams& params, const IncompleteObservation& obs) {
  check_dims(params, obs);
  const auto& x = obs.split().observed();
  Eigen::LLT<Matrix> llt(params.sigma.cov().matrix()(x, x));
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("marginal_loglik: observed covariance block is singular");
  }
  const Vector dx = obs.observed_values() - params.mu(x);
  const Vector w = llt.matrixL().solve(dx);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + logdet + w.squaredNorm());
}

PatternConditional::PatternConditional(const GaussianParams& params, const IndexSplit& split)
    : mu_(params.mu), split_(split) {
  if (params.dim() != split.dim()) {
    throw InvalidArgument("PatternConditional: split dimension does not match parameters");
  }
  const auto& x = split.observed();
  const auto& z = split.missing();
  const Matrix& sigma = params.sigma.cov().matrix();
  llt_xx_.compute(sigma(x, x));
  if (llt_xx_.info() != Eigen::Success) {
    throw NotPositiveDefinite("PatternConditional: observed covariance block is singular");
  }
  logdet_xx_ = 2.0 * llt_xx_.matrixLLT().diagonal().array().log().sum();
  if (!z.empty()) {
    const Matrix sxz = sigma(x, z);
    regression_ = llt_xx_.solve(sxz).transpose();
    cond_cov_ = sigma(z, z) - regression_ * sxz;
    cond_cov_ = 0.5 * (cond_cov_ + cond_cov_.transpose()).eval();
  }
}

double PatternConditional::apply(const IncompleteObservation& obs, ImputationState& state) const {
  const auto& x = split_.observed();
  const auto& z = split_.missing();
  const Index p = split_.dim();
  const Vector dx = obs.observed_values() - mu_(x);
  state.y_hat = obs.raw_values();
  if (state.Y_hat.rows() != p || state.Y_hat.cols() != p) {
    state.Y_hat = Matrix::Zero(p, p);
  }
  if (!z.empty()) {
    state.y_hat(z) = mu_(z) + regression_ * dx;
    state.Y_hat(z, z) = cond_cov_;
  }
  const Vector w = llt_xx_.matrixL().solve(dx);
  return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + logdet_xx_ + w.squaredNorm());
}

}  // namespace pemix
