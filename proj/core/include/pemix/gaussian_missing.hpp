#pragma once

// Missing-data machinery for a single Gaussian N(mu, Sigma): exact
// conditionals of the missing block given the observed block, the KL
// divergence of a Gaussian imputation from that conditional, and the
// coordinate sweeps that shrink the divergence using only the precision
// matrix and rank-one corrections.

#include "pemix/linalg.hpp"

#include <vector>

namespace pemix {

/// One row of ratings: values plus an observed/missing mask. Missing values
/// are stored as NaN and never read.
class IncompleteObservation {
 public:
  IncompleteObservation() = default;
  IncompleteObservation(const Vector& values, std::vector<bool> observed);

  static IncompleteObservation complete(const Vector& values);

  Index dim() const { return static_cast<Index>(observed_.size()); }
  bool is_observed(Index j) const { return observed_[static_cast<std::size_t>(j)]; }
  const std::vector<bool>& mask() const { return observed_; }
  const IndexSplit& split() const { return split_; }
  Index num_observed() const { return split_.num_observed(); }
  Index num_missing() const { return split_.num_missing(); }

  /// Value of an observed coordinate. Throws InvalidArgument when missing.
  double value(Index j) const;
  /// Observed values in ascending coordinate order (length m).
  Vector observed_values() const;
  /// All values with NaN at the missing coordinates.
  const Vector& raw_values() const { return values_; }

 private:
  Vector values_;
  std::vector<bool> observed_;
  IndexSplit split_;
};

struct GaussianParams {
  Vector mu;
  CovPrecisionPair sigma;

  Index dim() const { return mu.size(); }
};

/// Current Gaussian imputation of the missing block: `y_hat` carries the data
/// on observed coordinates and the imputed mean on missing ones; `Y_hat` is
/// zero on observed rows/columns and holds the imputed covariance on the
/// missing block.
struct ImputationState {
  Vector y_hat;
  Matrix Y_hat;

  /// Starting point used by the partial E-step: missing means at mu_z and
  /// the missing block of Y_hat set to diag(Sigma_zz).
  static ImputationState initial(const GaussianParams& params, const IncompleteObservation& obs);

  /// l x l missing block of Y_hat.
  Matrix missing_block(const IndexSplit& split) const;
};

/// Exact E-step quantities for one observation: conditional mean and padded
/// conditional covariance. Uses the precision route when fewer coordinates
/// are missing than observed, the covariance route otherwise.
ImputationState exact_conditional(const GaussianParams& params, const IncompleteObservation& obs);

/// KL(N(z_hat, Z_hat) || N(mu_{z.x}, Sigma_{z.x})) including the -l/2
/// constant, so the value is >= 0 and zero only at the exact conditional.
/// Throws NotPositiveDefinite when the imputed block is not positive definite.
double kl_missing(const ImputationState& state, const GaussianParams& params,
                  const IncompleteObservation& obs);

/// Covariance part of kl_missing:
///   (tr(Xi_zz Z_hat) - ln|Z_hat| - ln|Xi_zz| - l) / 2.
double kl_missing_covariance_part(const ImputationState& state, const GaussianParams& params,
                                  const IncompleteObservation& obs);

/// Per-coordinate quantities for sweep_cov, derived once per parameter value:
/// regression row beta_j = Sigma_j^{-1} sigma_j (stored with a zero at j) and
/// the conditional variance sigma_jj - sigma_j' Sigma_j^{-1} sigma_j.
class SweepCache {
 public:
  SweepCache() = default;
  explicit SweepCache(const GaussianParams& params);

  const Matrix& regression_rows() const { return beta_; }
  double conditional_variance(Index j) const { return cond_var_(j); }
  int fallbacks() const { return fallbacks_; }

 private:
  Matrix beta_;  // row j = beta_j padded to length p
  Vector cond_var_;
  int fallbacks_ = 0;
};

/// One Gauss-Seidel sweep over the missing coordinates (ascending) of
///   y_j <- mu_j - (1/xi_jj) xi_j' (y_{-j} - mu_{-j}).
ImputationState sweep_mean(const ImputationState& state, const GaussianParams& params,
                           const IncompleteObservation& obs);
void sweep_mean_inplace(ImputationState& state, const GaussianParams& params,
                        const IncompleteObservation& obs);

/// One sweep over the missing rows of Y_hat (ascending). Row j is replaced by
/// the regression of coordinate j on the others through Sigma_j^{-1}:
///   Y_{j,-j} <- beta_j' Y_{-j,-j},
///   Y_jj     <- sigma_jj - beta_j' sigma_j + beta_j' Y_{-j,-j} beta_j,
/// then mirrored into column j. Each row update is the exact minimizer of
/// the KL divergence over that row with the remaining block held fixed.
ImputationState sweep_cov(const ImputationState& state, const GaussianParams& params,
                          const IncompleteObservation& obs);
void sweep_cov_inplace(ImputationState& state, const SweepCache& cache,
                       const IncompleteObservation& obs);

/// tr[(Sigma - Y_hat) Sigma^{-1} (Sigma - Y_hat)].
double gamma_surrogate(const ImputationState& state, const GaussianParams& params);

/// observed_loglik - kl_missing_covariance_part, evaluated as
///   -1/2 [m ln 2pi + ln|Sigma| + (y_hat - mu)' Xi (y_hat - mu)
///         + tr(Xi_zz Z_hat) - ln|Z_hat| - l]
/// so that no block of Sigma or Xi needs factorizing.
double free_energy_term(const GaussianParams& params, const IncompleteObservation& obs,
                        const ImputationState& state);

/// -1/2 [m ln 2pi + ln|Sigma_xx| + (y_hat - mu)' Xi (y_hat - mu)].
/// Equals ln phi(x | mu_x, Sigma_xx) when z_hat is the exact conditional
/// mean and is smaller otherwise.
double observed_loglik(const GaussianParams& params, const IncompleteObservation& obs,
                       const ImputationState& state);

/// Exact marginal log-density ln phi(x | mu_x, Sigma_xx) via the observed
/// block; used by the exact E-step.
double marginal_loglik(const GaussianParams& params, const IncompleteObservation& obs);

/// Exact conditional for every observation sharing one missingness pattern:
/// a single factorization of Sigma_xx serves them all.
class PatternConditional {
 public:
  PatternConditional(const GaussianParams& params, const IndexSplit& split);

  /// Writes the exact conditional into `state` and returns ln phi(x | mu_x, Sigma_xx).
  double apply(const IncompleteObservation& obs, ImputationState& state) const;

 private:
  Vector mu_;
  IndexSplit split_;
  Eigen::LLT<Matrix> llt_xx_;
  Matrix regression_;  // l x m
  Matrix cond_cov_;    // l x l
  double logdet_xx_ = 0.0;
};

}  // namespace pemix
