#pragma once

// Gaussian mixture of factor analyzers with loadings shared by every
// component: Sigma_g = Lambda Lambda' + Psi_g.

#include "pemix/gaussian_missing.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pemix {

using Dataset = std::vector<IncompleteObservation>;

/// Running tally of the expensive linear-algebra work done by a fit.
struct WorkCounters {
  std::int64_t covariance_inversions = 0;  ///< p x p precision refreshes
  std::int64_t woodbury_solves = 0;        ///< q x q solves inside those refreshes
  std::int64_t block_inversions = 0;       ///< per-pattern observed-block factorizations
  std::int64_t rank_one_fallbacks = 0;     ///< submatrix inverses that fell back to direct

  WorkCounters& operator+=(const WorkCounters& o) {
    covariance_inversions += o.covariance_inversions;
    woodbury_solves += o.woodbury_solves;
    block_inversions += o.block_inversions;
    rank_one_fallbacks += o.rank_one_fallbacks;
    return *this;
  }
  friend bool operator==(const WorkCounters&, const WorkCounters&) = default;
};

class MixtureParams {
 public:
  MixtureParams() = default;

  /// Validates the invariants and builds every Sigma_g together with its
  /// precision through the Woodbury identity (one q x q solve per component).
  MixtureParams(Vector pi, std::vector<Vector> mu, Matrix lambda, std::vector<Vector> psi,
                WorkCounters* counters = nullptr);

  Index G() const { return pi_.size(); }
  Index p() const { return lambda_.rows(); }
  Index q() const { return lambda_.cols(); }

  const Vector& pi() const { return pi_; }
  const std::vector<Vector>& mu() const { return mu_; }
  const Matrix& lambda() const { return lambda_; }
  const std::vector<Vector>& psi() const { return psi_; }

  /// N(mu_g, Sigma_g) with the cached covariance/precision pair.
  const GaussianParams& component(Index g) const { return components_[static_cast<std::size_t>(g)]; }

  /// beta_g = Lambda' Sigma_g^{-1} (q x p).
  Matrix factor_regression(Index g) const;

 private:
  Vector pi_;
  std::vector<Vector> mu_;
  Matrix lambda_;
  std::vector<Vector> psi_;
  std::vector<GaussianParams> components_;
};

/// n x G posterior component probabilities.
struct Responsibilities {
  Matrix w;

  Index n() const { return w.rows(); }
  Index G() const { return w.cols(); }
  std::vector<Index> map_labels() const;
};

/// Per-(observation, component) imputation states, stored row-major in i.
class StateTable {
 public:
  StateTable() = default;
  StateTable(Index n, Index G) : n_(n), G_(G), states_(static_cast<std::size_t>(n * G)) {}

  Index n() const { return n_; }
  Index G() const { return G_; }
  ImputationState& at(Index i, Index g) { return states_[static_cast<std::size_t>(i * G_ + g)]; }
  const ImputationState& at(Index i, Index g) const {
    return states_[static_cast<std::size_t>(i * G_ + g)];
  }

 private:
  Index n_ = 0;
  Index G_ = 0;
  std::vector<ImputationState> states_;
};

struct EStepSummary {
  Responsibilities resp;
  /// sum_i log sum_g exp(log_terms(i, g)).
  double loglik = 0.0;
};

/// Row-normalizes log_terms(i, g) = ln pi_g + (component log-density of row i)
/// in log-space. Throws NumericalError naming the first row whose terms are
/// all non-finite.
EStepSummary normalize_log_terms(const Matrix& log_terms);

/// Posterior weights from the per-component observed log-densities:
///   log_terms(i, g) = ln pi_g + observed_loglik_g(i) - KL_cov,g(i).
/// The covariance part of the KL divergence vanishes for exact states, where
/// the result is the ordinary observed-data posterior; for partial states it
/// makes `loglik` the free energy of the current imputation.
EStepSummary responsibilities(const MixtureParams& params, const Dataset& data,
                              const StateTable& states);

struct ComponentStats {
  Vector n;                       ///< effective counts n_g
  std::vector<Vector> mean;       ///< weighted means ybar_g
  std::vector<Matrix> scatter;    ///< S_g
};

/// n_g = sum_i w_ig, ybar_g = sum_i w_ig y_hat_ig / n_g and
/// S_g = (1/n_g) sum_i w_ig [(y_hat_ig - ybar_g)(y_hat_ig - ybar_g)' + Y_hat_ig].
/// Throws DegenerateComponent when some n_g < min_component_mass.
ComponentStats weighted_stats(const Dataset& data, const StateTable& states,
                              const Responsibilities& resp, double min_component_mass);

/// M-step: pi, mu from the stats, then the common loadings from the pq x pq
/// system and the diagonal noise from the closed form, floored at psi_floor.
/// Throws NumericalError if the loading system is singular.
MixtureParams mstep_common_factors(const ComponentStats& stats, const MixtureParams& params,
                                   const Vector& psi_floor, WorkCounters* counters = nullptr);

/// Free parameters: (G-1) + Gp + [pq - q(q-1)/2] + Gp.
std::int64_t free_parameter_count(Index G, Index p, Index q);

/// 2 loglik - m ln n; larger is better.
double bic_value(double loglik, Index G, Index p, Index q, Index n);

}  // namespace pemix
