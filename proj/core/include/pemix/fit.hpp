#pragma once

#include "pemix/mixture.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace pemix {

enum class Algorithm { kEm, kPem };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct FitConfig {
  /// Independent random starts (model search) or re-initializations after a
  /// degenerate component (single fit).
  int restarts = 10;
  std::uint64_t seed = 1;
  /// Partial E-step sweeps of z_hat and Y_hat per iteration.
  int sweeps_per_iter = 1;
  /// Stop when |l_t - l_{t-1}| < tolerance * |l_t|.
  double tolerance = 1e-8;
  int max_iter = 5000;
  /// psi_floor_j = psi_floor_scale * (pooled variance of coordinate j).
  double psi_floor_scale = 1e-6;
  /// Minimum effective component mass; <= 0 means max(q + 1, 2).
  double min_component_mass = 0.0;
  /// When > 0, each random start is run for this many iterations and only the
  /// best one is continued to convergence.
  int short_run_iterations = 0;
};

/// Starting point shared by the EM and PEM drivers.
struct Initialization {
  Matrix resp;    ///< n x G soft assignments
  Matrix lambda;  ///< p x q starting loadings
};

/// Rows drawn from a symmetric Dirichlet(1). Loadings come from the top-q
/// eigenpairs of the complete-case covariance on even-numbered starts and
/// from small random entries on odd ones or when there are too few complete
/// rows. On complete data with well separated groups the leading eigenvector
/// is the between-group direction, so alternating keeps the restarts from
/// all landing in the same factor-absorbs-the-clusters optimum.
Initialization random_initialization(const Dataset& data, Index G, Index q, std::mt19937_64& rng,
                                     int start = 0);

/// Per-iteration work. Iteration t runs the E-step under the parameters of
/// iteration t-1 and, unless it is the last, the M-step that follows.
struct IterationWork {
  WorkCounters counters;
};

struct FitResult {
  Algorithm algorithm = Algorithm::kPem;
  MixtureParams params;
  Responsibilities resp;
  std::vector<Index> map_labels;
  /// Observed-data log-likelihood (EM) or free energy (PEM) per iteration.
  std::vector<double> loglik_trace;
  /// Exact observed-data log-likelihood at the reported parameters.
  double loglik = 0.0;
  double bic = 0.0;
  int iterations = 0;
  bool converged = false;
  int restarts_used = 0;
  /// Sweeps of each kind applied to each (observation, component) per iteration.
  int sweeps_per_iter = 0;
  std::int64_t total_sweeps = 0;
  /// Distinct missingness patterns in the data.
  Index num_patterns = 0;
  WorkCounters setup_work;
  std::vector<IterationWork> iteration_work;
  WorkCounters final_pass_work;
  StateTable states;
};

/// Reference EM with exact conditional E-steps (one observed-block
/// factorization per component and missingness pattern).
FitResult fit_em(const Dataset& data, Index G, Index q, const FitConfig& config);
FitResult fit_em_from(const Dataset& data, const Initialization& init, const FitConfig& config);

/// Partial EM: coordinate sweeps of the stored imputations instead of exact
/// conditionals, followed by one exact E-step on the converged parameters.
FitResult fit_pem(const Dataset& data, Index G, Index q, const FitConfig& config);
FitResult fit_pem_from(const Dataset& data, const Initialization& init, const FitConfig& config);

FitResult fit_from(Algorithm algorithm, const Dataset& data, const Initialization& init,
                   const FitConfig& config);

/// Runs config.restarts random starts of `algorithm` and keeps the one with
/// the largest final log-likelihood. Starts that fail are skipped; throws the
/// last error if all of them fail.
FitResult fit_best(Algorithm algorithm, const Dataset& data, Index G, Index q,
                   const FitConfig& config);

/// 2 l - m ln n for a finished fit.
double bic(const FitResult& result, Index n);

/// Permutation of result labels onto reference labels maximizing agreement;
/// returns the fraction of matching labels after alignment.
double aligned_label_agreement(const std::vector<Index>& reference, const std::vector<Index>& labels,
                               Index G);

}  // namespace pemix
