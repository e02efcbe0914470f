#include "pemix/fit.hpp"

#include "pemix/errors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>

namespace pemix {

std::string to_string(Algorithm a) { return a == Algorithm::kEm ? "em" : "pem"; }

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "em") return Algorithm::kEm;
  if (s == "pem") return Algorithm::kPem;
  throw InvalidArgument("unknown algorithm '" + s + "' (expected em or pem)");
}

namespace {

struct PatternIndex {
  std::vector<IndexSplit> splits;
  std::vector<std::vector<Index>> members;
};

PatternIndex index_patterns(const Dataset& data) {
  PatternIndex out;
  std::map<std::vector<bool>, std::size_t> ids;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto [it, inserted] = ids.try_emplace(data[i].mask(), out.splits.size());
    if (inserted) {
      out.splits.push_back(data[i].split());
      out.members.emplace_back();
    }
    out.members[it->second].push_back(static_cast<Index>(i));
  }
  return out;
}

struct ColumnMoments {
  Vector mean;
  Vector var;
};

ColumnMoments column_moments(const Dataset& data) {
  const Index p = data.front().dim();
  Vector sum = Vector::Zero(p);
  Vector count = Vector::Zero(p);
  for (const auto& obs : data) {
    for (Index j : obs.split().observed()) {
      sum(j) += obs.value(j);
      count(j) += 1.0;
    }
  }
  ColumnMoments m;
  m.mean = Vector::Zero(p);
  m.var = Vector::Ones(p);
  for (Index j = 0; j < p; ++j) {
    if (count(j) > 0) m.mean(j) = sum(j) / count(j);
  }
  Vector ss = Vector::Zero(p);
  for (const auto& obs : data) {
    for (Index j : obs.split().observed()) {
      const double d = obs.value(j) - m.mean(j);
      ss(j) += d * d;
    }
  }
  for (Index j = 0; j < p; ++j) {
    if (count(j) > 1 && ss(j) > 0) m.var(j) = ss(j) / count(j);
  }
  return m;
}

void validate_problem(const Dataset& data, Index G, Index q) {
  if (data.empty()) throw InvalidArgument("no observations");
  const Index n = static_cast<Index>(data.size());
  const Index p = data.front().dim();
  for (const auto& obs : data) {
    if (obs.dim() != p) throw InvalidArgument("observations differ in dimension");
  }
  if (G < 1) throw InvalidArgument("number of components must be at least 1");
  if (q < 0) throw InvalidArgument("number of factors must be non-negative");
  if (n <= G) {
    throw InvalidArgument("need more observations than components (n=" + std::to_string(n) +
                          ", G=" + std::to_string(G) + ")");
  }
  if (q >= p) {
    throw InvalidArgument("need fewer factors than variables (p=" + std::to_string(p) +
                          ", q=" + std::to_string(q) + ")");
  }
}

MixtureParams initial_params(const Dataset& data, const Initialization& init,
                             const ColumnMoments& moments, const Vector& psi_floor,
                             WorkCounters* counters) {
  const Index n = static_cast<Index>(data.size());
  const Index G = init.resp.cols();
  const Index p = moments.mean.size();
  const Matrix& w = init.resp;

  Vector pi = w.colwise().sum().transpose() / static_cast<double>(n);
  std::vector<Vector> mu(static_cast<std::size_t>(G));
  for (Index g = 0; g < G; ++g) {
    Vector num = Vector::Zero(p);
    Vector den = Vector::Zero(p);
    for (Index i = 0; i < n; ++i) {
      const auto& obs = data[static_cast<std::size_t>(i)];
      for (Index j : obs.split().observed()) {
        num(j) += w(i, g) * obs.value(j);
        den(j) += w(i, g);
      }
    }
    Vector m = moments.mean;
    for (Index j = 0; j < p; ++j) {
      if (den(j) > 0) m(j) = num(j) / den(j);
    }
    mu[static_cast<std::size_t>(g)] = m;
  }
  const Vector communality = (init.lambda * init.lambda.transpose()).diagonal();
  const Vector psi0 = (moments.var - communality).cwiseMax(0.1 * moments.var).cwiseMax(psi_floor);
  std::vector<Vector> psi(static_cast<std::size_t>(G), psi0);
  return MixtureParams(std::move(pi), std::move(mu), init.lambda, std::move(psi), counters);
}

EStepSummary exact_estep(const MixtureParams& params, const Dataset& data,
                         const PatternIndex& patterns, StateTable& states, WorkCounters& work) {
  const Index n = static_cast<Index>(data.size());
  const Index G = params.G();
  Matrix log_terms(n, G);
  for (Index g = 0; g < G; ++g) {
    const GaussianParams& comp = params.component(g);
    const double log_pi = std::log(params.pi()(g));
    for (std::size_t k = 0; k < patterns.splits.size(); ++k) {
      const PatternConditional cond(comp, patterns.splits[k]);
      ++work.block_inversions;
      for (Index i : patterns.members[k]) {
        log_terms(i, g) = log_pi + cond.apply(data[static_cast<std::size_t>(i)], states.at(i, g));
      }
    }
  }
  return normalize_log_terms(log_terms);
}

EStepSummary partial_estep(const MixtureParams& params, const Dataset& data, StateTable& states,
                           int sweeps, WorkCounters& work, std::int64_t& total_sweeps) {
  const Index n = static_cast<Index>(data.size());
  const Index G = params.G();
  Matrix log_terms(n, G);
  for (Index g = 0; g < G; ++g) {
    const GaussianParams& comp = params.component(g);
    const SweepCache cache(comp);
    work.rank_one_fallbacks += cache.fallbacks();
    const double log_pi = std::log(params.pi()(g));
    for (Index i = 0; i < n; ++i) {
      const auto& obs = data[static_cast<std::size_t>(i)];
      ImputationState& st = states.at(i, g);
      for (int s = 0; s < sweeps; ++s) {
        sweep_mean_inplace(st, comp, obs);
        sweep_cov_inplace(st, cache, obs);
      }
      log_terms(i, g) = log_pi + free_energy_term(comp, obs, st);
    }
  }
  total_sweeps += static_cast<std::int64_t>(sweeps) * n * G;
  return normalize_log_terms(log_terms);
}

FitResult run_fit(Algorithm algorithm, const Dataset& data, const Initialization& init,
                  const FitConfig& config, int max_iter) {
  const Index G = init.resp.cols();
  const Index q = init.lambda.cols();
  validate_problem(data, G, q);
  const Index n = static_cast<Index>(data.size());
  const Index p = data.front().dim();
  if (init.resp.rows() != n || init.lambda.rows() != p) {
    throw InvalidArgument("initialization does not match the data dimensions");
  }
  if (config.sweeps_per_iter < 1) throw InvalidArgument("sweeps_per_iter must be at least 1");
  if (max_iter < 1) throw InvalidArgument("max_iter must be at least 1");

  const ColumnMoments moments = column_moments(data);
  const Vector psi_floor = config.psi_floor_scale * moments.var;
  const double min_mass = config.min_component_mass > 0
                              ? config.min_component_mass
                              : std::max<double>(static_cast<double>(q + 1), 2.0);

  FitResult result;
  result.algorithm = algorithm;
  result.sweeps_per_iter = algorithm == Algorithm::kPem ? config.sweeps_per_iter : 0;
  MixtureParams params = initial_params(data, init, moments, psi_floor, &result.setup_work);
  const PatternIndex patterns = index_patterns(data);
  result.num_patterns = static_cast<Index>(patterns.splits.size());

  StateTable states(n, G);
  if (algorithm == Algorithm::kPem) {
    for (Index i = 0; i < n; ++i) {
      for (Index g = 0; g < G; ++g) {
        states.at(i, g) =
            ImputationState::initial(params.component(g), data[static_cast<std::size_t>(i)]);
      }
    }
  }

  EStepSummary es;
  bool params_ahead = false;  // params updated after the last E-step
  double previous = std::numeric_limits<double>::quiet_NaN();
  for (int t = 1; t <= max_iter; ++t) {
    IterationWork iw;
    es = algorithm == Algorithm::kEm
             ? exact_estep(params, data, patterns, states, iw.counters)
             : partial_estep(params, data, states, config.sweeps_per_iter, iw.counters,
                             result.total_sweeps);
    params_ahead = false;
    result.loglik_trace.push_back(es.loglik);
    result.iterations = t;
    if (t >= 2 && std::abs(es.loglik - previous) < config.tolerance * std::abs(es.loglik)) {
      result.converged = true;
      result.iteration_work.push_back(iw);
      break;
    }
    previous = es.loglik;
    if (t == max_iter) {
      result.iteration_work.push_back(iw);
      break;
    }
    const ComponentStats stats = weighted_stats(data, states, es.resp, min_mass);
    params = mstep_common_factors(stats, params, psi_floor, &iw.counters);
    params_ahead = true;
    result.iteration_work.push_back(iw);
  }

  if (algorithm == Algorithm::kPem || params_ahead) {
    es = exact_estep(params, data, patterns, states, result.final_pass_work);
  }
  result.loglik = es.loglik;
  result.resp = std::move(es.resp);
  result.map_labels = result.resp.map_labels();
  result.params = std::move(params);
  result.states = std::move(states);
  result.bic = bic_value(result.loglik, G, p, q, n);
  return result;
}

template <typename Fn>
FitResult with_reinitialization(const Dataset& data, Index G, Index q, const FitConfig& config,
                                Fn&& fit) {
  validate_problem(data, G, q);
  std::mt19937_64 rng(config.seed);
  for (int attempt = 0;; ++attempt) {
    const Initialization init = random_initialization(data, G, q, rng, attempt);
    try {
      FitResult r = fit(init);
      r.restarts_used = attempt;
      return r;
    } catch (const DegenerateComponent&) {
      if (attempt >= config.restarts) throw;
    }
  }
}

}  // namespace

Initialization random_initialization(const Dataset& data, Index G, Index q, std::mt19937_64& rng,
                                     int start) {
  validate_problem(data, G, q);
  const Index n = static_cast<Index>(data.size());
  const Index p = data.front().dim();
  Initialization init;
  init.resp.resize(n, G);
  std::exponential_distribution<double> expo(1.0);
  for (Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Index g = 0; g < G; ++g) {
      init.resp(i, g) = expo(rng);
      s += init.resp(i, g);
    }
    init.resp.row(i) /= s;
  }

  init.lambda = Matrix::Zero(p, q);
  if (q == 0) return init;

  std::vector<Index> complete;
  for (Index i = 0; i < n; ++i) {
    if (data[static_cast<std::size_t>(i)].num_missing() == 0) complete.push_back(i);
  }
  if (start % 2 == 0 && static_cast<Index>(complete.size()) > p) {
    Matrix x(static_cast<Index>(complete.size()), p);
    for (std::size_t r = 0; r < complete.size(); ++r) {
      x.row(static_cast<Index>(r)) = data[static_cast<std::size_t>(complete[r])].raw_values().transpose();
    }
    const Matrix centered = x.rowwise() - x.colwise().mean();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(complete.size());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    const Vector& values = eig.eigenvalues();  // ascending
    const double residual = values.head(p - q).mean();
    for (Index k = 0; k < q; ++k) {
      const double lam = values(p - 1 - k);
      const double scale = std::sqrt(std::max(lam - residual, 1e-3 * std::max(lam, 1e-12)));
      init.lambda.col(k) = scale * eig.eigenvectors().col(p - 1 - k);
    }
  } else {
    const ColumnMoments m = column_moments(data);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index k = 0; k < q; ++k) {
      for (Index j = 0; j < p; ++j) init.lambda(j, k) = 0.1 * std::sqrt(m.var(j)) * normal(rng);
    }
  }
  return init;
}

FitResult fit_from(Algorithm algorithm, const Dataset& data, const Initialization& init,
                   const FitConfig& config) {
  return run_fit(algorithm, data, init, config, config.max_iter);
}

FitResult fit_em_from(const Dataset& data, const Initialization& init, const FitConfig& config) {
  return fit_from(Algorithm::kEm, data, init, config);
}

FitResult fit_pem_from(const Dataset& data, const Initialization& init, const FitConfig& config) {
  return fit_from(Algorithm::kPem, data, init, config);
}

FitResult fit_em(const Dataset& data, Index G, Index q, const FitConfig& config) {
  return with_reinitialization(data, G, q, config,
                               [&](const Initialization& init) { return fit_em_from(data, init, config); });
}

FitResult fit_pem(const Dataset& data, Index G, Index q, const FitConfig& config) {
  return with_reinitialization(data, G, q, config,
                               [&](const Initialization& init) { return fit_pem_from(data, init, config); });
}

FitResult fit_best(Algorithm algorithm, const Dataset& data, Index G, Index q,
                   const FitConfig& config) {
  validate_problem(data, G, q);
  std::mt19937_64 rng(config.seed);
  const int starts = std::max(1, config.restarts);
  std::optional<FitResult> best;
  std::optional<Initialization> best_init;
  std::exception_ptr last_error;
  const bool short_runs = config.short_run_iterations > 0;
  for (int r = 0; r < starts; ++r) {
    Initialization init = random_initialization(data, G, q, rng, r);
    try {
      FitResult fit = run_fit(algorithm, data, init, config,
                              short_runs ? std::min(config.short_run_iterations, config.max_iter)
                                         : config.max_iter);
      if (!best || fit.loglik > best->loglik) {
        best = std::move(fit);
        best_init = std::move(init);
      }
    } catch (const Error&) {
      last_error = std::current_exception();
    }
  }
  if (!best) std::rethrow_exception(last_error);
  if (short_runs) {
    best = run_fit(algorithm, data, *best_init, config, config.max_iter);
  }
  best->restarts_used = starts;
  return std::move(*best);
}

double bic(const FitResult& result, Index n) {
  return bic_value(result.loglik, result.params.G(), result.params.p(), result.params.q(), n);
}

double aligned_label_agreement(const std::vector<Index>& reference, const std::vector<Index>& labels,
                               Index G) {
  if (reference.size() != labels.size()) {
    throw InvalidArgument("label vectors differ in length");
  }
  if (reference.empty()) return 1.0;
  Matrix counts = Matrix::Zero(G, G);
  for (std::size_t i = 0; i < labels.size(); ++i) counts(labels[i], reference[i]) += 1.0;
  std::vector<Index> perm(static_cast<std::size_t>(G));
  std::iota(perm.begin(), perm.end(), Index{0});
  double best = 0.0;
  do {
    double s = 0.0;
    for (Index g = 0; g < G; ++g) s += counts(g, perm[static_cast<std::size_t>(g)]);
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(labels.size());
}

}  // namespace pemix
