#include "pemix/mixture.hpp"

#include "pemix/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pemix {

MixtureParams::MixtureParams(Vector pi, std::vector<Vector> mu, Matrix lambda,
                             std::vector<Vector> psi, WorkCounters* counters)
    : pi_(std::move(pi)), mu_(std::move(mu)), lambda_(std::move(lambda)), psi_(std::move(psi)) {
  const Index G = pi_.size();
  const Index p = lambda_.rows();
  const Index q = lambda_.cols();
  if (G < 1) throw InvalidArgument("MixtureParams: need at least one component");
  if (p < 1) throw InvalidArgument("MixtureParams: dimension must be positive");
  if (q >= p) {
    throw InvalidArgument("MixtureParams: factor count q=" + std::to_string(q) +
                          " must be smaller than p=" + std::to_string(p));
  }
  if (static_cast<Index>(mu_.size()) != G || static_cast<Index>(psi_.size()) != G) {
    throw InvalidArgument("MixtureParams: expected one mean and one psi per component");
  }
  if ((pi_.array() <= 0.0).any()) {
    throw InvalidArgument("MixtureParams: mixing proportions must be positive");
  }
  if (std::abs(pi_.sum() - 1.0) > 1e-12) {
    throw InvalidArgument("MixtureParams: mixing proportions must sum to one");
  }
  pi_ /= pi_.sum();

  components_.reserve(static_cast<std::size_t>(G));
  for (Index g = 0; g < G; ++g) {
    const Vector& psi_g = psi_[static_cast<std::size_t>(g)];
    if (mu_[static_cast<std::size_t>(g)].size() != p || psi_g.size() != p) {
      throw InvalidArgument("MixtureParams: component " + std::to_string(g) +
                            " has the wrong dimension");
    }
    if (!(psi_g.array() > 0.0).all()) {
      throw InvalidArgument("MixtureParams: noise variances must be positive");
    }
    // Woodbury: (LL' + Psi)^{-1} = Psi^{-1} - Psi^{-1} L M^{-1} L' Psi^{-1},
    // M = I_q + L' Psi^{-1} L, ln|Sigma| = sum ln psi + ln|M|.
    const Vector psi_inv = psi_g.cwiseInverse();
    Matrix cov = lambda_ * lambda_.transpose();
    cov.diagonal() += psi_g;
    Matrix prec = psi_inv.asDiagonal();
    double logdet = psi_g.array().log().sum();
    if (q > 0) {
      const Matrix scaled = psi_inv.asDiagonal() * lambda_;  // Psi^{-1} L
      Matrix m = Matrix::Identity(q, q) + lambda_.transpose() * scaled;
      Eigen::LLT<Matrix> llt(m);
      if (llt.info() != Eigen::Success) {
        throw NotPositiveDefinite("MixtureParams: Woodbury capacitance matrix is singular");
      }
      prec -= scaled * llt.solve(scaled.transpose());
      logdet += 2.0 * llt.matrixLLT().diagonal().array().log().sum();
      if (counters) ++counters->woodbury_solves;
    }
    if (counters) ++counters->covariance_inversions;
    components_.push_back(GaussianParams{
        mu_[static_cast<std::size_t>(g)],
        CovPrecisionPair::from_parts(SymMatrix::symmetrized(cov), SymMatrix::symmetrized(prec),
                                     logdet)});
  }
}

Matrix MixtureParams::factor_regression(Index g) const {
  return lambda_.transpose() * component(g).sigma.prec().matrix();
}

std::vector<Index> Responsibilities::map_labels() const {
  std::vector<Index> labels(static_cast<std::size_t>(w.rows()));
  for (Index i = 0; i < w.rows(); ++i) {
    Index best = 0;
    w.row(i).maxCoeff(&best);
    labels[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

EStepSummary normalize_log_terms(const Matrix& log_terms) {
  EStepSummary out;
  out.resp.w.resize(log_terms.rows(), log_terms.cols());
  double total = 0.0;
  for (Index i = 0; i < log_terms.rows(); ++i) {
    const double mx = log_terms.row(i).maxCoeff();
    if (!std::isfinite(mx)) {
      throw NumericalError("every component density underflowed for observation " +
                           std::to_string(i + 1));
    }
    double s = 0.0;
    for (Index g = 0; g < log_terms.cols(); ++g) s += std::exp(log_terms(i, g) - mx);
    const double lse = mx + std::log(s);
    for (Index g = 0; g < log_terms.cols(); ++g) {
      out.resp.w(i, g) = std::exp(log_terms(i, g) - lse);
    }
    total += lse;
  }
  out.loglik = total;
  return out;
}

EStepSummary responsibilities(const MixtureParams& params, const Dataset& data,
                              const StateTable& states) {
  const Index n = static_cast<Index>(data.size());
  const Index G = params.G();
  Matrix log_terms(n, G);
  for (Index i = 0; i < n; ++i) {
    const IncompleteObservation& obs = data[static_cast<std::size_t>(i)];
    for (Index g = 0; g < G; ++g) {
      const GaussianParams& comp = params.component(g);
      const ImputationState& st = states.at(i, g);
      log_terms(i, g) = std::log(params.pi()(g)) + free_energy_term(comp, obs, st);
    }
  }
  return normalize_log_terms(log_terms);
}

ComponentStats weighted_stats(const Dataset& data, const StateTable& states,
                              const Responsibilities& resp, double min_component_mass) {
  const Index n = static_cast<Index>(data.size());
  const Index G = resp.G();
  if (resp.n() != n || states.n() != n || states.G() != G) {
    throw InvalidArgument("weighted_stats: data, states and responsibilities disagree in size");
  }
  const Index p = n > 0 ? data.front().dim() : 0;
  ComponentStats stats;
  stats.n = resp.w.colwise().sum().transpose();
  stats.mean.assign(static_cast<std::size_t>(G), Vector::Zero(p));
  stats.scatter.assign(static_cast<std::size_t>(G), Matrix::Zero(p, p));
  for (Index g = 0; g < G; ++g) {
    const double ng = stats.n(g);
    if (!(ng >= min_component_mass)) {
      throw DegenerateComponent(static_cast<std::size_t>(g), ng, min_component_mass);
    }
    Vector& mean = stats.mean[static_cast<std::size_t>(g)];
    for (Index i = 0; i < n; ++i) mean += resp.w(i, g) * states.at(i, g).y_hat;
    mean /= ng;
    Matrix& s = stats.scatter[static_cast<std::size_t>(g)];
    Vector d(p);
    for (Index i = 0; i < n; ++i) {
      const double w = resp.w(i, g);
      const ImputationState& st = states.at(i, g);
      d = st.y_hat - mean;
      s.selfadjointView<Eigen::Lower>().rankUpdate(d, w);
      s.triangularView<Eigen::Lower>() += w * st.Y_hat;
    }
    s = s.selfadjointView<Eigen::Lower>();
    s /= ng;
  }
  return stats;
}

MixtureParams mstep_common_factors(const ComponentStats& stats, const MixtureParams& params,
                                   const Vector& psi_floor, WorkCounters* counters) {
  const Index G = params.G();
  const Index p = params.p();
  const Index q = params.q();
  const double n = stats.n.sum();
  if (psi_floor.size() != p) {
    throw InvalidArgument("mstep_common_factors: psi_floor has the wrong length");
  }

  Vector pi = stats.n / n;
  std::vector<Vector> mu = stats.mean;
  std::vector<Vector> psi(static_cast<std::size_t>(G));
  Matrix lambda = Matrix::Zero(p, q);

  if (q == 0) {
    for (Index g = 0; g < G; ++g) {
      psi[static_cast<std::size_t>(g)] =
          stats.scatter[static_cast<std::size_t>(g)].diagonal().cwiseMax(psi_floor);
    }
    return MixtureParams(std::move(pi), std::move(mu), std::move(lambda), std::move(psi), counters);
  }

  const Matrix& lambda_old = params.lambda();
  std::vector<Matrix> beta(static_cast<std::size_t>(G));
  std::vector<Matrix> theta(static_cast<std::size_t>(G));
  // sum_g n_g (Theta_g kron Psi_g^{-1}) vec(Lambda) = vec(sum_g n_g Psi_g^{-1} S_g beta_g')
  Matrix system = Matrix::Zero(p * q, p * q);
  Matrix rhs = Matrix::Zero(p, q);
  for (Index g = 0; g < G; ++g) {
    const auto gi = static_cast<std::size_t>(g);
    const Matrix& s = stats.scatter[gi];
    beta[gi] = params.factor_regression(g);
    theta[gi] = Matrix::Identity(q, q) - beta[gi] * lambda_old +
                beta[gi] * s * beta[gi].transpose();
    const Vector psi_inv = params.psi()[gi].cwiseInverse();
    const double ng = stats.n(g);
    for (Index a = 0; a < q; ++a) {
      for (Index b = 0; b < q; ++b) {
        const double t = ng * theta[gi](a, b);
        for (Index r = 0; r < p; ++r) system(a * p + r, b * p + r) += t * psi_inv(r);
      }
    }
    rhs.noalias() += ng * (psi_inv.asDiagonal() * (s * beta[gi].transpose()));
  }
  system = 0.5 * (system + system.transpose()).eval();
  Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("loading update: the " + std::to_string(p * q) + "x" +
                         std::to_string(p * q) +
                         " system is singular; try a smaller number of factors");
  }
  const Vector vec_rhs = Eigen::Map<const Vector>(rhs.data(), p * q);
  const Vector vec_lambda = llt.solve(vec_rhs);
  lambda = Eigen::Map<const Matrix>(vec_lambda.data(), p, q);

  for (Index g = 0; g < G; ++g) {
    const auto gi = static_cast<std::size_t>(g);
    const Matrix& s = stats.scatter[gi];
    const Matrix lb_s = lambda * (beta[gi] * s);
    Vector d = s.diagonal() - 2.0 * lb_s.diagonal() +
               (lambda * theta[gi] * lambda.transpose()).diagonal();
    psi[gi] = d.cwiseMax(psi_floor);
  }
  return MixtureParams(std::move(pi), std::move(mu), std::move(lambda), std::move(psi), counters);
}

std::int64_t free_parameter_count(Index G, Index p, Index q) {
  return (G - 1) + G * p + (p * q - q * (q - 1) / 2) + G * p;
}

double bic_value(double loglik, Index G, Index p, Index q, Index n) {
  return 2.0 * loglik -
         static_cast<double>(free_parameter_count(G, p, q)) * std::log(static_cast<double>(n));
}

}  // namespace pemix
