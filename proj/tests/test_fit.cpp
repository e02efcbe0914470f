#include "pemix/errors.hpp"
#include "pemix/fit.hpp"
#include "pemix/model_search.hpp"
#include "pemix/synthetic.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace {

using namespace pemix;

Dataset complete_rows(const Dataset& data) {
  Dataset out;
  for (const auto& o : data) {
    Vector v = o.raw_values();
    for (Index j = 0; j < v.size(); ++j) {
      if (!o.is_observed(j)) v(j) = 0.0;
    }
    out.push_back(IncompleteObservation::complete(v));
  }
  return out;
}

SyntheticSpec two_group_spec(std::uint64_t seed, Index n, Index p, Index q, Index k) {
  SyntheticSpec s;
  s.n = n;
  s.p = p;
  s.q = q;
  s.G = 2;
  s.observed_per_row = k;
  s.seed = seed;
  s.pi = Vector(2);
  s.pi << 0.4, 0.6;
  s.mu = {Vector::Constant(p, 3.0), Vector::Constant(p, 6.0)};
  for (Index j = 0; j < p; j += 2) s.mu[1](j) = 4.0;
  s.lambda = Matrix(p, q);
  for (Index j = 0; j < p; ++j) {
    for (Index c = 0; c < q; ++c) s.lambda(j, c) = 0.3 * std::cos(static_cast<double>(j + 3 * c));
  }
  s.psi = {Vector::Constant(p, 0.15), Vector::Constant(p, 0.2)};
  return s;
}

void expect_monotone(const std::vector<double>& trace, double tol) {
  for (std::size_t t = 1; t < trace.size(); ++t) {
    EXPECT_GE(trace[t] - trace[t - 1], -tol) << "step " << t;
  }
}

TEST(Algorithm, NamesRoundTrip) {
  EXPECT_EQ(algorithm_from_string("em"), Algorithm::kEm);
  EXPECT_EQ(to_string(Algorithm::kPem), "pem");
  EXPECT_THROW(algorithm_from_string("gibbs"), InvalidArgument);
}

TEST(FitEm, DiagonalSingleComponentIsClosedForm) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0.0, 1.0);
  Dataset data;
  for (int i = 0; i < 50; ++i) {
    Vector v(4);
    for (Index j = 0; j < 4; ++j) v(j) = 2.0 + static_cast<double>(j + 1) * nd(rng);
    data.push_back(IncompleteObservation::complete(v));
  }
  FitConfig cfg;
  cfg.seed = 3;
  const FitResult r = fit_em(data, 1, 0, cfg);
  EXPECT_TRUE(r.converged);
  // One M-step reaches the closed form; the next E-step repeats its value.
  EXPECT_LE(r.iterations, 3);
  Vector mean = Vector::Zero(4);
  for (const auto& o : data) mean += o.raw_values();
  mean /= 50.0;
  Vector var = Vector::Zero(4);
  for (const auto& o : data) var += (o.raw_values() - mean).cwiseAbs2();
  var /= 50.0;
  EXPECT_LT(oracle::rel_diff(r.params.mu()[0], mean), 1e-12);
  EXPECT_LT(oracle::rel_diff(r.params.psi()[0], var), 1e-12);
}

TEST(FitEm, RecoversWellSeparatedTwoGroupTruth) {
  int hits = 0;
  const int runs = 20;
  for (int s = 0; s < runs; ++s) {
    const SyntheticSpec spec = two_group_spec(100 + static_cast<std::uint64_t>(s), 500, 6, 1, 6);
    const SyntheticData d = generate_bib(spec);
    FitConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(s) + 1;
    cfg.restarts = 3;
    const FitResult r = fit_best(Algorithm::kEm, d.table.rows, 2, 1, cfg);
    // Components are labelled arbitrarily; match by the first mean coordinate.
    const Index lo = r.params.mu()[0](1) < r.params.mu()[1](1) ? 0 : 1;
    const bool ok = std::abs(r.params.pi()(lo) - 0.4) <= 0.05 &&
                    (r.params.mu()[static_cast<std::size_t>(lo)] - spec.mu[0]).cwiseAbs().maxCoeff() <= 0.1 &&
                    (r.params.mu()[static_cast<std::size_t>(1 - lo)] - spec.mu[1]).cwiseAbs().maxCoeff() <= 0.1;
    hits += ok ? 1 : 0;
  }
  EXPECT_GE(hits, 19) << hits << " of " << runs;
}

TEST(FitEm, TraceIsMonotoneOnBibData) {
  const SyntheticData d = generate_bib(SyntheticSpec::rating_study(2, 2, 5, 6));
  FitConfig cfg;
  cfg.seed = 2;
  const FitResult r = fit_em(d.table.rows, 2, 2, cfg);
  EXPECT_GT(r.loglik_trace.size(), 5u);
  expect_monotone(r.loglik_trace, 1e-8);
}

TEST(FitEm, CountsOneBlockInversionPerComponentAndPattern) {
  const SyntheticData d = generate_bib(SyntheticSpec::rating_study(2, 2, 5, 6));
  FitConfig cfg;
  cfg.seed = 2;
  cfg.max_iter = 4;
  const FitResult r = fit_em(d.table.rows, 2, 2, cfg);
  for (const auto& w : r.iteration_work) {
    EXPECT_EQ(w.counters.block_inversions, 2 * r.num_patterns);
  }
}

TEST(FitPem, CompleteDataMatchesEmTrajectory) {
  const SyntheticData d = generate_bib(two_group_spec(4, 200, 5, 1, 5));
  std::mt19937_64 rng(9);
  const Initialization init = random_initialization(d.table.rows, 2, 1, rng);
  FitConfig cfg;
  const FitResult em = fit_em_from(d.table.rows, init, cfg);
  const FitResult pem = fit_pem_from(d.table.rows, init, cfg);
  ASSERT_EQ(em.loglik_trace.size(), pem.loglik_trace.size());
  for (std::size_t t = 0; t < em.loglik_trace.size(); ++t) {
    EXPECT_NEAR(pem.loglik_trace[t], em.loglik_trace[t], 1e-9 * std::abs(em.loglik_trace[t]));
  }
}

TEST(FitPem, MonotoneAndAgreesWithEmOnBibData) {
  for (Index G : {1, 2}) {
    const SyntheticData d = generate_bib(SyntheticSpec::rating_study(2, 2, 5, 6));
    std::mt19937_64 rng(17);
    const Initialization init = random_initialization(d.table.rows, G, 2, rng);
    FitConfig cfg;
    const FitResult em = fit_em_from(d.table.rows, init, cfg);
    const FitResult pem = fit_pem_from(d.table.rows, init, cfg);
    expect_monotone(pem.loglik_trace, 1e-8);
    EXPECT_LE(std::abs(pem.loglik - em.loglik), 1e-4 * std::abs(em.loglik));
    EXPECT_GE(aligned_label_agreement(em.map_labels, pem.map_labels, G), 0.99);
    for (std::size_t t = 0; t + 1 < pem.iteration_work.size(); ++t) {
      EXPECT_EQ(pem.iteration_work[t].counters.covariance_inversions, G);
      EXPECT_EQ(pem.iteration_work[t].counters.block_inversions, 0);
    }
  }
}

TEST(FitPem, MoreSweepsStillConverge) {
  const SyntheticData d = generate_bib(SyntheticSpec::rating_study(2, 2, 5, 6));
  FitConfig cfg;
  cfg.sweeps_per_iter = 3;
  cfg.seed = 4;
  const FitResult r = fit_pem(d.table.rows, 2, 2, cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.total_sweeps, 3LL * 2 * 369 * r.iterations);
  expect_monotone(r.loglik_trace, 1e-8);
}

TEST(Fit, RejectsImpossibleProblems) {
  const SyntheticData d = generate_bib(SyntheticSpec::rating_study(1, 1, 5, 6, 20));
  FitConfig cfg;
  EXPECT_THROW(fit_em(d.table.rows, 25, 1, cfg), InvalidArgument);
  EXPECT_THROW(fit_pem(d.table.rows, 2, 12, cfg), InvalidArgument);
  EXPECT_THROW(fit_pem(Dataset{}, 1, 1, cfg), InvalidArgument);
}

TEST(Fit, MaxIterStopsWithoutConvergence) {
  const SyntheticData d = generate_bib(SyntheticSpec::rating_study(2, 2, 5, 6));
  FitConfig cfg;
  cfg.max_iter = 3;
  const FitResult r = fit_pem(d.table.rows, 2, 2, cfg);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 3);
  EXPECT_EQ(r.loglik_trace.size(), 3u);
}

TEST(Fit, DeterministicUnderSeed) {
  const SyntheticData d = generate_bib(SyntheticSpec::rating_study(2, 2, 5, 6));
  FitConfig cfg;
  cfg.seed = 8;
  cfg.restarts = 2;
  const FitResult a = fit_best(Algorithm::kPem, d.table.rows, 2, 2, cfg);
  const FitResult b = fit_best(Algorithm::kPem, d.table.rows, 2, 2, cfg);
  EXPECT_EQ(a.loglik_trace, b.loglik_trace);
  EXPECT_EQ(a.map_labels, b.map_labels);
}

TEST(Fit, ShortRunsContinueTheBestStart) {
  const SyntheticData d = generate_bib(SyntheticSpec::rating_study(3, 2, 5, 6));
  FitConfig cfg;
  cfg.seed = 8;
  cfg.restarts = 3;
  cfg.short_run_iterations = 10;
  const FitResult r = fit_best(Algorithm::kPem, d.table.rows, 3, 2, cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_GT(r.iterations, 10);
}

TEST(AlignedLabelAgreement, MatchesBruteForcePermutations) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<Index> u(0, 3);
  std::vector<Index> a(60);
  std::vector<Index> b(60);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = u(rng);
    b[i] = (a[i] + 1) % 4;
    if (i % 7 == 0) b[i] = u(rng);
  }
  EXPECT_DOUBLE_EQ(aligned_label_agreement(a, b, 4), oracle::best_permutation_agreement(a, b, 4));
  EXPECT_DOUBLE_EQ(aligned_label_agreement(a, a, 4), 1.0);
}

TEST(BicOfFit, UsesParameterCount) {
  const SyntheticData d = generate_bib(SyntheticSpec::rating_study(1, 1, 5, 6, 100));
  FitConfig cfg;
  const FitResult r = fit_em(d.table.rows, 1, 1, cfg);
  EXPECT_DOUBLE_EQ(bic(r, 100), 2.0 * r.loglik - 36.0 * std::log(100.0));
}

TEST(ModelSearch, SingleCellIsFitBest) {
  const SyntheticData d = generate_bib(SyntheticSpec::rating_study(2, 1, 5, 6, 150));
  FitConfig cfg;
  cfg.seed = 5;
  cfg.restarts = 2;
  const SearchResult s = model_search(Algorithm::kPem, d.table.rows, {2}, {1}, cfg);
  ASSERT_TRUE(s.selected.has_value());
  const FitResult direct = fit_best(Algorithm::kPem, d.table.rows, 2, 1, cfg);
  EXPECT_EQ(s.selected_cell()->loglik, direct.loglik);
  EXPECT_EQ(s.selected_cell()->bic, bic(direct, 150));
}

TEST(ModelSearch, FailedCellsAreReportedAndSkipped) {
  const SyntheticData d = generate_bib(SyntheticSpec::rating_study(2, 1, 5, 6, 40));
  FitConfig cfg;
  cfg.restarts = 2;
  cfg.max_iter = 300;
  const SearchResult s =
      model_search(Algorithm::kPem, d.table.rows, {1, 2, 45}, {1, 13}, cfg);
  ASSERT_EQ(s.cells.size(), 6u);
  int failed = 0;
  for (const auto& c : s.cells) {
    if (!c.ok) {
      ++failed;
      EXPECT_FALSE(c.error.empty());
    }
  }
  EXPECT_GE(failed, 4);  // G = 45 > n and q = 13 >= p
  ASSERT_TRUE(s.selected.has_value());
  EXPECT_TRUE(s.selected_cell()->ok);
}

TEST(ModelSearch, ConventionsSelectTheSameCell) {
  EXPECT_EQ(bic_convention_from_string("minimize-negated"), BicConvention::kMinimizeNegated);
  EXPECT_DOUBLE_EQ(reported_bic(-10.0, BicConvention::kMinimizeNegated), 10.0);
  EXPECT_DOUBLE_EQ(reported_bic(-10.0, BicConvention::kMaximize), -10.0);
  EXPECT_THROW(bic_convention_from_string("aic"), InvalidArgument);
}

}  // namespace
