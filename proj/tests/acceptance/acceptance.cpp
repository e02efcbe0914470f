// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset; exits non-zero if any selected criterion fails.

#include "cli/commands.hpp"
#include "pemix/fit.hpp"
#include "pemix/gaussian_missing.hpp"
#include "pemix/linalg.hpp"
#include "pemix/model_search.hpp"
#include "pemix/rating_table.hpp"
#include "pemix/synthetic.hpp"

#include "support/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace pemix;
namespace fs = std::filesystem;

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Vector random_vector(Index p, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector v(p);
  for (Index j = 0; j < p; ++j) v(j) = nd(rng);
  return v;
}

GaussianParams params_of(const Vector& mu, const Matrix& sigma) {
  return GaussianParams{mu, CovPrecisionPair::from_covariance(SymMatrix(sigma))};
}

// 1. Conditional blocks read off the precision match the covariance-side
// formulas, and every principal-submatrix inverse matches direct inversion.
Verdict schur_precision_identities() {
  constexpr double kTol = 1e-8;
  constexpr double kMaxSeconds = 10.0;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<Index> dim(2, 16);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const Index p = dim(rng);
    const Matrix sigma = oracle::random_spd(p, rng);
    const auto pair = CovPrecisionPair::from_covariance(SymMatrix(sigma));
    const Index l = std::uniform_int_distribution<Index>(1, p - 1)(rng);
    const auto mask = oracle::random_mask(p, l, rng);
    const IndexSplit split = IndexSplit::from_mask(mask);
    const oracle::Conditional c = oracle::conditional(Vector::Zero(p), sigma, mask, Vector::Zero(p - l));
    const ConditionalBlocks b = schur_via_precision(pair, split);
    worst = std::max(worst, oracle::rel_diff(b.cond_cov.matrix(), c.cov));
    const Matrix regression = oracle::multiply(oracle::slice(sigma, split.missing(), split.observed()),
                                               oracle::inverse(oracle::slice(sigma, split.observed(), split.observed())));
    worst = std::max(worst, oracle::rel_diff(b.regression, regression));
    for (Index j = 0; j < p && p > 1; ++j) {
      const SubmatrixInverse inv = submatrix_inverse_via_precision(pair, j);
      worst = std::max(worst, oracle::rel_diff(inv.inverse.matrix(),
                                               oracle::inverse(oracle::delete_row_col(sigma, j))));
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= kTol && secs < kMaxSeconds,
          "max rel err " + fmt("%.2e", worst) + " (tol 1e-8), " + fmt("%.2f", secs) + " s"};
}

// 2. Quadratic-form decomposition and the matrix minimization property.
Verdict quadratic_and_minimization() {
  constexpr double kTol = 1e-8;
  constexpr double kMaxSeconds = 30.0;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<Index> dim(2, 10);
  double worst_identity = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Index p = dim(rng);
    const Index k = std::uniform_int_distribution<Index>(1, p - 1)(rng);
    const Matrix s = oracle::random_spd(p, rng);
    const Vector y = random_vector(p, rng);
    const Matrix s11 = s.topLeftCorner(k, k);
    const Matrix s21 = s.bottomLeftCorner(p - k, k);
    const Matrix s22 = s.bottomRightCorner(p - k, p - k);
    const Vector y1 = y.head(k);
    const Vector y2 = y.tail(p - k);
    const Matrix s11_inv = oracle::inverse(s11);
    const Matrix s22_1 = s22 - oracle::multiply(oracle::multiply(s21, s11_inv), s21.transpose());
    const Vector r = y2 - oracle::multiply(oracle::multiply(s21, s11_inv), y1);
    const double lhs = (y.transpose() * oracle::inverse(s) * y)(0, 0);
    const double rhs = (y1.transpose() * s11_inv * y1)(0, 0) +
                       (r.transpose() * oracle::inverse(s22_1) * r)(0, 0);
    worst_identity = std::max(worst_identity, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
  }
  int violations = 0;
  double worst_min = 0.0;
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    const Index p = dim(rng);
    const Index k = std::uniform_int_distribution<Index>(1, p - 1)(rng);
    const Matrix s = oracle::random_spd(p, rng);
    const Matrix s12 = s.topRightCorner(k, p - k);
    const Matrix s22_inv = oracle::inverse(s.bottomRightCorner(p - k, p - k));
    const Matrix schur = s.topLeftCorner(k, k) - oracle::multiply(oracle::multiply(s12, s22_inv), s12.transpose());
    const double h_min = oracle::h_objective(s, k, schur);
    const double bound = oracle::multiply(oracle::multiply(s22_inv, s12.transpose()), s12).trace();
    worst_min = std::max(worst_min, std::abs(h_min - bound) / std::max(1.0, std::abs(bound)));
    for (int c = 0; c < 1000; ++c) {
      Matrix delta(k, k);
      for (Index a = 0; a < k; ++a) {
        for (Index b = 0; b <= a; ++b) delta(a, b) = delta(b, a) = nd(rng) * std::pow(10.0, -(c % 6));
      }
      if (oracle::h_objective(s, k, schur + delta) < h_min - 1e-12 * std::max(1.0, h_min)) ++violations;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst_identity <= kTol && worst_min <= kTol && violations == 0 && secs < kMaxSeconds,
          "identity err " + fmt("%.2e", worst_identity) + ", minimum err " + fmt("%.2e", worst_min) +
              ", " + std::to_string(violations) + " of 20000 candidates below the Schur value, " +
              fmt("%.2f", secs) + " s"};
}

// 3. Iterated sweeps reach the exact conditional with non-increasing KL.
Verdict sweep_equivalence() {
  constexpr double kTol = 1e-8;
  constexpr double kKlZero = 1e-10;
  constexpr double kKlSlack = 1e-12;
  constexpr int kMaxSweeps = 2000;
  constexpr double kMaxSeconds = 60.0;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(303);
  double worst = 0.0;
  double worst_kl = 0.0;
  int increases = 0;
  int max_used = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto params = params_of(random_vector(12, rng), oracle::random_spd(12, rng));
    const IncompleteObservation obs(random_vector(12, rng), oracle::random_mask(12, 6, rng));
    const ImputationState exact = exact_conditional(params, obs);
    ImputationState s = ImputationState::initial(params, obs);
    double prev = kl_missing(s, params, obs);
    int k = 0;
    for (; k < kMaxSweeps; ++k) {
      s = sweep_mean(s, params, obs);
      const double after_mean = kl_missing(s, params, obs);
      s = sweep_cov(s, params, obs);
      const double after_cov = kl_missing(s, params, obs);
      const double slack = kKlSlack * std::max(1.0, prev);
      if (after_mean > prev + slack) ++increases;
      if (after_cov > after_mean + slack) ++increases;
      prev = after_cov;
      if (oracle::rel_diff(s.y_hat, exact.y_hat) < 1e-12 && oracle::rel_diff(s.Y_hat, exact.Y_hat) < 1e-12) {
        break;
      }
    }
    max_used = std::max(max_used, k + 1);
    worst = std::max({worst, oracle::rel_diff(s.y_hat, exact.y_hat), oracle::rel_diff(s.Y_hat, exact.Y_hat)});
    worst_kl = std::max(worst_kl, std::abs(kl_missing(s, params, obs)));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= kTol && worst_kl <= kKlZero && increases == 0 && secs < kMaxSeconds,
          "max rel err " + fmt("%.2e", worst) + ", final KL " + fmt("%.2e", worst_kl) + ", " +
              std::to_string(increases) + " KL increases, up to " + std::to_string(max_used) +
              " sweeps, " + fmt("%.2f", secs) + " s"};
}

// Largest one-step decrease of a trace.
double worst_drop(const std::vector<double>& trace) {
  double worst = 0.0;
  for (std::size_t t = 1; t < trace.size(); ++t) worst = std::max(worst, trace[t - 1] - trace[t]);
  return worst;
}

// 4. EM traces never decrease.
Verdict em_monotone() {
  constexpr double kDrop = 1e-8;
  double worst = 0.0;
  int scenarios = 0;
  for (int s = 0; s < 20; ++s) {
    const Index G = 1 + s % 3;
    const Index q = 1 + (s / 3) % 2;
    const Index k = s < 10 ? 12 : 6;
    const SyntheticData d = generate_bib(SyntheticSpec::rating_study(G, q, 400 + s, 500 + s, 369, 12, k));
    FitConfig cfg;
    cfg.seed = 600 + static_cast<std::uint64_t>(s);
    const FitResult r = fit_em(d.table.rows, G, q, cfg);
    worst = std::max(worst, worst_drop(r.loglik_trace));
    ++scenarios;
  }
  return {worst <= kDrop, std::to_string(scenarios) + " scenarios (10 complete, 10 BIB), largest drop " +
                              fmt("%.2e", worst) + " (tol 1e-8)"};
}

// 5. PEM is monotone, ends at EM's log-likelihood and classifies the same way.
Verdict pem_agreement() {
  constexpr double kDrop = 1e-8;
  constexpr double kGap = 1e-4;
  constexpr double kAgreement = 0.99;
  constexpr double kMaxSeconds = 300.0;
  const auto t0 = std::chrono::steady_clock::now();
  double worst_pem_drop = 0.0;
  double worst_gap = 0.0;
  double worst_agreement = 1.0;
  for (Index G : {1, 2, 3}) {
    for (int seed = 0; seed < 5; ++seed) {
      const SyntheticData d =
          generate_bib(SyntheticSpec::rating_study(G, 2, 700 + G, 800 + static_cast<std::uint64_t>(seed)));
      FitConfig cfg;
      std::mt19937_64 rng(900 + static_cast<std::uint64_t>(seed));
      const Initialization init = random_initialization(d.table.rows, G, 2, rng);
      const FitResult em = fit_em_from(d.table.rows, init, cfg);
      const FitResult pem = fit_pem_from(d.table.rows, init, cfg);
      worst_pem_drop = std::max(worst_pem_drop, worst_drop(pem.loglik_trace));
      worst_gap = std::max(worst_gap, std::abs(pem.loglik - em.loglik) / std::abs(em.loglik));
      worst_agreement = std::min(worst_agreement, aligned_label_agreement(em.map_labels, pem.map_labels, G));
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst_pem_drop <= kDrop && worst_gap <= kGap && worst_agreement >= kAgreement && secs < kMaxSeconds,
          "largest PEM drop " + fmt("%.2e", worst_pem_drop) + ", max rel gap " + fmt("%.2e", worst_gap) +
              " (tol 1e-4), min MAP agreement " + fmt("%.4f", worst_agreement) + ", " + fmt("%.1f", secs) + " s"};
}

// 6. Per outer iteration: G covariance inversions for PEM, G x patterns block
// inversions for EM.
Verdict inversion_counts() {
  constexpr Index G = 3;
  const SyntheticData d = generate_bib(SyntheticSpec::rating_study(G, 2, 11, 12));
  std::set<std::vector<bool>> patterns;
  for (const auto& r : d.table.rows) patterns.insert(r.mask());
  const auto expected_patterns = static_cast<std::int64_t>(patterns.size());
  FitConfig cfg;
  cfg.max_iter = 50;
  std::mt19937_64 rng(13);
  const Initialization init = random_initialization(d.table.rows, G, 2, rng);
  const FitResult em = fit_em_from(d.table.rows, init, cfg);
  const FitResult pem = fit_pem_from(d.table.rows, init, cfg);
  bool ok = em.num_patterns == expected_patterns && pem.num_patterns == expected_patterns;
  for (const auto& w : em.iteration_work) ok = ok && w.counters.block_inversions == G * expected_patterns;
  // The last iteration only checks convergence; every earlier one ends in an M-step.
  for (std::size_t t = 0; t + 1 < pem.iteration_work.size(); ++t) {
    ok = ok && pem.iteration_work[t].counters.covariance_inversions == G &&
         pem.iteration_work[t].counters.block_inversions == 0;
  }
  ok = ok && !pem.iteration_work.empty() && pem.iteration_work.back().counters.block_inversions == 0;
  return {ok, std::to_string(expected_patterns) + " distinct patterns; EM " +
                  std::to_string(em.iteration_work.front().counters.block_inversions) +
                  " block inversions per iteration, PEM " +
                  std::to_string(pem.iteration_work.front().counters.covariance_inversions) +
                  " covariance inversions and 0 block inversions per iteration"};
}

// 7. BIC model search recovers (3, 2) or a neighbouring cell.
Verdict model_selection() {
  constexpr int kDatasets = 20;
  constexpr int kRequired = 16;
  constexpr double kMaxSeconds = 1800.0;
  const auto t0 = std::chrono::steady_clock::now();
  int hits = 0;
  std::string picks;
  for (int d = 0; d < kDatasets; ++d) {
    const SyntheticData data = generate_bib(SyntheticSpec::rating_study(3, 2, 2024, 100 + static_cast<std::uint64_t>(d)));
    FitConfig cfg;
    cfg.seed = 77 + static_cast<std::uint64_t>(d);
    cfg.restarts = 5;
    cfg.short_run_iterations = 20;
    const SearchResult res = model_search(Algorithm::kPem, data.table.rows, {1, 2, 3, 4, 5, 6}, {1, 2, 3}, cfg);
    const SearchCell* s = res.selected_cell();
    if (s != nullptr) {
      hits += std::abs(s->G - 3) + std::abs(s->q - 2) <= 1;
      picks += " (" + std::to_string(s->G) + "," + std::to_string(s->q) + ")";
    } else {
      picks += " none";
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {hits >= kRequired && secs < kMaxSeconds,
          std::to_string(hits) + "/" + std::to_string(kDatasets) + " at or next to (3,2), need " +
              std::to_string(kRequired) + ";" + picks + "; " + fmt("%.0f", secs) + " s"};
}

// 8. One EM iteration with G = 1 on complete data gives the sample moments.
Verdict single_component_closed_form() {
  constexpr double kTol = 1e-10;
  std::mt19937_64 rng(808);
  const Index n = 200;
  const Index p = 5;
  Dataset data;
  Matrix y(n, p);
  const Matrix mix = oracle::random_spd(p, rng);
  for (Index i = 0; i < n; ++i) {
    y.row(i) = (mix * random_vector(p, rng)).transpose();
    data.push_back(IncompleteObservation::complete(y.row(i).transpose()));
  }
  Vector mean = Vector::Zero(p);
  for (Index i = 0; i < n; ++i) mean += y.row(i).transpose();
  mean /= static_cast<double>(n);
  Matrix cov = Matrix::Zero(p, p);
  for (Index i = 0; i < n; ++i) {
    for (Index a = 0; a < p; ++a) {
      for (Index b = 0; b < p; ++b) cov(a, b) += (y(i, a) - mean(a)) * (y(i, b) - mean(b));
    }
  }
  cov /= static_cast<double>(n);

  FitConfig cfg;
  cfg.max_iter = 2;  // one E-step and M-step, then the check that stops the run
  cfg.tolerance = 0.0;
  const FitResult r = fit_em(data, 1, 2, cfg);
  const ComponentStats stats = weighted_stats(data, r.states, Responsibilities{Matrix::Ones(n, 1)}, 1.0);
  const double mean_err = std::max(oracle::rel_diff(stats.mean[0], mean), oracle::rel_diff(r.params.mu()[0], mean));
  const double cov_err = oracle::rel_diff(stats.scatter[0], cov);
  const double pi_err = std::abs(r.params.pi()(0) - 1.0);
  return {mean_err <= kTol && cov_err <= kTol && pi_err <= kTol,
          "mean err " + fmt("%.2e", mean_err) + ", divisor-n covariance err " + fmt("%.2e", cov_err) +
              " (tol 1e-10)"};
}

// 9. The six-row bread table fixture.
Verdict ingestion_fixture() {
  const char* csv =
      "Consumer,A,B,C,D,E,F,G,H,I,J,K,L\n"
      "1,9,,8,6,,,,9,,,4,8\n"
      "2,3,,8,,7,,8,7,8,,,\n"
      "3,,8,6,7,,,,,6,9,7,\n"
      "4,,,5,4,,6,,4,3,6,,\n"
      "5,,,7,7,,,8,7,6,,8,\n"
      "6,,,,8,,,3,4,8,,7,7\n";
  // Columns A..L; 0 marks a blank cell.
  const int expected[6][12] = {
      {9, 0, 8, 6, 0, 0, 0, 9, 0, 0, 4, 8}, {3, 0, 8, 0, 7, 0, 8, 7, 8, 0, 0, 0},
      {0, 8, 6, 7, 0, 0, 0, 0, 6, 9, 7, 0}, {0, 0, 5, 4, 0, 6, 0, 4, 3, 6, 0, 0},
      {0, 0, 7, 7, 0, 0, 8, 7, 6, 0, 8, 0}, {0, 0, 0, 8, 0, 0, 3, 4, 8, 0, 7, 7}};
  ParseOptions opts;
  opts.scale_check = true;
  std::istringstream is(csv);
  const RatingTable t = parse_table(is, opts);
  int mismatches = 0;
  if (t.n() != 6 || t.p() != 12) return {false, "wrong table shape"};
  for (Index i = 0; i < 6; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    if (row.num_observed() != 6) ++mismatches;
    for (Index j = 0; j < 12; ++j) {
      const int e = expected[i][j];
      if ((e != 0) != row.is_observed(j)) {
        ++mismatches;
      } else if (e != 0 && row.value(j) != e) {
        ++mismatches;
      }
    }
  }
  return {mismatches == 0, "6 rows x 12 products, " + std::to_string(mismatches) + " mismatched cells or masks"};
}

std::vector<std::pair<std::string, std::string>> files_under(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream is(e.path(), std::ios::binary);
    out.emplace_back(fs::relative(e.path(), dir).string(), std::string(std::istreambuf_iterator<char>(is), {}));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// 10. Every command writes byte-identical artifacts on a repeated run.
Verdict cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "pemix_acceptance_determinism";
  fs::remove_all(root);
  std::ostringstream sink;
  auto run = [&](std::vector<std::string> args) { return cli::run(args, sink, sink); };
  if (run({"generate", "-g", "3", "-q", "2", "--seed", "31", "-o", (root / "data").string()}) != cli::kOk) {
    return {false, "generate failed"};
  }
  const std::string input = (root / "data" / "ratings.csv").string();
  const std::vector<std::vector<std::string>> commands = {
      {"generate", "-g", "3", "-q", "2", "--seed", "31"},
      {"fit", "-i", input, "-g", "3", "-q", "2", "--seed", "5", "--restarts", "3"},
      {"fit", "-i", input, "-g", "2", "-q", "1", "-a", "em", "--seed", "5", "--restarts", "3"},
      {"search", "-i", input, "-g", "1-3", "-q", "1-2", "--seed", "5", "--restarts", "2"},
      {"compare", "-i", input, "-g", "3", "-q", "2", "--seed", "5"}};
  int differing = 0;
  int files = 0;
  std::string failed;
  for (std::size_t c = 0; c < commands.size(); ++c) {
    std::vector<std::vector<std::pair<std::string, std::string>>> outputs;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = root / ("run" + std::to_string(c) + "_" + std::to_string(rep));
      auto args = commands[c];
      args.push_back("-o");
      args.push_back(out.string());
      const int code = run(args);
      if (code != cli::kOk) failed += " " + commands[c][0] + "(exit " + std::to_string(code) + ")";
      outputs.push_back(files_under(out));
    }
    files += static_cast<int>(outputs[0].size());
    if (outputs[0] != outputs[1]) ++differing;
  }
  fs::remove_all(root);
  return {differing == 0 && failed.empty() && files > 0,
          std::to_string(commands.size()) + " command lines, " + std::to_string(files) + " artifacts, " +
              std::to_string(differing) + " differing" + (failed.empty() ? "" : "; failures:" + failed)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"Schur and precision identities", schur_precision_identities},
      {"quadratic decomposition and Schur minimizer", quadratic_and_minimization},
      {"coordinate sweeps reach the exact conditional", sweep_equivalence},
      {"EM monotonicity", em_monotone},
      {"PEM monotonicity and agreement with EM", pem_agreement},
      {"inversion counts", inversion_counts},
      {"model selection recovery", model_selection},
      {"single-component closed form", single_component_closed_form},
      {"bread table ingestion", ingestion_fixture},
      {"CLI determinism", cli_determinism},
  };
  std::set<int> selected;
  for (int a = 1; a < argc; ++a) selected.insert(std::atoi(argv[a]));
  int failures = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    const int id = static_cast<int>(c) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Verdict v;
    try {
      v = criteria[c].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("criterion %d %s: %s (%s)\n", id, v.pass ? "PASS" : "FAIL", criteria[c].first.c_str(),
                v.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
