#pragma once

// Synthetic rating tables with known truth: a common-factor mixture sampled
// row by row, then masked so each consumer sees k of the p products under a
// balanced block assignment.

#include "pemix/rating_table.hpp"
#include "pemix/structured_text.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace pemix {

struct SyntheticSpec {
  Index n = 0;
  Index p = 0;
  Index q = 0;
  Index G = 0;
  Index observed_per_row = 0;  ///< block size k
  std::uint64_t seed = 0;
  Vector pi;
  std::vector<Vector> mu;
  Matrix lambda;  ///< p x q
  std::vector<Vector> psi;

  /// Throws InvalidArgument unless k <= p and the truth is a valid MixtureParams.
  void validate() const;

  /// Truth on a 9-point liking scale with well separated segments. The truth
  /// itself is drawn from `truth_seed`; `seed` drives the sampling.
  static SyntheticSpec rating_study(Index G, Index q, std::uint64_t truth_seed, std::uint64_t seed,
                                    Index n = 369, Index p = 12, Index k = 6);
};

struct TruthRecord {
  SyntheticSpec spec;
  std::vector<Index> labels;           ///< generating component per row
  Matrix factor_scores;                ///< n x q latent u_i
  std::vector<Index> product_counts;   ///< observations per product
  /// True when every product is observed exactly n k / p times.
  bool exact_balance = false;
  /// True when the balanced assignment could not be used and uniform random
  /// k-subsets were drawn instead.
  bool balance_fallback = false;
};

struct SyntheticData {
  RatingTable table;
  TruthRecord truth;
};

/// Deterministic in spec.seed. Product labels are A, B, ... (then P13, ...),
/// consumer ids 1..n.
SyntheticData generate_bib(const SyntheticSpec& spec);

StructuredText truth_to_text(const TruthRecord& truth);
TruthRecord truth_from_text(const StructuredText& doc);

/// k-of-p masks, one per row, with per-product counts differing by at most one.
std::vector<std::vector<bool>> balanced_block_masks(Index n, Index p, Index k, std::uint64_t seed);

}  // namespace pemix
