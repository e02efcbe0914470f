#pragma once

#include "pemix/fit.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pemix {

/// How BIC values are reported. Both conventions select the same model.
enum class BicConvention {
  /// BIC = 2l - m ln n, the largest value wins.
  kMaximize,
  /// Reported value is m ln n - 2l, the smallest value wins.
  kMinimizeNegated,
};

std::string to_string(BicConvention c);
BicConvention bic_convention_from_string(const std::string& s);

/// Reported value under a convention (identity for kMaximize).
double reported_bic(double bic, BicConvention c);

struct SearchCell {
  Index G = 0;
  Index q = 0;
  bool ok = false;
  std::string error;
  std::optional<FitResult> fit;  ///< best start of this cell when ok
  double loglik = 0.0;
  double bic = 0.0;  ///< 2l - m ln n
  std::int64_t num_params = 0;
};

struct SearchResult {
  std::vector<SearchCell> cells;  ///< G-major order
  std::optional<std::size_t> selected;
  BicConvention convention = BicConvention::kMaximize;

  const SearchCell* selected_cell() const { return selected ? &cells[*selected] : nullptr; }
};

/// Fits every (G, q) pair with config.restarts random starts, keeps the best
/// start per pair and selects the cell with the largest 2l - m ln n. A cell
/// whose starts all fail is reported as failed; the grid continues.
SearchResult model_search(Algorithm algorithm, const Dataset& data, const std::vector<Index>& G_range,
                          const std::vector<Index>& q_range, const FitConfig& config,
                          BicConvention convention = BicConvention::kMaximize);

}  // namespace pemix
