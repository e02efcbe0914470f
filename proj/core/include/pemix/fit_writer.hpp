#pragma once

// Fit artifacts written under one output directory:
//   <prefix>fit_summary.txt    key/value metadata plus parameter sections
//   <prefix>assignments.csv    consumer, MAP label, responsibilities, factor scores
//   <prefix>cluster_means.csv  product x cluster mean liking
//   <prefix>trace.csv          iteration, loglik
//   bic_table.csv, search_summary.txt  (model search)

#include "pemix/model_search.hpp"
#include "pemix/rating_table.hpp"
#include "pemix/structured_text.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace pemix {

struct FitWriteOptions {
  std::string prefix;
  BicConvention convention = BicConvention::kMaximize;
  /// Extra key/value lines appended to the summary.
  std::vector<std::pair<std::string, std::string>> extra;
};

/// E[u_i | y_i, g] = beta_g (y_hat_ig - mu_g) under each row's MAP component (n x q).
Matrix map_factor_scores(const FitResult& result);

StructuredText fit_summary(const FitResult& result, Index n, const FitWriteOptions& options = {});
std::string assignments_csv(const FitResult& result, const RatingTable& table);
std::string cluster_means_csv(const FitResult& result, const RatingTable& table);
std::string trace_csv(const FitResult& result);

/// Writes the four fit files atomically and returns their paths.
std::vector<std::filesystem::path> write_fit(const FitResult& result, const RatingTable& table,
                                             const std::filesystem::path& out_dir,
                                             const FitWriteOptions& options = {});

std::string bic_table_csv(const SearchResult& search);
StructuredText search_summary(const SearchResult& search, Index n);

/// bic_table.csv and search_summary.txt, plus the fit files of the selected
/// cell when there is one.
std::vector<std::filesystem::path> write_search(const SearchResult& search, const RatingTable& table,
                                                const std::filesystem::path& out_dir);

}  // namespace pemix
