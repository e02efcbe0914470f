#include "pemix/model_search.hpp"

#include "pemix/errors.hpp"

namespace pemix {

std::string to_string(BicConvention c) {
  return c == BicConvention::kMaximize ? "maximize" : "minimize-negated";
}

BicConvention bic_convention_from_string(const std::string& s) {
  if (s == "maximize") return BicConvention::kMaximize;
  if (s == "minimize-negated") return BicConvention::kMinimizeNegated;
  throw InvalidArgument("unknown BIC convention '" + s + "'");
}

double reported_bic(double bic, BicConvention c) {
  return c == BicConvention::kMaximize ? bic : -bic;
}

SearchResult model_search(Algorithm algorithm, const Dataset& data, const std::vector<Index>& G_range,
                          const std::vector<Index>& q_range, const FitConfig& config,
                          BicConvention convention) {
  if (G_range.empty() || q_range.empty()) {
    throw InvalidArgument("model_search: G and q ranges must be non-empty");
  }
  SearchResult out;
  out.convention = convention;
  const Index n = static_cast<Index>(data.size());
  for (Index G : G_range) {
    for (Index q : q_range) {
      SearchCell cell;
      cell.G = G;
      cell.q = q;
      try {
        // Every cell starts from config.seed, so a one-cell search is the same
        // computation as fit_best.
        FitResult fit = fit_best(algorithm, data, G, q, config);
        cell.loglik = fit.loglik;
        cell.bic = bic(fit, n);
        cell.num_params = free_parameter_count(G, fit.params.p(), q);
        cell.fit = std::move(fit);
        cell.ok = true;
      } catch (const Error& e) {
        cell.error = e.what();
      }
      out.cells.push_back(std::move(cell));
      const SearchCell& c = out.cells.back();
      if (c.ok && (!out.selected || c.bic > out.cells[*out.selected].bic)) {
        out.selected = out.cells.size() - 1;
      }
    }
  }
  return out;
}

}  // namespace pemix
