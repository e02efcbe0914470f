#include "pemix/fit_writer.hpp"

#include "pemix/errors.hpp"

#include <sstream>

namespace pemix {

namespace {

constexpr const char* kFactorScoreEstimator =
    "E[u | y, g] = beta_g (y_hat - mu_g) with beta_g = Lambda' Sigma_g^-1, g = MAP component";

void set_counters(StructuredText& doc, const std::string& prefix, const WorkCounters& c) {
  doc.set(prefix + "covariance_inversions", c.covariance_inversions);
  doc.set(prefix + "woodbury_solves", c.woodbury_solves);
  doc.set(prefix + "block_inversions", c.block_inversions);
  doc.set(prefix + "rank_one_fallbacks", c.rank_one_fallbacks);
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

}  // namespace

Matrix map_factor_scores(const FitResult& result) {
  const MixtureParams& params = result.params;
  const Index n = static_cast<Index>(result.map_labels.size());
  Matrix scores(n, params.q());
  std::vector<Matrix> beta;
  for (Index g = 0; g < params.G(); ++g) beta.push_back(params.factor_regression(g));
  for (Index i = 0; i < n; ++i) {
    const Index g = result.map_labels[static_cast<std::size_t>(i)];
    const Vector d = result.states.at(i, g).y_hat - params.mu()[static_cast<std::size_t>(g)];
    scores.row(i) = (beta[static_cast<std::size_t>(g)] * d).transpose();
  }
  return scores;
}

StructuredText fit_summary(const FitResult& result, Index n, const FitWriteOptions& options) {
  const MixtureParams& params = result.params;
  StructuredText doc;
  doc.set("algorithm", to_string(result.algorithm));
  doc.set("n", static_cast<std::int64_t>(n));
  doc.set("p", static_cast<std::int64_t>(params.p()));
  doc.set("G", static_cast<std::int64_t>(params.G()));
  doc.set("q", static_cast<std::int64_t>(params.q()));
  doc.set("loglik", result.loglik);
  doc.set("free_parameters", free_parameter_count(params.G(), params.p(), params.q()));
  doc.set("bic_convention", to_string(options.convention));
  doc.set("bic", reported_bic(result.bic, options.convention));
  doc.set("converged", result.converged);
  doc.set("iterations", result.iterations);
  doc.set("restarts_used", result.restarts_used);
  doc.set("sweeps_per_iter", result.sweeps_per_iter);
  doc.set("total_sweeps", result.total_sweeps);
  doc.set("missingness_patterns", static_cast<std::int64_t>(result.num_patterns));
  set_counters(doc, "setup_", result.setup_work);
  WorkCounters loop;
  for (const auto& w : result.iteration_work) loop += w.counters;
  set_counters(doc, "iterations_", loop);
  set_counters(doc, "final_pass_", result.final_pass_work);
  doc.set("factor_score_estimator", std::string(kFactorScoreEstimator));
  for (const auto& [k, v] : options.extra) doc.set(k, v);

  doc.add_matrix("pi", params.pi().transpose(), "g");
  Matrix mu(params.G(), params.p());
  Matrix psi(params.G(), params.p());
  for (Index g = 0; g < params.G(); ++g) {
    mu.row(g) = params.mu()[static_cast<std::size_t>(g)].transpose();
    psi.row(g) = params.psi()[static_cast<std::size_t>(g)].transpose();
  }
  doc.add_matrix("mu", mu, "p");
  doc.add_matrix("psi", psi, "p");
  if (params.q() > 0) doc.add_matrix("lambda", params.lambda(), "f");

  TextTable work{"iteration_work",
                 {"iteration", "covariance_inversions", "woodbury_solves", "block_inversions",
                  "rank_one_fallbacks"},
                 {}};
  for (std::size_t t = 0; t < result.iteration_work.size(); ++t) {
    const WorkCounters& c = result.iteration_work[t].counters;
    work.rows.push_back({std::to_string(t + 1), std::to_string(c.covariance_inversions),
                         std::to_string(c.woodbury_solves), std::to_string(c.block_inversions),
                         std::to_string(c.rank_one_fallbacks)});
  }
  doc.add_table(std::move(work));
  return doc;
}

std::string assignments_csv(const FitResult& result, const RatingTable& table) {
  const Index G = result.params.G();
  const Index q = result.params.q();
  const Matrix scores = map_factor_scores(result);
  std::ostringstream os;
  os << "consumer,label";
  for (Index g = 0; g < G; ++g) os << ",w" << g + 1;
  for (Index c = 0; c < q; ++c) os << ",u" << c + 1;
  os << '\n';
  for (Index i = 0; i < result.resp.n(); ++i) {
    const auto ii = static_cast<std::size_t>(i);
    os << (ii < table.consumer_ids.size() ? table.consumer_ids[ii] : std::to_string(i + 1)) << ','
       << result.map_labels[ii] + 1;
    for (Index g = 0; g < G; ++g) os << ',' << format_double(result.resp.w(i, g));
    for (Index c = 0; c < q; ++c) os << ',' << format_double(scores(i, c));
    os << '\n';
  }
  return os.str();
}

std::string cluster_means_csv(const FitResult& result, const RatingTable& table) {
  const MixtureParams& params = result.params;
  std::ostringstream os;
  os << "product";
  for (Index g = 0; g < params.G(); ++g) os << ",cluster" << g + 1;
  os << '\n';
  for (Index j = 0; j < params.p(); ++j) {
    const auto jj = static_cast<std::size_t>(j);
    os << (jj < table.product_names.size() ? table.product_names[jj] : std::to_string(j + 1));
    for (Index g = 0; g < params.G(); ++g) {
      os << ',' << format_double(params.mu()[static_cast<std::size_t>(g)](j));
    }
    os << '\n';
  }
  return os.str();
}

std::string trace_csv(const FitResult& result) {
  std::ostringstream os;
  os << "iteration,loglik\n";
  for (std::size_t t = 0; t < result.loglik_trace.size(); ++t) {
    os << t + 1 << ',' << format_double(result.loglik_trace[t]) << '\n';
  }
  return os.str();
}

std::vector<std::filesystem::path> write_fit(const FitResult& result, const RatingTable& table,
                                             const std::filesystem::path& out_dir,
                                             const FitWriteOptions& options) {
  ensure_dir(out_dir);
  const std::vector<std::pair<std::string, std::string>> files{
      {"fit_summary.txt", fit_summary(result, table.n(), options).to_string()},
      {"assignments.csv", assignments_csv(result, table)},
      {"cluster_means.csv", cluster_means_csv(result, table)},
      {"trace.csv", trace_csv(result)},
  };
  std::vector<std::filesystem::path> written;
  for (const auto& [name, content] : files) {
    const auto path = out_dir / (options.prefix + name);
    atomic_write(path, content);
    written.push_back(path);
  }
  return written;
}

std::string bic_table_csv(const SearchResult& search) {
  std::ostringstream os;
  os << "G,q,status,loglik,free_parameters,bic,selected,error\n";
  for (std::size_t k = 0; k < search.cells.size(); ++k) {
    const SearchCell& c = search.cells[k];
    os << c.G << ',' << c.q << ',' << (c.ok ? "ok" : "failed") << ',';
    if (c.ok) {
      os << format_double(c.loglik) << ',' << c.num_params << ','
         << format_double(reported_bic(c.bic, search.convention));
    } else {
      os << ',' << c.num_params << ',';
    }
    os << ',' << (search.selected && *search.selected == k ? "*" : "") << ',';
    std::string err = c.error;
    for (char& ch : err) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    os << err << '\n';
  }
  return os.str();
}

StructuredText search_summary(const SearchResult& search, Index n) {
  StructuredText doc;
  doc.set("n", static_cast<std::int64_t>(n));
  doc.set("cells", static_cast<std::int64_t>(search.cells.size()));
  std::int64_t ok = 0;
  for (const auto& c : search.cells) ok += c.ok ? 1 : 0;
  doc.set("cells_ok", ok);
  doc.set("bic_convention", to_string(search.convention));
  doc.set("bic_definition", search.convention == BicConvention::kMaximize
                                ? std::string("2 loglik - m ln n, largest selected")
                                : std::string("m ln n - 2 loglik, smallest selected"));
  if (const SearchCell* s = search.selected_cell()) {
    doc.set("selected_G", static_cast<std::int64_t>(s->G));
    doc.set("selected_q", static_cast<std::int64_t>(s->q));
    doc.set("selected_bic", reported_bic(s->bic, search.convention));
    doc.set("selected_loglik", s->loglik);
  } else {
    doc.set("selected_G", std::string("none"));
    doc.set("selected_q", std::string("none"));
  }
  return doc;
}

std::vector<std::filesystem::path> write_search(const SearchResult& search, const RatingTable& table,
                                                const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  std::vector<std::filesystem::path> written;
  atomic_write(out_dir / "bic_table.csv", bic_table_csv(search));
  written.push_back(out_dir / "bic_table.csv");
  atomic_write(out_dir / "search_summary.txt", search_summary(search, table.n()).to_string());
  written.push_back(out_dir / "search_summary.txt");
  if (const SearchCell* s = search.selected_cell(); s && s->fit) {
    FitWriteOptions opts;
    opts.convention = search.convention;
    for (auto& path : write_fit(*s->fit, table, out_dir, opts)) written.push_back(path);
  }
  return written;
}

}  // namespace pemix
