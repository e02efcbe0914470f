#include "cli/commands.hpp"

#include "pemix/errors.hpp"
#include "pemix/fit_writer.hpp"
#include "pemix/rating_table.hpp"
#include "pemix/structured_text.hpp"
#include "pemix/synthetic.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

namespace pemix::cli {

namespace {

constexpr const char* kSeedEnv = "PEMIX_SEED";

class AllCellsFailed : public Error {
 public:
  using Error::Error;
};

Index parse_index(const std::string& s) {
  Index v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v < 0) {
    throw InvalidArgument("not a non-negative integer: '" + s + "'");
  }
  return v;
}

std::uint64_t parse_seed(const std::string& s, const std::string& source) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InvalidArgument(source + " is not an unsigned integer: '" + s + "'");
  }
  return v;
}

std::uint64_t resolve_seed(const CliConfig& config, bool required) {
  if (config.seed) return *config.seed;
  if (const char* env = std::getenv(kSeedEnv); env && *env) {
    return parse_seed(env, kSeedEnv);
  }
  if (required) {
    throw InvalidArgument(config.command + " needs --seed (or " + kSeedEnv + ")");
  }
  return 1;
}

Index single_value(const std::vector<Index>& range, const std::string& flag) {
  if (range.size() != 1) throw InvalidArgument(flag + " takes a single value for this command");
  return range.front();
}

FitConfig fit_config(const CliConfig& c, std::uint64_t seed) {
  FitConfig f;
  f.restarts = c.restarts;
  f.seed = seed;
  f.sweeps_per_iter = c.sweeps;
  f.tolerance = c.tolerance;
  f.max_iter = c.max_iter;
  f.short_run_iterations = c.short_runs;
  return f;
}

void validate_common(const CliConfig& c) {
  if (c.out.empty()) throw InvalidArgument("--out is required");
  if (c.command != "generate") {
    if (c.input.empty()) throw InvalidArgument("--input is required");
    std::error_code ec;
    if (std::filesystem::weakly_canonical(c.input, ec) ==
        std::filesystem::weakly_canonical(c.out, ec)) {
      throw InvalidArgument("--input and --out must be different paths");
    }
  }
  if (c.restarts < 1) throw InvalidArgument("--restarts must be at least 1");
  if (c.max_iter < 1) throw InvalidArgument("--max-iter must be at least 1");
  if (c.sweeps < 1) throw InvalidArgument("--sweeps must be at least 1");
  if (!(c.tolerance > 0.0)) throw InvalidArgument("--tolerance must be positive");
}

RatingTable load(const CliConfig& c) {
  ParseOptions opts;
  opts.delimiter = c.delimiter;
  opts.scale_check = c.scale_check;
  return read_table_file(c.input, opts);
}

std::string fmt(double x) { return format_double(x); }

double relative_gap(double a, double reference) {
  return std::abs(a - reference) / std::max(std::abs(reference), 1e-300);
}

std::int64_t max_per_iteration(const FitResult& r, std::int64_t WorkCounters::*field) {
  std::int64_t m = 0;
  for (const auto& w : r.iteration_work) m = std::max(m, w.counters.*field);
  return m;
}

StructuredText initialization_text(const Initialization& init, std::uint64_t seed) {
  StructuredText doc;
  doc.set("seed", std::to_string(seed));
  doc.set("G", static_cast<std::int64_t>(init.resp.cols()));
  doc.set("q", static_cast<std::int64_t>(init.lambda.cols()));
  doc.add_matrix("responsibilities", init.resp, "w");
  if (init.lambda.cols() > 0) doc.add_matrix("lambda", init.lambda, "f");
  return doc;
}

Initialization initialization_from_text(const StructuredText& doc, Index p) {
  Initialization init;
  init.resp = doc.matrix("responsibilities");
  const Index q = doc.get_int("q");
  init.lambda = q > 0 ? doc.matrix("lambda") : Matrix(p, 0);
  return init;
}

}  // namespace

std::vector<Index> parse_range(const std::string& text) {
  std::vector<Index> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) throw InvalidArgument("empty element in range '" + text + "'");
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      out.push_back(parse_index(part));
      continue;
    }
    const Index lo = parse_index(part.substr(0, dash));
    const Index hi = parse_index(part.substr(dash + 1));
    if (hi < lo) throw InvalidArgument("range '" + part + "' is empty");
    for (Index v = lo; v <= hi; ++v) out.push_back(v);
  }
  if (out.empty()) throw InvalidArgument("empty range");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int cmd_fit(const CliConfig& c, std::ostream& out) {
  validate_common(c);
  const Index G = single_value(c.groups, "--groups");
  const Index q = single_value(c.factors, "--factors");
  const std::uint64_t seed = resolve_seed(c, false);
  const RatingTable table = load(c);
  const FitResult result = fit_best(c.algorithm, table.rows, G, q, fit_config(c, seed));
  FitWriteOptions opts;
  opts.convention = c.convention;
  opts.extra.emplace_back("seed", std::to_string(seed));
  write_fit(result, table, c.out, opts);
  out << to_string(result.algorithm) << " G=" << G << " q=" << q << " loglik=" << fmt(result.loglik)
      << " bic=" << fmt(reported_bic(result.bic, c.convention)) << " iterations=" << result.iterations
      << " converged=" << (result.converged ? "yes" : "no") << '\n';
  return result.converged ? kOk : kNotConverged;
}

int cmd_search(const CliConfig& c, std::ostream& out) {
  validate_common(c);
  const std::uint64_t seed = resolve_seed(c, false);
  const RatingTable table = load(c);
  const SearchResult search =
      model_search(c.algorithm, table.rows, c.groups, c.factors, fit_config(c, seed), c.convention);
  write_search(search, table, c.out);
  out << bic_table_csv(search);
  const SearchCell* best = search.selected_cell();
  if (!best) {
    throw AllCellsFailed("every (G, q) cell failed; see bic_table.csv for the per-cell errors");
  }
  out << "selected G=" << best->G << " q=" << best->q << '\n';
  return kOk;
}

int cmd_generate(const CliConfig& c, std::ostream& out) {
  validate_common(c);
  const std::uint64_t seed = resolve_seed(c, true);
  const Index G = single_value(c.groups, "--groups");
  const Index q = single_value(c.factors, "--factors");
  if (c.n < 1) throw InvalidArgument("--consumers must be positive");
  if (G < 1) throw InvalidArgument("--groups must be positive");
  // Truth and sampling streams are both derived from the one seed.
  const std::uint64_t sample_seed = std::mt19937_64(seed)();
  const SyntheticSpec spec =
      SyntheticSpec::rating_study(G, q, seed, sample_seed, c.n, c.products, c.block);
  const SyntheticData data = generate_bib(spec);
  std::error_code ec;
  std::filesystem::create_directories(c.out, ec);
  if (ec) throw IoError("cannot create directory " + c.out.string() + ": " + ec.message());
  atomic_write(c.out / "ratings.csv", table_to_string(data.table, c.delimiter));
  atomic_write(c.out / "truth.txt", truth_to_text(data.truth).to_string());
  out << "wrote " << data.table.n() << " x " << data.table.p() << " table with "
      << spec.observed_per_row << " ratings per consumer to " << (c.out / "ratings.csv").string()
      << '\n';
  return kOk;
}

int cmd_compare(const CliConfig& c, std::ostream& out) {
  validate_common(c);
  const std::uint64_t seed = resolve_seed(c, true);
  const Index G = single_value(c.groups, "--groups");
  const Index q = single_value(c.factors, "--factors");
  const RatingTable table = load(c);
  const FitConfig cfg = fit_config(c, seed);

  // Both drivers start from the serialized initialization, not the in-memory one.
  std::mt19937_64 rng(seed);
  const Initialization drawn = random_initialization(table.rows, G, q, rng);
  std::error_code ec;
  std::filesystem::create_directories(c.out, ec);
  if (ec) throw IoError("cannot create directory " + c.out.string() + ": " + ec.message());
  const auto init_path = c.out / "initialization.txt";
  atomic_write(init_path, initialization_text(drawn, seed).to_string());
  std::ifstream init_in(init_path);
  if (!init_in) throw IoError("cannot re-read " + init_path.string());
  const Initialization init = initialization_from_text(StructuredText::parse(init_in), table.p());

  const FitResult em = fit_em_from(table.rows, init, cfg);
  const FitResult pem = fit_pem_from(table.rows, init, cfg);

  FitWriteOptions opts;
  opts.convention = c.convention;
  opts.prefix = "em_";
  write_fit(em, table, c.out, opts);
  opts.prefix = "pem_";
  write_fit(pem, table, c.out, opts);

  std::ostringstream trace;
  trace << "iteration,em_loglik,pem_loglik,abs_gap,rel_gap\n";
  const std::size_t len = std::max(em.loglik_trace.size(), pem.loglik_trace.size());
  double max_gap_after_5 = 0.0;
  for (std::size_t t = 0; t < len; ++t) {
    const bool has_em = t < em.loglik_trace.size();
    const bool has_pem = t < pem.loglik_trace.size();
    trace << t + 1 << ',' << (has_em ? fmt(em.loglik_trace[t]) : "") << ','
          << (has_pem ? fmt(pem.loglik_trace[t]) : "") << ',';
    if (has_em && has_pem) {
      const double rel = relative_gap(pem.loglik_trace[t], em.loglik_trace[t]);
      trace << fmt(std::abs(pem.loglik_trace[t] - em.loglik_trace[t])) << ',' << fmt(rel);
      if (t + 1 > 5) max_gap_after_5 = std::max(max_gap_after_5, rel);
    } else {
      trace << ',';
    }
    trace << '\n';
  }
  atomic_write(c.out / "compare_trace.csv", trace.str());

  StructuredText summary;
  summary.set("seed", std::to_string(seed));
  summary.set("G", static_cast<std::int64_t>(G));
  summary.set("q", static_cast<std::int64_t>(q));
  summary.set("em_loglik", em.loglik);
  summary.set("pem_loglik", pem.loglik);
  summary.set("abs_gap", std::abs(pem.loglik - em.loglik));
  summary.set("rel_gap", relative_gap(pem.loglik, em.loglik));
  summary.set("max_rel_gap_after_iteration_5", max_gap_after_5);
  summary.set("em_iterations", em.iterations);
  summary.set("pem_iterations", pem.iterations);
  summary.set("em_converged", em.converged);
  summary.set("pem_converged", pem.converged);
  summary.set("missingness_patterns", static_cast<std::int64_t>(em.num_patterns));
  summary.set("em_max_block_inversions_per_iteration",
              max_per_iteration(em, &WorkCounters::block_inversions));
  summary.set("pem_max_block_inversions_per_iteration",
              max_per_iteration(pem, &WorkCounters::block_inversions));
  summary.set("em_max_covariance_inversions_per_iteration",
              max_per_iteration(em, &WorkCounters::covariance_inversions));
  summary.set("pem_max_covariance_inversions_per_iteration",
              max_per_iteration(pem, &WorkCounters::covariance_inversions));
  summary.set("map_label_agreement", aligned_label_agreement(em.map_labels, pem.map_labels, G));
  atomic_write(c.out / "compare_summary.txt", summary.to_string());

  out << "em loglik=" << fmt(em.loglik) << " iterations=" << em.iterations
      << " | pem loglik=" << fmt(pem.loglik) << " iterations=" << pem.iterations
      << " | rel_gap=" << fmt(relative_gap(pem.loglik, em.loglik)) << '\n';
  return em.converged && pem.converged ? kOk : kNotConverged;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CliConfig config;
  std::string algorithm = "pem";
  std::string groups;
  std::string factors;
  std::string delimiter = ",";
  std::string convention = "maximize";
  std::string seed_text;

  CLI::App app{"Mixtures of common factor analyzers for incomplete rating tables", "pemix"};
  app.require_subcommand(1);

  auto common = [&](CLI::App* sub, bool needs_input) {
    if (needs_input) {
      sub->add_option("-i,--input", config.input, "Rating table (delimited text)")->required();
      sub->add_option("--delimiter", delimiter, "Field delimiter of the input table");
      sub->add_flag("--scale-check", config.scale_check, "Reject ratings outside 1..9");
    }
    sub->add_option("-o,--out", config.out, "Output directory")->required();
    sub->add_option("--seed", seed_text, std::string("Random seed (default from ") + kSeedEnv + ")");
  };
  auto fitting = [&](CLI::App* sub) {
    sub->add_option("-a,--algorithm", algorithm, "em or pem")->check(CLI::IsMember({"em", "pem"}));
    sub->add_option("--restarts", config.restarts, "Random starts");
    sub->add_option("--tolerance", config.tolerance, "Relative log-likelihood tolerance");
    sub->add_option("--max-iter", config.max_iter, "Iteration cap");
    sub->add_option("--sweeps", config.sweeps, "PEM sweeps per iteration");
    sub->add_option("--short-runs", config.short_runs,
                    "Iterations per random start before continuing the best one (0 = off)");
    sub->add_option("--bic-convention", convention, "maximize or minimize-negated")
        ->check(CLI::IsMember({"maximize", "minimize-negated"}));
  };

  CLI::App* fit = app.add_subcommand("fit", "Fit one (G, q) model");
  common(fit, true);
  fitting(fit);
  fit->add_option("-g,--groups", groups, "Number of components")->required();
  fit->add_option("-q,--factors", factors, "Number of common factors")->required();

  CLI::App* search = app.add_subcommand("search", "BIC search over a (G, q) grid");
  common(search, true);
  fitting(search);
  std::string search_groups = "1-6";
  std::string search_factors = "1-3";
  search->add_option("-g,--groups", search_groups, "Component range, e.g. 1-6 or 2,3");
  search->add_option("-q,--factors", search_factors, "Factor range, e.g. 1-3");

  CLI::App* generate = app.add_subcommand("generate", "Write a synthetic BIB table and its truth");
  common(generate, false);
  std::string gen_groups = "3";
  std::string gen_factors = "2";
  generate->add_option("-g,--groups", gen_groups, "True number of components");
  generate->add_option("-q,--factors", gen_factors, "True number of factors");
  generate->add_option("-n,--consumers", config.n, "Rows");
  generate->add_option("-p,--products", config.products, "Products");
  generate->add_option("-k,--block", config.block, "Ratings per consumer");
  generate->add_option("--delimiter", delimiter, "Field delimiter of the written table");

  CLI::App* compare = app.add_subcommand("compare", "EM and PEM from one shared initialization");
  common(compare, true);
  fitting(compare);
  std::string cmp_groups;
  std::string cmp_factors;
  compare->add_option("-g,--groups", cmp_groups, "Number of components")->required();
  compare->add_option("-q,--factors", cmp_factors, "Number of common factors")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "pemix: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (delimiter.size() != 1) throw InvalidArgument("--delimiter must be a single character");
    config.delimiter = delimiter.front();
    config.algorithm = algorithm_from_string(algorithm);
    config.convention = bic_convention_from_string(convention);
    if (!seed_text.empty()) config.seed = parse_seed(seed_text, "--seed");
    if (fit->parsed()) {
      config.command = "fit";
      config.groups = parse_range(groups);
      config.factors = parse_range(factors);
      return cmd_fit(config, out);
    }
    if (search->parsed()) {
      config.command = "search";
      config.groups = parse_range(search_groups);
      config.factors = parse_range(search_factors);
      return cmd_search(config, out);
    }
    if (generate->parsed()) {
      config.command = "generate";
      config.groups = parse_range(gen_groups);
      config.factors = parse_range(gen_factors);
      return cmd_generate(config, out);
    }
    config.command = "compare";
    config.groups = parse_range(cmp_groups);
    config.factors = parse_range(cmp_factors);
    return cmd_compare(config, out);
  } catch (const ParseError& e) {
    err << "pemix: parse error: " << e.what() << '\n';
    return kParseFailure;
  } catch (const DegenerateComponent& e) {
    err << "pemix: degenerate fit: " << e.what() << '\n';
    return kDegenerate;
  } catch (const IoError& e) {
    err << "pemix: i/o error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const AllCellsFailed& e) {
    err << "pemix: " << e.what() << '\n';
    return kAllCellsFailed;
  } catch (const InvalidArgument& e) {
    err << "pemix: invalid configuration: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "pemix: numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
}

}  // namespace pemix::cli
