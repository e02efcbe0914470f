#pragma once

#include "pemix/fit.hpp"
#include "pemix/model_search.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pemix::cli {

/// Process exit codes. Every failure path maps to exactly one of these.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,          ///< bad flags or invalid configuration
  kParseFailure = 2,   ///< malformed input table
  kDegenerate = 3,     ///< a component collapsed in every start
  kNotConverged = 4,   ///< artifacts written, but max_iter was reached
  kIoFailure = 5,      ///< cannot read input or write artifacts
  kAllCellsFailed = 6, ///< search: no (G, q) cell produced a fit
  kNumerical = 7,      ///< singular or non-positive-definite matrices
};

struct CliConfig {
  std::string command;  ///< fit, search, generate or compare
  std::filesystem::path input;
  std::filesystem::path out;
  Algorithm algorithm = Algorithm::kPem;
  std::vector<Index> groups;
  std::vector<Index> factors;
  int restarts = 10;
  std::optional<std::uint64_t> seed;
  double tolerance = 1e-8;
  int max_iter = 5000;
  int sweeps = 1;
  int short_runs = 0;
  char delimiter = ',';
  bool scale_check = false;
  BicConvention convention = BicConvention::kMaximize;
  // generate
  Index n = 369;
  Index products = 12;
  Index block = 6;
};

/// "3", "1-6" or "1,2,4". Throws InvalidArgument on empty or malformed input.
std::vector<Index> parse_range(const std::string& text);

/// Runs one command line (without the program name); diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cmd_fit(const CliConfig& config, std::ostream& out);
int cmd_search(const CliConfig& config, std::ostream& out);
int cmd_generate(const CliConfig& config, std::ostream& out);
int cmd_compare(const CliConfig& config, std::ostream& out);

}  // namespace pemix::cli
