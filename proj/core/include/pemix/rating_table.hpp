#pragma once

// Consumer-by-product rating tables: a header row of product labels, then
// one row per consumer whose first cell is the consumer id. Blank cells are
// missing ratings.

#include "pemix/mixture.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace pemix {

struct RatingTable {
  std::string id_header = "Consumer";
  std::vector<std::string> product_names;
  std::vector<std::string> consumer_ids;
  Dataset rows;

  Index n() const { return static_cast<Index>(rows.size()); }
  Index p() const { return static_cast<Index>(product_names.size()); }
};

struct ParseOptions {
  char delimiter = ',';
  bool scale_check = false;
  double scale_min = 1.0;
  double scale_max = 9.0;
};

/// Throws ParseError carrying 1-based line and column numbers.
RatingTable parse_table(std::istream& is, const ParseOptions& options = {});
RatingTable read_table_file(const std::filesystem::path& path, const ParseOptions& options = {});

/// Missing cells are written as empty fields; values use the shortest
/// representation that parses back exactly.
void write_table(const RatingTable& table, std::ostream& os, char delimiter = ',');
std::string table_to_string(const RatingTable& table, char delimiter = ',');

}  // namespace pemix
