#pragma once

// Plain-text artifact format: `key = value` lines followed by named
// rectangular sections
//
//   [section]
//   col_a,col_b
//   1,2
//
// Sections end at a blank line. Lines starting with '#' are comments.

#include "pemix/linalg.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace pemix {

/// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);
/// Throws InvalidArgument on anything but a complete finite number.
double parse_double(const std::string& s);

struct TextTable {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

class StructuredText {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, int value) { set(key, static_cast<std::int64_t>(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

  void add_table(TextTable table);
  /// Section with columns named `<column_prefix>1..k` and one row per matrix row.
  void add_matrix(const std::string& name, const Matrix& m, const std::string& column_prefix = "c");

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  const TextTable& table(const std::string& name) const;
  Matrix matrix(const std::string& name) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  const std::vector<TextTable>& tables() const { return tables_; }

  void write(std::ostream& os) const;
  std::string to_string() const;
  static StructuredText parse(std::istream& is);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::vector<TextTable> tables_;
};

/// Writes `content` to a sibling temporary file and renames it over `path`.
/// Throws IoError with the operating-system message on failure.
void atomic_write(const std::filesystem::path& path, const std::string& content);

/// Comma-joined cells.
std::string join_csv(const std::vector<std::string>& cells, char delimiter = ',');

}  // namespace pemix
