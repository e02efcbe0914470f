#include "pemix/rating_table.hpp"

#include "pemix/errors.hpp"
#include "pemix/structured_text.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace pemix {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    if (pos == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

}  // namespace

RatingTable parse_table(std::istream& is, const ParseOptions& options) {
  RatingTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split(line, options.delimiter);
    if (!have_header) {
      if (cells.size() < 2) {
        throw ParseError(line_no, 1, "header needs an id column and at least one product");
      }
      table.id_header = cells.front();
      table.product_names.assign(cells.begin() + 1, cells.end());
      for (std::size_t c = 0; c < table.product_names.size(); ++c) {
        if (table.product_names[c].empty()) {
          throw ParseError(line_no, c + 2, "empty product name");
        }
      }
      have_header = true;
      continue;
    }
    const std::size_t p = table.product_names.size();
    if (cells.size() != p + 1) {
      throw ParseError(line_no, cells.size() < p + 1 ? cells.size() + 1 : p + 2,
                       "expected " + std::to_string(p + 1) + " fields, found " +
                           std::to_string(cells.size()));
    }
    Vector values(static_cast<Index>(p));
    std::vector<bool> mask(p, false);
    bool any = false;
    for (std::size_t c = 0; c < p; ++c) {
      const std::string& cell = cells[c + 1];
      if (cell.empty()) {
        values(static_cast<Index>(c)) = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      double v = 0.0;
      try {
        v = parse_double(cell);
      } catch (const InvalidArgument&) {
        throw ParseError(line_no, c + 2, "'" + cell + "' is not a number");
      }
      if (options.scale_check && (v < options.scale_min || v > options.scale_max)) {
        std::ostringstream msg;
        msg << "rating " << cell << " is outside [" << options.scale_min << ", "
            << options.scale_max << "]";
        throw ParseError(line_no, c + 2, msg.str());
      }
      values(static_cast<Index>(c)) = v;
      mask[c] = true;
      any = true;
    }
    if (!any) throw ParseError(line_no, 2, "row has no observed ratings");
    table.consumer_ids.push_back(cells.front());
    table.rows.emplace_back(values, std::move(mask));
  }
  if (!have_header) throw ParseError(line_no + 1, 1, "input is empty");
  if (table.rows.empty()) throw ParseError(line_no + 1, 1, "table has no consumer rows");
  return table;
}

RatingTable read_table_file(const std::filesystem::path& path, const ParseOptions& options) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string() + " for reading");
  return parse_table(is, options);
}

void write_table(const RatingTable& table, std::ostream& os, char delimiter) {
  os << table.id_header;
  for (const auto& name : table.product_names) os << delimiter << name;
  os << '\n';
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const IncompleteObservation& row = table.rows[i];
    os << (i < table.consumer_ids.size() ? table.consumer_ids[i] : std::to_string(i + 1));
    for (Index j = 0; j < row.dim(); ++j) {
      os << delimiter;
      if (row.is_observed(j)) os << format_double(row.value(j));
    }
    os << '\n';
  }
}

std::string table_to_string(const RatingTable& table, char delimiter) {
  std::ostringstream os;
  write_table(table, os, delimiter);
  return os.str();
}

}  // namespace pemix
