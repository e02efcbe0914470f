#include "pemix/structured_text.hpp"

#include "pemix/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace pemix {

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
    throw InvalidArgument("not a number: '" + s + "'");
  }
  return v;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string join_csv(const std::vector<std::string>& cells, char delimiter) {
  std::string out;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k) out += delimiter;
    out += cells[k];
  }
  return out;
}

void StructuredText::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void StructuredText::set(const std::string& key, double value) { set(key, format_double(value)); }

void StructuredText::set(const std::string& key, std::int64_t value) {
  set(key, std::to_string(value));
}

void StructuredText::add_table(TextTable table) { tables_.push_back(std::move(table)); }

void StructuredText::add_matrix(const std::string& name, const Matrix& m,
                                const std::string& column_prefix) {
  TextTable t;
  t.name = name;
  for (Index c = 0; c < m.cols(); ++c) t.header.push_back(column_prefix + std::to_string(c + 1));
  for (Index r = 0; r < m.rows(); ++r) {
    std::vector<std::string> row;
    for (Index c = 0; c < m.cols(); ++c) row.push_back(format_double(m(r, c)));
    t.rows.push_back(std::move(row));
  }
  tables_.push_back(std::move(t));
}

bool StructuredText::has(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return true;
  }
  return false;
}

const std::string& StructuredText::get(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw InvalidArgument("missing key '" + key + "'");
}

double StructuredText::get_double(const std::string& key) const { return parse_double(get(key)); }

std::int64_t StructuredText::get_int(const std::string& key) const {
  const std::string& s = get(key);
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InvalidArgument("key '" + key + "' is not an integer: '" + s + "'");
  }
  return v;
}

bool StructuredText::get_bool(const std::string& key) const {
  const std::string& s = get(key);
  if (s == "true") return true;
  if (s == "false") return false;
  throw InvalidArgument("key '" + key + "' is not a boolean: '" + s + "'");
}

const TextTable& StructuredText::table(const std::string& name) const {
  for (const auto& t : tables_) {
    if (t.name == name) return t;
  }
  throw InvalidArgument("missing section [" + name + "]");
}

Matrix StructuredText::matrix(const std::string& name) const {
  const TextTable& t = table(name);
  Matrix m(static_cast<Index>(t.rows.size()), static_cast<Index>(t.header.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r].size() != t.header.size()) {
      throw InvalidArgument("section [" + name + "] is ragged");
    }
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      m(static_cast<Index>(r), static_cast<Index>(c)) = parse_double(t.rows[r][c]);
    }
  }
  return m;
}

void StructuredText::write(std::ostream& os) const {
  for (const auto& [k, v] : entries_) os << k << " = " << v << '\n';
  for (const auto& t : tables_) {
    os << '\n' << '[' << t.name << "]\n" << join_csv(t.header) << '\n';
    for (const auto& row : t.rows) os << join_csv(row) << '\n';
  }
}

std::string StructuredText::to_string() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

StructuredText StructuredText::parse(std::istream& is) {
  StructuredText doc;
  std::string line;
  TextTable* current = nullptr;
  bool expect_header = false;
  while (std::getline(is, line)) {
    const std::string t = trim(line);
    if (t.empty()) {
      current = nullptr;
      continue;
    }
    if (t.front() == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      doc.tables_.push_back(TextTable{t.substr(1, t.size() - 2), {}, {}});
      current = &doc.tables_.back();
      expect_header = true;
      continue;
    }
    if (current) {
      if (expect_header) {
        current->header = split_csv(t);
        expect_header = false;
      } else {
        current->rows.push_back(split_csv(t));
      }
      continue;
    }
    const auto eq = t.find(" = ");
    if (eq == std::string::npos) {
      throw InvalidArgument("structured text: cannot parse line '" + t + "'");
    }
    doc.entries_.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 3)));
  }
  return doc;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) {
      throw IoError("cannot open " + tmp.string() + " for writing: " +
                    std::generic_category().message(errno));
    }
    os << content;
    os.flush();
    if (!os) {
      throw IoError("write to " + tmp.string() + " failed: " +
                    std::generic_category().message(errno));
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

}  // namespace pemix
