#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcf/error.hpp"

namespace mcf {

using json = nlohmann::ordered_json;

// Every floating-point value leaves the program with 17 significant digits.
inline std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void json_string(std::ostream& os, const std::string& s) { os << json(s).dump(); }

inline void dump17(std::ostream& os, const json& j, int indent, int level) {
  const std::string pad(static_cast<std::size_t>(indent * (level + 1)), ' ');
  const std::string end(static_cast<std::size_t>(indent * level), ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ",\n";
        first = false;
        os << pad;
        json_string(os, it.key());
        os << ": ";
        dump17(os, it.value(), indent, level + 1);
      }
      os << "\n" << end << "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      os << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ",\n";
        os << pad;
        dump17(os, j[i], indent, level + 1);
      }
      os << "\n" << end << "]";
      return;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      // JSON has no literal for non-finite values
      if (!std::isfinite(v))
        json_string(os, fmt17(v));
      else
        os << fmt17(v);
      return;
    }
    default:
      os << j.dump();
  }
}

}  // namespace detail

inline std::string dump17(const json& j, int indent = 2) {
  std::ostringstream os;
  detail::dump17(os, j, indent, 0);
  os << "\n";
  return os.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::IoError, "cannot write " + p.string());
  f << text;
  if (!f) fail(ErrorKind::IoError, "write failed for " + p.string());
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot read " + p.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

inline void write_json(const std::filesystem::path& p, const json& j) { write_text(p, dump17(j)); }

inline json read_json(const std::filesystem::path& p) {
  const std::string text = read_text(p);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::IoError, p.string() + ": " + e.what());
  }
}

// Column-oriented CSV writer; every number in 17-digit form.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : ncol_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
    os_ << "\n";
  }

  void row(const std::vector<double>& v) {
    if (v.size() != ncol_) fail(ErrorKind::IoError, "CSV row has the wrong number of columns");
    for (std::size_t i = 0; i < v.size(); ++i) os_ << (i ? "," : "") << fmt17(v[i]);
    os_ << "\n";
  }

  // mixed rows: pre-formatted cells
  void cells(const std::vector<std::string>& v) {
    if (v.size() != ncol_) fail(ErrorKind::IoError, "CSV row has the wrong number of columns");
    for (std::size_t i = 0; i < v.size(); ++i) os_ << (i ? "," : "") << v[i];
    os_ << "\n";
  }

  std::string str() const { return os_.str(); }
  void save(const std::filesystem::path& p) const { write_text(p, os_.str()); }

 private:
  std::size_t ncol_;
  std::ostringstream os_;
};

// Reader for the CSV files written above: header row, comma-separated cells, no quoting.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t index(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    fail(ErrorKind::IoError, "CSV column '" + name + "' not found");
  }

  std::vector<double> col(const std::string& name) const {
    const std::size_t j = index(name);
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) {
      try {
        v.push_back(std::stod(r.at(j)));
      } catch (const std::exception&) {
        fail(ErrorKind::IoError, "CSV column '" + name + "' holds a non-numeric cell");
      }
    }
    return v;
  }
};

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream is(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(is, line)) fail(ErrorKind::IoError, "empty CSV");
  t.header = split(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size()) fail(ErrorKind::IoError, "CSV row has the wrong number of columns");
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& p) { return parse_csv(read_text(p)); }

// FNV-1a 64-bit digest, hex.
inline std::string digest(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string file_digest(const std::filesystem::path& p) { return digest(read_text(p)); }

}  // namespace mcf
