#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "intermittent/error.hpp"

namespace intermittent::io {

namespace fs = std::filesystem;

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InvalidInput("cannot read '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InvalidInput("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw InvalidInput("write failed for '" + p.string() + "'");
}

/// In-memory CSV table. Numbers are written with %.17g so they round-trip exactly.
class Csv {
 public:
  using Cell = std::variant<double, long long, std::string>;

  explicit Csv(std::vector<std::string> header = {}) : header_(std::move(header)) {}

  void row(std::vector<Cell> cells) {
    require(cells.size() == header_.size(), "Csv::row: column count mismatch");
    rows_.push_back(std::move(cells));
  }

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < header_.size(); ++i) out += (i ? "," : "") + header_[i];
    out += "\n";
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) out += ",";
        out += format(r[i]);
      }
      out += "\n";
    }
    return out;
  }

  static std::string format(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", *d);
      return buf;
    }
    if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
    return std::get<std::string>(c);
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

/// Column-oriented view of a CSV file read back from disk.
class Table {
 public:
  static Table parse(const std::string& text) {
    Table t;
    std::stringstream ss(text);
    std::string line;
    if (!std::getline(ss, line)) throw InvalidInput("csv: empty file");
    t.header_ = split(line);
    for (std::size_t i = 0; i < t.header_.size(); ++i) t.index_[t.header_[i]] = i;
    while (std::getline(ss, line)) {
      if (line.empty()) continue;
      auto cells = split(line);
      if (cells.size() != t.header_.size()) throw InvalidInput("csv: ragged row");
      t.rows_.push_back(std::move(cells));
    }
    return t;
  }
  static Table load(const fs::path& p) { return parse(read_file(p)); }

  std::size_t rows() const { return rows_.size(); }
  bool has(const std::string& col) const { return index_.count(col) > 0; }
  const std::string& text(std::size_t r, const std::string& col) const { return rows_.at(r).at(column(col)); }
  double num(std::size_t r, const std::string& col) const {
    const std::string& s = text(r, col);
    try {
      return std::stod(s);
    } catch (const std::exception&) {
      if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
      throw InvalidInput("csv: '" + s + "' in column " + col + " is not a number");
    }
  }
  std::vector<double> column_values(const std::string& col) const {
    std::vector<double> v;
    for (std::size_t r = 0; r < rows(); ++r) v.push_back(num(r, col));
    return v;
  }

 private:
  std::size_t column(const std::string& col) const {
    const auto it = index_.find(col);
    if (it == index_.end()) throw InvalidInput("csv: missing column '" + col + "'");
    return it->second;
  }
  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur += c;
      }
    }
    out.push_back(cur);
    return out;
  }
  std::vector<std::string> header_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace intermittent::io
