#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "scafe/core.hpp"

namespace scafe::csv {

/// Header + numeric rows, comma separated.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int col(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    return -1;
  }

  int require(const std::string& name) const {
    const int c = col(name);
    if (c < 0) throw DomainError("csv: missing column " + name);
    return c;
  }

  VecX column(const std::string& name) const {
    const int c = require(name);
    VecX v(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) v(r) = rows[r][c];
    return v;
  }

  size_t size() const { return rows.size(); }
};

inline Table read(std::istream& is) {
  Table t;
  std::string line;
  if (!std::getline(is, line)) throw DomainError("csv: empty stream");
  std::stringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) t.columns.push_back(cell);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(t.columns.size());
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != t.columns.size()) throw DomainError("csv: ragged row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline Table read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DomainError("csv: cannot open " + path);
  return read(is);
}

class Writer {
 public:
  Writer(std::ostream& os, const std::vector<std::string>& columns) : os_(os) {
    for (size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
    os_ << '\n';
    os_.precision(17);
  }

  void row(const std::vector<double>& values) {
    for (size_t i = 0; i < values.size(); ++i) os_ << (i ? "," : "") << values[i];
    os_ << '\n';
  }

 private:
  std::ostream& os_;
};

}  // namespace scafe::csv
