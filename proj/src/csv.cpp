#include "olt/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace olt::csv {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write(const std::filesystem::path& path,
           const std::vector<std::string>& columns,
           const std::vector<Eigen::VectorXd>& data) {
  if (columns.size() != data.size())
    throw std::invalid_argument("csv::write: column/data count mismatch");
  const Eigen::Index n = data.empty() ? 0 : data.front().size();
  for (const auto& c : data)
    if (c.size() != n)
      throw std::invalid_argument("csv::write: ragged columns");

  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  for (size_t j = 0; j < columns.size(); ++j)
    os << (j ? "," : "") << columns[j];
  os << "\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    for (size_t j = 0; j < data.size(); ++j)
      os << (j ? "," : "") << format_double(data[j][i]);
    os << "\n";
  }
  if (!os) throw std::runtime_error("short write: " + path.string());
}

Table read(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  Table t;
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("empty csv: " + path.string());
  std::stringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) t.columns.push_back(cell);

  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
      if (cell.empty() || cell == "nan") {
        row.push_back(std::nan(""));
      } else {
        double v = 0.0;
        const auto* begin = cell.data();
        const auto* end = cell.data() + cell.size();
        if (std::from_chars(begin, end, v).ec != std::errc{})
          throw std::runtime_error("bad csv number '" + cell + "' in " +
                                   path.string());
        row.push_back(v);
      }
    }
    if (row.size() != t.columns.size())
      throw std::runtime_error("ragged csv row in " + path.string());
    rows.push_back(std::move(row));
  }
  t.data.resize(static_cast<Eigen::Index>(rows.size()),
                static_cast<Eigen::Index>(t.columns.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j)
      t.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j];
  return t;
}

Eigen::Index Table::column_index(const std::string& name) const {
  for (size_t j = 0; j < columns.size(); ++j)
    if (columns[j] == name) return static_cast<Eigen::Index>(j);
  return -1;
}

Eigen::VectorXd Table::column(const std::string& name) const {
  const Eigen::Index j = column_index(name);
  if (j < 0) throw std::runtime_error("csv: missing column " + name);
  return data.col(j);
}

} // namespace olt::csv
