#ifndef OLT_CSV_HPP
#define OLT_CSV_HPP

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace olt::csv {

struct Table {
  std::vector<std::string> columns;
  Eigen::MatrixXd data; // rows x columns, NaN for empty cells

  Eigen::Index rows() const { return data.rows(); }
  Eigen::Index column_index(const std::string& name) const; // -1 if absent
  Eigen::VectorXd column(const std::string& name) const;    // throws if absent
};

void write(const std::filesystem::path& path,
           const std::vector<std::string>& columns,
           const std::vector<Eigen::VectorXd>& data);

Table read(const std::filesystem::path& path);

std::string format_double(double v); // round-trip-exact formatting

} // namespace olt::csv

#endif // OLT_CSV_HPP
