#ifndef OLT_SVGPLOT_HPP
#define OLT_SVGPLOT_HPP

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace olt::svg {

struct Series {
  std::string label;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

/// Line plot of one or more series (NaN samples are skipped).
void write_line_plot(const std::filesystem::path& path,
                     const std::vector<Series>& series,
                     const std::string& x_label, const std::string& y_label,
                     const std::string& title);

/// Heat map of values(row, col) over (y_axis, x_axis).
void write_heat_map(const std::filesystem::path& path,
                    const Eigen::MatrixXd& values,
                    const Eigen::VectorXd& y_axis,
                    const Eigen::VectorXd& x_axis, const std::string& x_label,
                    const std::string& y_label, const std::string& title);

} // namespace olt::svg

#endif // OLT_SVGPLOT_HPP
