#include "olt/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace olt::svg {
namespace {

constexpr int kWidth = 860;
constexpr int kHeight = 520;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 30;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 55;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                         "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

struct Range {
  double lo = 0.0, hi = 1.0;
  void include(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!(hi > lo)) {
      lo -= 1.0;
      hi += 1.0;
    }
    const double m = 0.04 * (hi - lo);
    lo -= m;
    hi += m;
  }
};

double nice_step(double span) {
  const double raw = span / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

void axes(std::ofstream& os, const Range& rx, const Range& ry,
          const std::string& x_label, const std::string& y_label,
          const std::string& title) {
  const int x0 = kMarginLeft, x1 = kWidth - kMarginRight;
  const int y0 = kHeight - kMarginBottom, y1 = kMarginTop;
  os << "<rect x='" << x0 << "' y='" << y1 << "' width='" << x1 - x0
     << "' height='" << y0 - y1 << "' fill='none' stroke='#333'/>\n";
  os << "<text x='" << (x0 + x1) / 2 << "' y='22' text-anchor='middle' "
     << "font-size='15'>" << title << "</text>\n";
  os << "<text x='" << (x0 + x1) / 2 << "' y='" << kHeight - 12
     << "' text-anchor='middle' font-size='13'>" << x_label << "</text>\n";
  os << "<text x='16' y='" << (y0 + y1) / 2
     << "' text-anchor='middle' font-size='13' transform='rotate(-90 16 "
     << (y0 + y1) / 2 << ")'>" << y_label << "</text>\n";
  const double sx = nice_step(rx.hi - rx.lo);
  for (double t = std::ceil(rx.lo / sx) * sx; t <= rx.hi; t += sx) {
    const double px = x0 + (t - rx.lo) / (rx.hi - rx.lo) * (x1 - x0);
    os << "<line x1='" << px << "' y1='" << y0 << "' x2='" << px << "' y2='"
       << y0 + 4 << "' stroke='#333'/>\n";
    os << "<text x='" << px << "' y='" << y0 + 18
       << "' text-anchor='middle' font-size='11'>" << fmt(t) << "</text>\n";
  }
  const double sy = nice_step(ry.hi - ry.lo);
  for (double t = std::ceil(ry.lo / sy) * sy; t <= ry.hi; t += sy) {
    const double py = y0 - (t - ry.lo) / (ry.hi - ry.lo) * (y0 - y1);
    os << "<line x1='" << x0 - 4 << "' y1='" << py << "' x2='" << x0
       << "' y2='" << py << "' stroke='#333'/>\n";
    os << "<text x='" << x0 - 8 << "' y='" << py + 4
       << "' text-anchor='end' font-size='11'>" << fmt(t) << "</text>\n";
  }
}

} // namespace

void write_line_plot(const std::filesystem::path& path,
                     const std::vector<Series>& series,
                     const std::string& x_label, const std::string& y_label,
                     const std::string& title) {
  Range rx, ry;
  rx.lo = 1e300; rx.hi = -1e300;
  ry.lo = 1e300; ry.hi = -1e300;
  for (const auto& s : series)
    for (Eigen::Index i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      rx.include(s.x[i]);
      ry.include(s.y[i]);
    }
  rx.pad();
  ry.pad();

  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth
     << "' height='" << kHeight << "' font-family='sans-serif'>\n";
  axes(os, rx, ry, x_label, y_label, title);
  const int x0 = kMarginLeft, x1 = kWidth - kMarginRight;
  const int y0 = kHeight - kMarginBottom, y1 = kMarginTop;
  for (size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    os << "<polyline fill='none' stroke='" << kColors[k % 8]
       << "' stroke-width='1.5' points='";
    bool open = false;
    for (Eigen::Index i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) {
        if (open) { os << "' /><polyline fill='none' stroke='"
                       << kColors[k % 8] << "' stroke-width='1.5' points='"; }
        open = false;
        continue;
      }
      const double px = x0 + (s.x[i] - rx.lo) / (rx.hi - rx.lo) * (x1 - x0);
      const double py = y0 - (s.y[i] - ry.lo) / (ry.hi - ry.lo) * (y0 - y1);
      os << px << "," << py << " ";
      open = true;
    }
    os << "'/>\n";
    os << "<text x='" << x1 - 10 << "' y='" << y1 + 18 + 16 * (int)k
       << "' text-anchor='end' font-size='12' fill='" << kColors[k % 8] << "'>"
       << s.label << "</text>\n";
  }
  os << "</svg>\n";
}

void write_heat_map(const std::filesystem::path& path,
                    const Eigen::MatrixXd& values,
                    const Eigen::VectorXd& y_axis,
                    const Eigen::VectorXd& x_axis, const std::string& x_label,
                    const std::string& y_label, const std::string& title) {
  if (values.rows() != y_axis.size() || values.cols() != x_axis.size())
    throw std::invalid_argument("write_heat_map: axis/value shape mismatch");
  double lo = 1e300, hi = -1e300;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double v = values(i);
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) hi = lo + 1.0;

  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth
     << "' height='" << kHeight << "' font-family='sans-serif'>\n";
  Range rx{x_axis.minCoeff(), x_axis.maxCoeff()};
  Range ry{y_axis.minCoeff(), y_axis.maxCoeff()};
  rx.pad();
  ry.pad();
  axes(os, rx, ry, x_label, y_label, title);
  const int x0 = kMarginLeft, x1 = kWidth - kMarginRight;
  const int y0 = kHeight - kMarginBottom, y1 = kMarginTop;
  const double cw =
      static_cast<double>(x1 - x0) / static_cast<double>(x_axis.size());
  const double ch =
      static_cast<double>(y0 - y1) / static_cast<double>(y_axis.size());
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const double v = values(r, c);
      if (!std::isfinite(v)) continue;
      const double t = (v - lo) / (hi - lo);
      // blue -> yellow ramp
      const int red = static_cast<int>(30 + 225 * t);
      const int green = static_cast<int>(60 + 180 * t);
      const int blue = static_cast<int>(200 - 170 * t);
      os << "<rect x='" << x0 + cw * static_cast<double>(c) << "' y='"
         << y0 - ch * static_cast<double>(r + 1) << "' width='" << cw + 0.5
         << "' height='" << ch + 0.5 << "' fill='rgb(" << red << "," << green
         << "," << blue << ")'/>\n";
    }
  os << "<text x='" << x1 - 8 << "' y='" << y1 - 6
     << "' text-anchor='end' font-size='11'>" << fmt(lo) << " .. " << fmt(hi)
     << "</text>\n";
  os << "</svg>\n";
}

} // namespace olt::svg
