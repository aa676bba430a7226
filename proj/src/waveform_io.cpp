#include "olt/waveform_io.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace olt {
namespace {

constexpr char kMagic[4] = {'O', 'L', 'T', 'W'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

} // namespace

void write_waveform(const std::filesystem::path& path, const Waveform& w) {
  w.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os.write(kMagic, 4);
  put<uint32_t>(os, kVersion);
  put<uint64_t>(os, static_cast<uint64_t>(w.size()));
  put<double>(os, w.sample_rate_hz);
  put<double>(os, w.center_frequency_hz);
  put<double>(os, w.t0_offset_s);
  std::vector<double> row(4);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    row[0] = w.x[i].real();
    row[1] = w.x[i].imag();
    row[2] = w.y[i].real();
    row[3] = w.y[i].imag();
    os.write(reinterpret_cast<const char*>(row.data()), 4 * sizeof(double));
  }
  if (!os) throw std::runtime_error("short write: " + path.string());
}

Waveform read_waveform(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not an OLTW file: " + path.string());
  const auto version = get<uint32_t>(is);
  if (version != kVersion)
    throw std::runtime_error("unsupported OLTW version " +
                             std::to_string(version));
  const auto n = static_cast<Eigen::Index>(get<uint64_t>(is));
  Waveform w;
  w.sample_rate_hz = get<double>(is);
  w.center_frequency_hz = get<double>(is);
  w.t0_offset_s = get<double>(is);
  w.x.resize(n);
  w.y.resize(n);
  std::vector<double> row(4);
  for (Eigen::Index i = 0; i < n; ++i) {
    is.read(reinterpret_cast<char*>(row.data()), 4 * sizeof(double));
    w.x[i] = {row[0], row[1]};
    w.y[i] = {row[2], row[3]};
  }
  if (!is) throw std::runtime_error("truncated OLTW file: " + path.string());
  w.validate();
  return w;
}

} // namespace olt
