#ifndef OLT_WAVEFORM_IO_HPP
#define OLT_WAVEFORM_IO_HPP

#include <filesystem>

#include "olt/types.hpp"

namespace olt {

// Waveform file format "OLTW", little-endian:
//   magic "OLTW" | version u32 | n_samples u64 | sample_rate f64 Hz |
//   center_freq f64 Hz | t0 f64 s | n_samples * (re_x, im_x, re_y, im_y) f64
// Round trips are bit-exact.

void write_waveform(const std::filesystem::path& path, const Waveform& w);
Waveform read_waveform(const std::filesystem::path& path);

} // namespace olt

#endif // OLT_WAVEFORM_IO_HPP
