#ifndef OLT_FFT_HPP
#define OLT_FFT_HPP

#include "olt/types.hpp"

namespace olt::fft {

// Unnormalized forward DFT, X_k = sum_n x_n exp(-j 2 pi k n / N).
void forward_inplace(CArray& a);
// Inverse DFT with 1/N normalization.
void inverse_inplace(CArray& a);

CArray forward(const CArray& a);
CArray inverse(const CArray& a);

Eigen::Index next_pow2(Eigen::Index n);

/// Angular frequency of each DFT bin for a given sample rate (rad/s),
/// negative frequencies in the upper half, FFTW bin ordering.
Eigen::ArrayXd angular_frequencies(Eigen::Index n, double sample_rate_hz);

/// Baseband frequency of each DFT bin (Hz), same ordering.
Eigen::ArrayXd bin_frequencies(Eigen::Index n, double sample_rate_hz);

} // namespace olt::fft

#endif // OLT_FFT_HPP
