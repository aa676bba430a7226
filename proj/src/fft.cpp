#include "olt/fft.hpp"

#include <mutex>
#include <unordered_map>
#include <fftw3.h>

namespace olt::fft {
namespace {

// Plan creation is not thread-safe in FFTW; execution via the new-array
// interface is. Plans use FFTW_ESTIMATE so the algorithm choice (and hence
// rounding) is reproducible across runs.
class PlanCache {
public:
  static fftw_plan get(Eigen::Index n, int sign) {
    static PlanCache cache;
    std::lock_guard<std::mutex> lock(cache.mutex_);
    const uint64_t key = (static_cast<uint64_t>(n) << 1) | (sign < 0 ? 1u : 0u);
    auto it = cache.plans_.find(key);
    if (it != cache.plans_.end()) return it->second;
    fftw_complex* buf = fftw_alloc_complex(static_cast<size_t>(n));
    fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    cache.plans_.emplace(key, p);
    return p;
  }

private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [k, p] : plans_) fftw_destroy_plan(p);
  }
  std::mutex mutex_;
  std::unordered_map<uint64_t, fftw_plan> plans_;
};

void execute(CArray& a, int sign) {
  if (a.size() == 0) throw std::invalid_argument("fft: empty input");
  fftw_plan p = PlanCache::get(a.size(), sign);
  auto* ptr = reinterpret_cast<fftw_complex*>(a.data());
  fftw_execute_dft(p, ptr, ptr);
}

} // namespace

void forward_inplace(CArray& a) { execute(a, FFTW_FORWARD); }

void inverse_inplace(CArray& a) {
  execute(a, FFTW_BACKWARD);
  a *= 1.0 / static_cast<double>(a.size());
}

CArray forward(const CArray& a) {
  CArray out = a;
  forward_inplace(out);
  return out;
}

CArray inverse(const CArray& a) {
  CArray out = a;
  inverse_inplace(out);
  return out;
}

Eigen::Index next_pow2(Eigen::Index n) {
  Eigen::Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

Eigen::ArrayXd bin_frequencies(Eigen::Index n, double sample_rate_hz) {
  Eigen::ArrayXd f(n);
  const double df = sample_rate_hz / static_cast<double>(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index kk = (k <= (n - 1) / 2) ? k : k - n;
    f[k] = df * static_cast<double>(kk);
  }
  return f;
}

Eigen::ArrayXd angular_frequencies(Eigen::Index n, double sample_rate_hz) {
  return 2.0 * M_PI * bin_frequencies(n, sample_rate_hz);
}

} // namespace olt::fft
