#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace mizaj::detail {

// FFTW planning is not thread-safe; execution is.
inline std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t m = 1;
  while (m < n) m <<= 1;
  return m;
}

// Real-to-complex DFT of x zero-padded to length m; returns bins 0..m/2.
inline std::vector<std::complex<double>> rfft(std::span<const double> x, std::size_t m) {
  struct RealBuf {
    double* p;
    ~RealBuf() { fftw_free(p); }
  };
  struct CplxBuf {
    fftw_complex* p;
    ~CplxBuf() { fftw_free(p); }
  };
  const std::size_t nbins = m / 2 + 1;
  RealBuf in{fftw_alloc_real(m)};
  CplxBuf out{fftw_alloc_complex(nbins)};
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_plan_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(m), in.p, out.p, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < m; ++i) in.p[i] = i < x.size() ? x[i] : 0.0;
  fftw_execute(plan);
  std::vector<std::complex<double>> result(nbins);
  for (std::size_t k = 0; k < nbins; ++k) result[k] = {out.p[k][0], out.p[k][1]};
  {
    std::lock_guard lock(fftw_plan_mutex());
    fftw_destroy_plan(plan);
  }
  return result;
}

}  // namespace mizaj::detail
