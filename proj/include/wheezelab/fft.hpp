// Iterative radix-2 FFT, enough for the fixed 512-point analysis used here.
#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "wheezelab/errors.hpp"

namespace wheezelab {

inline void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) {
    throw ArgumentError("fft_inplace: size must be a power of two");
  }
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// Magnitudes of bins 0..n/2 of the DFT of a real frame.
inline std::vector<double> magnitude_spectrum(std::span<const double> frame) {
  std::vector<std::complex<double>> buf(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i];
  fft_inplace(buf);
  std::vector<double> mags(frame.size() / 2 + 1);
  for (std::size_t i = 0; i < mags.size(); ++i) mags[i] = std::abs(buf[i]);
  return mags;
}

}  // namespace wheezelab
