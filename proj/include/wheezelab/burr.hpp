// Burr type XII distribution: density, CDF, analytic inverse CDF, and a
// seeded truncated sampler. The default parameters are the fit used for
// wheeze-like event durations (alpha scale in seconds).
#pragma once

#include <cmath>
#include <cstdint>

#include "wheezelab/errors.hpp"
#include "wheezelab/rng.hpp"

namespace wheezelab {

struct BurrParams {
  double alpha = 0.2266;  // scale, seconds
  double c = 4.1906;      // first shape
  double k = 0.3029;      // second shape

  void validate() const {
    if (!(alpha > 0.0) || !(c > 0.0) || !(k > 0.0)) {
      throw ArgumentError("BurrParams: alpha, c, k must all be positive");
    }
  }
};

// f(x) = (k*c/alpha) * (x/alpha)^(c-1) / (1 + (x/alpha)^c)^(k+1), x > 0.
inline double burr_pdf(double x, const BurrParams& p) {
  p.validate();
  if (!(x > 0.0)) throw ArgumentError("burr_pdf: x must be positive");
  const double r = x / p.alpha;
  return (p.k * p.c / p.alpha) * std::pow(r, p.c - 1.0) /
         std::pow(1.0 + std::pow(r, p.c), p.k + 1.0);
}

inline double burr_cdf(double x, const BurrParams& p) {
  p.validate();
  if (x <= 0.0) return 0.0;
  return 1.0 - std::pow(1.0 + std::pow(x / p.alpha, p.c), -p.k);
}

// Analytic quantile: alpha * ((1-q)^(-1/k) - 1)^(1/c), q in [0, 1).
inline double burr_inverse_cdf(double q, const BurrParams& p) {
  p.validate();
  if (!(q >= 0.0) || !(q < 1.0)) {
    throw ArgumentError("burr_inverse_cdf: q must lie in [0, 1)");
  }
  if (q == 0.0) return 0.0;
  return p.alpha * std::pow(std::pow(1.0 - q, -1.0 / p.k) - 1.0, 1.0 / p.c);
}

// Location of the density maximum: alpha * ((c-1)/(c*k+1))^(1/c) for c > 1.
inline double burr_mode(const BurrParams& p) {
  p.validate();
  if (p.c <= 1.0) return 0.0;
  return p.alpha * std::pow((p.c - 1.0) / (p.c * p.k + 1.0), 1.0 / p.c);
}

// CDF of the distribution truncated to [lo, hi].
inline double burr_truncated_cdf(double x, double lo, double hi, const BurrParams& p) {
  if (!(lo > 0.0) || !(hi > lo)) throw ArgumentError("burr_truncated_cdf: bad bounds");
  if (x <= lo) return 0.0;
  if (x >= hi) return 1.0;
  const double f_lo = burr_cdf(lo, p);
  const double f_hi = burr_cdf(hi, p);
  return (burr_cdf(x, p) - f_lo) / (f_hi - f_lo);
}

// Inverse-CDF draws rejected until they land inside [lo, hi]. The draw cap
// guards against misconfigured bounds with negligible acceptance mass.
inline double sample_burr_truncated(Rng& rng, const BurrParams& p, double lo, double hi,
                                    std::uint64_t max_draws = 1'000'000) {
  if (!(lo > 0.0) || !(hi > lo)) throw ArgumentError("sample_burr_truncated: bad bounds");
  for (std::uint64_t i = 0; i < max_draws; ++i) {
    const double x = burr_inverse_cdf(rng.next_double(), p);
    if (x >= lo && x <= hi) return x;
  }
  throw InternalError("sample_burr_truncated: draw cap exceeded");
}

}  // namespace wheezelab
