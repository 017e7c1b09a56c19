// LogitBoost with depth-1 regression trees (stumps) as weak learners.
// Each round fits a stump to the Newton working response by weighted least
// squares and adds half the fitted value, shrunk by the learning rate, to the
// additive score F. Classification is by sign(F). Training is deterministic:
// ties in the stump search resolve to the lowest feature index and threshold.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "wheezelab/errors.hpp"
#include "wheezelab/linalg.hpp"
#include "wheezelab/models/common.hpp"

namespace wheezelab {

struct Stump {
  std::size_t feature = 0;
  double threshold = 0.0;  // x[feature] < threshold -> left value, else right
  double left = 0.0;
  double right = 0.0;

  double value(std::span<const double> x) const {
    return x[feature] < threshold ? left : right;
  }
};

struct BoostModel {
  BoostParams params;
  std::vector<Stump> stumps;
  std::vector<double> train_log_loss;  // recorded per round

  double score(std::span<const double> x) const {
    double f = 0.0;
    for (const auto& s : stumps) f += s.value(x);
    return f;
  }
};

namespace detail {

// Best weighted-least-squares stump for response z with weights w.
// Uses per-feature presorted orderings supplied by the caller.
inline Stump fit_stump(const Matrix& x, std::span<const double> z,
                       std::span<const double> w,
                       const std::vector<std::vector<std::size_t>>& order) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const double total_w = std::accumulate(w.begin(), w.end(), 0.0);
  double total_wz = 0.0;
  for (std::size_t i = 0; i < n; ++i) total_wz += w[i] * z[i];

  Stump best;
  best.left = best.right = total_wz / total_w;  // no-split fallback
  // SSE improvement of a split: (sum_wz_l)^2/w_l + (sum_wz_r)^2/w_r, constant
  // terms dropped.
  double best_gain = total_wz * total_wz / total_w;

  for (std::size_t j = 0; j < d; ++j) {
    const auto& idx = order[j];
    double wl = 0.0, wzl = 0.0;
    for (std::size_t r = 0; r + 1 < n; ++r) {
      const std::size_t i = idx[r];
      wl += w[i];
      wzl += w[i] * z[i];
      const double xr = x.at(idx[r + 1], j);
      const double xl = x.at(i, j);
      if (xr <= xl) continue;  // no boundary between equal values
      const double wr = total_w - wl;
      if (wl <= 0.0 || wr <= 0.0) continue;
      const double wzr = total_wz - wzl;
      const double gain = wzl * wzl / wl + wzr * wzr / wr;
      if (gain > best_gain + 1e-15) {
        best_gain = gain;
        best.feature = j;
        best.threshold = 0.5 * (xl + xr);
        best.left = wzl / wl;
        best.right = wzr / wr;
      }
    }
  }
  return best;
}

}  // namespace detail

inline BoostModel train_logitboost(const Matrix& x, std::span<const int> y,
                                   const BoostParams& params) {
  params.validate();
  if (x.rows() != y.size()) throw ArgumentError("train_logitboost: size mismatch");
  require_two_classes(y);

  const std::size_t n = x.rows();
  const std::size_t d = x.cols();

  std::vector<std::vector<std::size_t>> order(d);
  for (std::size_t j = 0; j < d; ++j) {
    auto& idx = order[j];
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&x, j](std::size_t a, std::size_t b) {
      return x.at(a, j) < x.at(b, j);
    });
  }

  BoostModel model;
  model.params = params;
  model.stumps.reserve(static_cast<std::size_t>(params.n_learn));
  model.train_log_loss.reserve(static_cast<std::size_t>(params.n_learn));

  std::vector<double> f(n, 0.0);
  std::vector<double> p(n, 0.5);
  std::vector<double> z(n), w(n);
  constexpr double kPClamp = 1e-10;
  constexpr double kZMax = 4.0;

  for (int round = 0; round < params.n_learn; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double target = y[i] != 0 ? 1.0 : 0.0;
      const double pi = std::clamp(p[i], kPClamp, 1.0 - kPClamp);
      const double wi = std::max(pi * (1.0 - pi), kPClamp);
      z[i] = std::clamp((target - pi) / wi, -kZMax, kZMax);
      w[i] = wi;
    }
    Stump stump = detail::fit_stump(x, z, w, order);
    // Newton step is half the fitted value, then shrinkage.
    stump.left *= 0.5 * params.learn_rate;
    stump.right *= 0.5 * params.learn_rate;
    model.stumps.push_back(stump);

    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      f[i] += stump.value(x.row(i));
      p[i] = 1.0 / (1.0 + std::exp(-2.0 * f[i]));
      const double target = y[i] != 0 ? 1.0 : 0.0;
      const double pi = std::clamp(p[i], kPClamp, 1.0 - kPClamp);
      loss -= target * std::log(pi) + (1.0 - target) * std::log(1.0 - pi);
    }
    model.train_log_loss.push_back(loss / static_cast<double>(n));
  }
  return model;
}

}  // namespace wheezelab
