// Regularized linear discriminant analysis. The pooled covariance is blended
// toward its diagonal by gamma, and discriminant coefficients below delta in
// magnitude are zeroed (with everything zeroed the score falls back to the
// class prior log-ratio).
#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "wheezelab/errors.hpp"
#include "wheezelab/linalg.hpp"
#include "wheezelab/models/common.hpp"

namespace wheezelab {

struct LdaModel {
  std::vector<double> weights;
  double bias = 0.0;

  double score(std::span<const double> x) const { return dot(weights, x) + bias; }
};

inline LdaModel train_lda(const Matrix& x, std::span<const int> y, double delta,
                          double gamma) {
  LdaParams{delta, gamma}.validate();
  if (x.rows() != y.size()) throw ArgumentError("train_lda: size mismatch");
  require_two_classes(y);

  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  std::size_t n_pos = 0;
  for (int v : y) n_pos += v != 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos < 2 || n_neg < 2) {
    throw DegenerateDataError("train_lda: each class needs at least 2 samples");
  }

  std::vector<double> mean_pos(d, 0.0), mean_neg(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& m = y[i] != 0 ? mean_pos : mean_neg;
    const auto row = x.row(i);
    for (std::size_t j = 0; j < d; ++j) m[j] += row[j];
  }
  for (std::size_t j = 0; j < d; ++j) {
    mean_pos[j] /= static_cast<double>(n_pos);
    mean_neg[j] /= static_cast<double>(n_neg);
  }

  // Pooled within-class covariance (unbiased, n - 2 denominator).
  Matrix cov(d, d);
  std::vector<double> centered(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = x.row(i);
    const auto& m = y[i] != 0 ? mean_pos : mean_neg;
    for (std::size_t j = 0; j < d; ++j) centered[j] = row[j] - m[j];
    for (std::size_t a = 0; a < d; ++a) {
      const double ca = centered[a];
      for (std::size_t b = a; b < d; ++b) cov.at(a, b) += ca * centered[b];
    }
  }
  const double denom = static_cast<double>(n - 2);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      const double v = cov.at(a, b) / denom;
      cov.at(a, b) = v;
      cov.at(b, a) = v;
    }
  }

  // (1 - gamma) * Sigma + gamma * diag(Sigma)
  if (gamma > 0.0) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        if (a != b) cov.at(a, b) *= 1.0 - gamma;
      }
    }
  }

  // Features with zero pooled variance (constant within both classes, e.g.
  // statistics that an entire corpus shares) carry no discriminative
  // information and would make the covariance singular at every gamma; they
  // are excluded from the solve and get zero coefficients.
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < d; ++j) {
    if (cov.at(j, j) > 0.0) active.push_back(j);
  }
  if (active.empty()) {
    throw DegenerateDataError("train_lda: every feature has zero pooled variance");
  }

  Matrix cov_active(active.size(), active.size());
  std::vector<double> diff_active(active.size());
  for (std::size_t a = 0; a < active.size(); ++a) {
    diff_active[a] = mean_pos[active[a]] - mean_neg[active[a]];
    for (std::size_t b = 0; b < active.size(); ++b) {
      cov_active.at(a, b) = cov.at(active[a], active[b]);
    }
  }

  LdaModel model;
  model.weights.assign(d, 0.0);
  try {
    const auto solved = solve_spd(cov_active, diff_active);
    for (std::size_t a = 0; a < active.size(); ++a) model.weights[active[a]] = solved[a];
  } catch (const SingularMatrixError&) {
    throw SingularMatrixError(
        "train_lda: regularized covariance is singular; try a larger gamma");
  }

  for (auto& w : model.weights) {
    if (std::abs(w) < delta) w = 0.0;
  }

  const double prior_pos = static_cast<double>(n_pos) / static_cast<double>(n);
  double midpoint_term = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    midpoint_term += (mean_pos[j] + mean_neg[j]) * model.weights[j];
  }
  model.bias = std::log(prior_pos / (1.0 - prior_pos)) - 0.5 * midpoint_term;
  return model;
}

}  // namespace wheezelab
