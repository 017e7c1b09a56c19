// L2-penalized logistic regression trained by damped Newton iterations from
// a zero start, so fitting is fully deterministic. The intercept is not
// penalized.
#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "wheezelab/errors.hpp"
#include "wheezelab/linalg.hpp"
#include "wheezelab/models/common.hpp"

namespace wheezelab {

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;

  double score(std::span<const double> x) const {
    return dot(weights, x) + bias;
  }
};

namespace detail {

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

inline double logistic_loss(const Matrix& x, std::span<const int> y,
                            const LogisticModel& model, double l2) {
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double z = model.score(x.row(i));
    // -log p(y|z) written in a saturation-safe form
    loss += std::log1p(std::exp(-std::abs(z))) + (y[i] != 0 ? std::max(-z, 0.0) : std::max(z, 0.0));
  }
  for (double w : model.weights) loss += 0.5 * l2 * w * w;
  return loss;
}

// Gradient over [weights..., bias]; the bias entry carries no penalty.
inline std::vector<double> logistic_gradient(const Matrix& x, std::span<const int> y,
                                             const LogisticModel& model, double l2) {
  const std::size_t d = x.cols();
  std::vector<double> grad(d + 1, 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    const double r = sigmoid(model.score(row)) - (y[i] != 0 ? 1.0 : 0.0);
    for (std::size_t j = 0; j < d; ++j) grad[j] += r * row[j];
    grad[d] += r;
  }
  for (std::size_t j = 0; j < d; ++j) grad[j] += l2 * model.weights[j];
  return grad;
}

}  // namespace detail

inline LogisticModel train_logistic(const Matrix& x, std::span<const int> y, double l2,
                                    int max_iter = 500, double grad_tol = 1e-6) {
  if (x.rows() != y.size()) throw ArgumentError("train_logistic: size mismatch");
  if (l2 < 0.0) throw ArgumentError("train_logistic: l2 must be >= 0");
  require_two_classes(y);

  const std::size_t d = x.cols();
  LogisticModel model;
  model.weights.assign(d, 0.0);

  double loss = detail::logistic_loss(x, y, model, l2);
  for (int iter = 0; iter < max_iter; ++iter) {
    const auto grad = detail::logistic_gradient(x, y, model, l2);
    double norm = 0.0;
    for (double g : grad) norm += g * g;
    if (std::sqrt(norm) < grad_tol) break;

    // Newton system over [w, b]. A small ridge keeps the Hessian invertible
    // when the sigmoid saturates on separable data.
    Matrix hess(d + 1, d + 1);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const auto row = x.row(i);
      const double p = detail::sigmoid(model.score(row));
      const double w = std::max(p * (1.0 - p), 1e-10);
      for (std::size_t a = 0; a < d; ++a) {
        const double wa = w * row[a];
        for (std::size_t b = a; b < d; ++b) hess.at(a, b) += wa * row[b];
        hess.at(a, d) += wa;
      }
      hess.at(d, d) += w;
    }
    for (std::size_t a = 0; a < d; ++a) hess.at(a, a) += l2 + 1e-10;
    hess.at(d, d) += 1e-10;
    for (std::size_t a = 0; a < d + 1; ++a) {
      for (std::size_t b = 0; b < a; ++b) hess.at(a, b) = hess.at(b, a);
    }

    const auto step = solve_spd(hess, grad);
    double step_scale = 1.0;
    for (int halving = 0; halving < 30; ++halving) {
      LogisticModel trial = model;
      for (std::size_t j = 0; j < d; ++j) trial.weights[j] -= step_scale * step[j];
      trial.bias -= step_scale * step[d];
      const double trial_loss = detail::logistic_loss(x, y, trial, l2);
      if (trial_loss <= loss + 1e-12) {
        model = std::move(trial);
        loss = trial_loss;
        break;
      }
      step_scale *= 0.5;
    }
  }
  return model;
}

}  // namespace wheezelab
