// Soft-margin binary SVM trained by sequential minimal optimization with
// second-order working-set selection. Stops when the maximal KKT violation
// drops below eps. Kernels follow the kernel-scale convention of dividing
// features by the scale: linear (u.v)/s^2, rbf exp(-|u-v|^2 / (2 s^2)).
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <span>
#include <unordered_map>
#include <vector>

#include "wheezelab/errors.hpp"
#include "wheezelab/linalg.hpp"
#include "wheezelab/models/common.hpp"

namespace wheezelab {

struct SvmModel {
  SvmParams params;
  Matrix support_vectors;
  std::vector<double> coefficients;  // alpha_i * y_i per support vector
  double rho = 0.0;
  int iterations = 0;

  double kernel(std::span<const double> u, std::span<const double> v) const {
    const double s2 = params.kernel_scale * params.kernel_scale;
    if (params.kernel == SvmKernel::kLinear) return dot(u, v) / s2;
    double d2 = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double d = u[i] - v[i];
      d2 += d * d;
    }
    return std::exp(-d2 / (2.0 * s2));
  }

  double score(std::span<const double> x) const {
    double acc = -rho;
    for (std::size_t i = 0; i < coefficients.size(); ++i) {
      acc += coefficients[i] * kernel(support_vectors.row(i), x);
    }
    return acc;
  }
};

// Carries the best iterate reached before the iteration cap.
class SvmConvergenceError : public Error {
 public:
  SvmConvergenceError(const std::string& msg, SvmModel best)
      : Error(msg), best_model(std::move(best)) {}
  SvmModel best_model;
};

namespace detail {

// On-demand kernel rows with LRU eviction under a byte budget.
class KernelCache {
 public:
  KernelCache(const Matrix& x, const SvmParams& params, std::size_t budget_bytes)
      : x_(x), params_(params) {
    const std::size_t row_bytes = x.rows() * sizeof(double);
    max_rows_ = std::max<std::size_t>(2, budget_bytes / std::max<std::size_t>(1, row_bytes));
    diag_.resize(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) diag_[i] = kernel(i, i);
  }

  double diag(std::size_t i) const { return diag_[i]; }

  const std::vector<double>& row(std::size_t i) {
    auto it = index_.find(i);
    if (it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second.lru_it);
      return it->second.values;
    }
    if (index_.size() >= max_rows_) {
      const std::size_t victim = lru_.back();
      lru_.pop_back();
      index_.erase(victim);
    }
    lru_.push_front(i);
    Entry entry;
    entry.lru_it = lru_.begin();
    entry.values.resize(x_.rows());
    for (std::size_t j = 0; j < x_.rows(); ++j) entry.values[j] = kernel(i, j);
    return index_.emplace(i, std::move(entry)).first->second.values;
  }

 private:
  double kernel(std::size_t i, std::size_t j) const {
    const double s2 = params_.kernel_scale * params_.kernel_scale;
    if (params_.kernel == SvmKernel::kLinear) return dot(x_.row(i), x_.row(j)) / s2;
    double d2 = 0.0;
    const auto a = x_.row(i);
    const auto b = x_.row(j);
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double d = a[k] - b[k];
      d2 += d * d;
    }
    return std::exp(-d2 / (2.0 * s2));
  }

  struct Entry {
    std::vector<double> values;
    std::list<std::size_t>::iterator lru_it;
  };

  const Matrix& x_;
  SvmParams params_;
  std::size_t max_rows_;
  std::vector<double> diag_;
  std::list<std::size_t> lru_;
  std::unordered_map<std::size_t, Entry> index_;
};

}  // namespace detail

inline SvmModel train_svm(const Matrix& x, std::span<const int> y_labels,
                          const SvmParams& params, double eps = 1e-3,
                          long long max_iter = 10'000'000,
                          std::size_t cache_budget_bytes = 256ull << 20) {
  params.validate();
  if (x.rows() != y_labels.size()) throw ArgumentError("train_svm: size mismatch");
  require_two_classes(y_labels);

  const std::size_t n = x.rows();
  const double c_box = params.box_constraint;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = y_labels[i] != 0 ? 1.0 : -1.0;

  detail::KernelCache cache(x, params, cache_budget_bytes);
  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);  // gradient of 1/2 a'Qa - e'a at a = 0
  constexpr double kTau = 1e-12;

  auto build_model = [&](long long iters) {
    SvmModel model;
    model.params = params;
    model.iterations = static_cast<int>(iters);
    std::vector<std::size_t> sv;
    for (std::size_t i = 0; i < n; ++i) {
      if (alpha[i] > 0.0) sv.push_back(i);
    }
    model.support_vectors = Matrix(sv.size(), x.cols());
    model.coefficients.resize(sv.size());
    for (std::size_t s = 0; s < sv.size(); ++s) {
      const auto row = x.row(sv[s]);
      std::copy(row.begin(), row.end(), model.support_vectors.row(s).begin());
      model.coefficients[s] = alpha[sv[s]] * y[sv[s]];
    }
    // rho from free support vectors, else the bound midpoint
    double upper = std::numeric_limits<double>::infinity();
    double lower = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double yg = y[i] * grad[i];
      if (alpha[i] >= c_box) {
        if (y[i] < 0.0) upper = std::min(upper, yg);
        else lower = std::max(lower, yg);
      } else if (alpha[i] <= 0.0) {
        if (y[i] > 0.0) upper = std::min(upper, yg);
        else lower = std::max(lower, yg);
      } else {
        ++n_free;
        sum_free += yg;
      }
    }
    model.rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (upper + lower) / 2.0;
    return model;
  };

  long long iter = 0;
  for (; iter < max_iter; ++iter) {
    // select i: maximal -y G over the "up" set
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t i = -1;
    for (std::size_t t = 0; t < n; ++t) {
      const bool in_up = (y[t] > 0.0 && alpha[t] < c_box) || (y[t] < 0.0 && alpha[t] > 0.0);
      if (in_up && -y[t] * grad[t] >= gmax) {
        gmax = -y[t] * grad[t];
        i = static_cast<std::ptrdiff_t>(t);
      }
    }
    // select j: most improving second-order candidate in the "low" set
    std::ptrdiff_t j = -1;
    double best_obj = std::numeric_limits<double>::infinity();
    const std::vector<double>& q_i = i >= 0 ? cache.row(static_cast<std::size_t>(i))
                                            : cache.row(0);
    for (std::size_t t = 0; t < n; ++t) {
      const bool in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c_box);
      if (!in_low) continue;
      const double neg_yg = y[t] * grad[t];
      gmax2 = std::max(gmax2, neg_yg);
      const double grad_diff = gmax + neg_yg;
      if (grad_diff > 0.0 && i >= 0) {
        // curvature along the feasible pair direction: K_ii + K_tt - 2 K_it
        double quad = cache.diag(static_cast<std::size_t>(i)) + cache.diag(t) - 2.0 * q_i[t];
        if (quad <= 0.0) quad = kTau;
        const double obj = -(grad_diff * grad_diff) / quad;
        if (obj <= best_obj) {
          best_obj = obj;
          j = static_cast<std::ptrdiff_t>(t);
        }
      }
    }

    if (i < 0 || j < 0 || gmax + gmax2 < eps) break;  // KKT satisfied within eps

    const auto ii = static_cast<std::size_t>(i);
    const auto jj = static_cast<std::size_t>(j);
    const std::vector<double>& q_j = cache.row(jj);

    const double old_ai = alpha[ii];
    const double old_aj = alpha[jj];
    if (y[ii] != y[jj]) {
      double quad = cache.diag(ii) + cache.diag(jj) - 2.0 * q_i[jj];
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[ii] - grad[jj]) / quad;
      const double diff = alpha[ii] - alpha[jj];
      alpha[ii] += delta;
      alpha[jj] += delta;
      if (diff > 0.0 && alpha[jj] < 0.0) {
        alpha[jj] = 0.0;
        alpha[ii] = diff;
      } else if (diff <= 0.0 && alpha[ii] < 0.0) {
        alpha[ii] = 0.0;
        alpha[jj] = -diff;
      }
      if (diff > 0.0 && alpha[ii] > c_box) {
        alpha[ii] = c_box;
        alpha[jj] = c_box - diff;
      } else if (diff <= 0.0 && alpha[jj] > c_box) {
        alpha[jj] = c_box;
        alpha[ii] = c_box + diff;
      }
    } else {
      double quad = cache.diag(ii) + cache.diag(jj) - 2.0 * q_i[jj];
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[ii] - grad[jj]) / quad;
      const double sum = alpha[ii] + alpha[jj];
      alpha[ii] -= delta;
      alpha[jj] += delta;
      if (sum > c_box && alpha[ii] > c_box) {
        alpha[ii] = c_box;
        alpha[jj] = sum - c_box;
      } else if (sum <= c_box && alpha[jj] < 0.0) {
        alpha[jj] = 0.0;
        alpha[ii] = sum;
      }
      if (sum > c_box && alpha[jj] > c_box) {
        alpha[jj] = c_box;
        alpha[ii] = sum - c_box;
      } else if (sum <= c_box && alpha[ii] < 0.0) {
        alpha[ii] = 0.0;
        alpha[jj] = sum;
      }
    }

    const double d_ai = alpha[ii] - old_ai;
    const double d_aj = alpha[jj] - old_aj;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += y[ii] * y[t] * q_i[t] * d_ai + y[jj] * y[t] * q_j[t] * d_aj;
    }
  }

  if (iter >= max_iter) {
    throw SvmConvergenceError("train_svm: iteration cap reached before KKT tolerance",
                              build_model(iter));
  }
  return build_model(iter);
}

}  // namespace wheezelab
