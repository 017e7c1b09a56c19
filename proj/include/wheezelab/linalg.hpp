// Dense row-major matrix plus the few decompositions the classifiers need.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "wheezelab/errors.hpp"

namespace wheezelab {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// In-place lower Cholesky of a symmetric positive-definite matrix.
inline Matrix cholesky(const Matrix& a) {
  if (a.rows() != a.cols()) throw ArgumentError("cholesky: matrix must be square");
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a.at(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l.at(j, k) * l.at(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag)) {
      throw SingularMatrixError("cholesky: matrix not positive definite at pivot " +
                                std::to_string(j));
    }
    const double root = std::sqrt(diag);
    l.at(j, j) = root;
    for (std::size_t i = j + 1; i < n; ++i) {
      double acc = a.at(i, j);
      for (std::size_t k = 0; k < j; ++k) acc -= l.at(i, k) * l.at(j, k);
      l.at(i, j) = acc / root;
    }
  }
  return l;
}

// Solves A x = b given the lower Cholesky factor of A.
inline std::vector<double> cholesky_solve(const Matrix& l, std::span<const double> b) {
  const std::size_t n = l.rows();
  if (b.size() != n) throw ArgumentError("cholesky_solve: size mismatch");
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = b[i];
    for (std::size_t k = 0; k < i; ++k) acc -= l.at(i, k) * y[k];
    y[i] = acc / l.at(i, i);
  }
  std::vector<double> x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double acc = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) acc -= l.at(k, ii) * x[k];
    x[ii] = acc / l.at(ii, ii);
  }
  return x;
}

inline std::vector<double> solve_spd(const Matrix& a, std::span<const double> b) {
  return cholesky_solve(cholesky(a), b);
}

}  // namespace wheezelab
