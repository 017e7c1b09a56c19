// Shared model-side plumbing: labeled feature datasets, per-column
// standardization (fit on train only, applied everywhere), hyperparameter
// variants, and the model family enumeration.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wheezelab/errors.hpp"
#include "wheezelab/linalg.hpp"

namespace wheezelab {

enum class ModelFamily { kBaseline, kLda, kSvmLinear, kSvmRbf, kBoost, kCnn };

inline constexpr std::string_view to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::kBaseline: return "baseline";
    case ModelFamily::kLda: return "lda";
    case ModelFamily::kSvmLinear: return "svm_linear";
    case ModelFamily::kSvmRbf: return "svm_rbf";
    case ModelFamily::kBoost: return "boost";
    case ModelFamily::kCnn: return "cnn";
  }
  return "unknown";
}

inline ModelFamily model_family_from_string(std::string_view s) {
  if (s == "baseline") return ModelFamily::kBaseline;
  if (s == "lda") return ModelFamily::kLda;
  if (s == "svm_linear") return ModelFamily::kSvmLinear;
  if (s == "svm_rbf") return ModelFamily::kSvmRbf;
  if (s == "boost") return ModelFamily::kBoost;
  if (s == "cnn") return ModelFamily::kCnn;
  throw ParseError("unknown model family: '" + std::string(s) + "'");
}

// Binary labels: 1 = positive class (wheeze), 0 = negative.
struct Dataset {
  Matrix x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
};

inline void require_two_classes(std::span<const int> y) {
  bool has_pos = false, has_neg = false;
  for (int v : y) (v != 0 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) {
    throw DegenerateDataError("training data must contain both classes");
  }
}

// Per-column affine transform to zero mean / unit standard deviation
// (population std). Columns with zero spread map to zero.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std_dev;

  void apply_row(std::span<const double> in, std::span<double> out) const {
    for (std::size_t j = 0; j < in.size(); ++j) {
      out[j] = std_dev[j] > 0.0 ? (in[j] - mean[j]) / std_dev[j] : 0.0;
    }
  }

  Matrix apply(const Matrix& x) const {
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) apply_row(x.row(i), out.row(i));
    return out;
  }
};

inline Standardizer standardize_fit(const Matrix& x) {
  if (x.rows() < 2) throw ArgumentError("standardize_fit: need at least 2 rows");
  Standardizer s;
  s.mean.assign(x.cols(), 0.0);
  s.std_dev.assign(x.cols(), 0.0);
  const double n = static_cast<double>(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) s.mean[j] += row[j];
  }
  for (auto& m : s.mean) m /= n;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double d = row[j] - s.mean[j];
      s.std_dev[j] += d * d;
    }
  }
  for (auto& v : s.std_dev) v = std::sqrt(v / n);
  return s;
}

// --- hyperparameters ----------------------------------------------------------

struct LogisticParams {
  double l2 = 1e-6;
};

struct LdaParams {
  double delta = 0.0;  // coefficient threshold
  double gamma = 0.0;  // covariance blend toward its diagonal

  void validate() const {
    if (delta < 0.0) throw ArgumentError("LdaParams: delta must be >= 0");
    if (gamma < 0.0 || gamma > 1.0) throw ArgumentError("LdaParams: gamma in [0, 1]");
  }
};

enum class SvmKernel { kLinear, kRbf };

struct SvmParams {
  SvmKernel kernel = SvmKernel::kRbf;
  double box_constraint = 1.0;
  double kernel_scale = 1.0;

  void validate() const {
    if (!(box_constraint > 0.0)) throw ArgumentError("SvmParams: box_constraint > 0");
    if (!(kernel_scale > 0.0)) throw ArgumentError("SvmParams: kernel_scale > 0");
  }
};

struct BoostParams {
  int n_learn = 100;
  double learn_rate = 0.1;

  void validate() const {
    if (n_learn < 1) throw ArgumentError("BoostParams: n_learn >= 1");
    if (!(learn_rate > 0.0) || learn_rate > 1.0) {
      throw ArgumentError("BoostParams: learn_rate in (0, 1]");
    }
  }
};

struct CnnArchitecture {
  int conv_size = 7;
  int conv_filters = 64;
  int pool_size = 2;
  int fc1_size = 10;
  double dropout_rate = 0.5;
  int input_h = 257;  // frequency bins
  int input_w = 59;   // time frames

  void validate() const {
    if (conv_size < 1 || conv_filters < 1 || pool_size < 1 || fc1_size < 1) {
      throw ArchitectureError("CnnArchitecture: sizes must be positive");
    }
    if (conv_size > input_h || conv_size > input_w) {
      throw ArchitectureError("CnnArchitecture: convolution larger than input");
    }
    if (pool_size > conv_out_h() || pool_size > conv_out_w()) {
      throw ArchitectureError("CnnArchitecture: pool larger than conv output");
    }
  }

  // Valid convolution / pooling, both stride 1.
  int conv_out_h() const { return input_h - conv_size + 1; }
  int conv_out_w() const { return input_w - conv_size + 1; }
  int pool_out_h() const { return conv_out_h() - pool_size + 1; }
  int pool_out_w() const { return conv_out_w() - pool_size + 1; }
  std::size_t flat_size() const {
    return static_cast<std::size_t>(pool_out_h()) * pool_out_w() * conv_filters;
  }
};

using HyperParams = std::variant<LogisticParams, LdaParams, SvmParams, BoostParams,
                                 CnnArchitecture>;

struct TrainConfig {
  int max_epochs = 15;
  int batch_size = 128;
  double adam_lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double val_fraction = 0.10;  // CNN-internal validation holdout
  std::uint64_t seed = 0;
  int n_runs = 10;
};

}  // namespace wheezelab
