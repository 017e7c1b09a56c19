// Hyperparameter search: validation-MCC argmax under an evaluation budget.
// Traditional families draw candidates from seeded log-uniform ranges; the
// CNN walks a fixed grid. The search splits its training data 75/25 and
// never sees test data. Candidates that fail to train score -inf; if every
// candidate fails the search itself fails.
#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wheezelab/errors.hpp"
#include "wheezelab/eval.hpp"
#include "wheezelab/models/trained_model.hpp"
#include "wheezelab/rng.hpp"

namespace wheezelab {

struct SearchEvaluation {
  HyperParams params;
  double validation_mcc = -std::numeric_limits<double>::infinity();
  bool failed = false;
  std::string error;
};

struct SearchResult {
  HyperParams best;
  double best_mcc = -std::numeric_limits<double>::infinity();
  std::vector<SearchEvaluation> evaluations;
};

namespace detail {

struct TrainValSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

inline TrainValSplit split_indices(std::size_t n, double val_fraction, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  fisher_yates_shuffle(idx, rng);
  auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  n_val = std::min(std::max<std::size_t>(n_val, 1), n - 1);
  TrainValSplit split;
  split.val.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  return split;
}

inline double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(rng.uniform(std::log(lo), std::log(hi)));
}

inline HyperParams draw_candidate(ModelFamily family, Rng& rng) {
  switch (family) {
    case ModelFamily::kBaseline:
      return LogisticParams{log_uniform(rng, 1e-6, 1e2)};
    case ModelFamily::kLda:
      return LdaParams{log_uniform(rng, 1e-6, 1.0), log_uniform(rng, 1e-6, 1.0)};
    case ModelFamily::kSvmLinear:
    case ModelFamily::kSvmRbf: {
      SvmParams p;
      p.kernel = family == ModelFamily::kSvmLinear ? SvmKernel::kLinear : SvmKernel::kRbf;
      p.box_constraint = log_uniform(rng, 1e-3, 1e3);
      p.kernel_scale = log_uniform(rng, 1e-3, 1e3);
      return p;
    }
    case ModelFamily::kBoost: {
      BoostParams p;
      p.n_learn = 10 + static_cast<int>(rng.below(491));  // [10, 500]
      p.learn_rate = log_uniform(rng, 1e-3, 1.0);
      return p;
    }
    case ModelFamily::kCnn:
      throw ArgumentError("draw_candidate: the CNN uses a fixed grid");
  }
  throw ArgumentError("draw_candidate: unknown family");
}

inline std::vector<CnnArchitecture> cnn_grid(int input_h, int input_w) {
  std::vector<CnnArchitecture> grid;
  for (int conv : {3, 5, 7}) {
    for (int filters : {32, 64}) {
      for (int pool : {2, 4}) {
        for (int fc1 : {10, 20}) {
          CnnArchitecture a;
          a.conv_size = conv;
          a.conv_filters = filters;
          a.pool_size = pool;
          a.fc1_size = fc1;
          a.input_h = input_h;
          a.input_w = input_w;
          grid.push_back(a);
        }
      }
    }
  }
  return grid;
}

inline double validation_mcc_of_predictions(std::span<const int> labels,
                                            std::span<const int> predictions) {
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool actual = labels[i] != 0;
    const bool pred = predictions[i] != 0;
    if (pred && actual) ++c.tp;
    else if (pred && !actual) ++c.fp;
    else if (!pred && actual) ++c.fn;
    else ++c.tn;
  }
  return metrics(c).mcc;
}

}  // namespace detail

// Search over feature-based families.
inline SearchResult hyper_search(ModelFamily family, const Matrix& x,
                                 std::span<const int> y, std::size_t budget,
                                 std::uint64_t seed, double val_fraction = 0.25) {
  if (budget < 1) throw ArgumentError("hyper_search: budget must be >= 1");
  if (family == ModelFamily::kCnn) {
    throw ArgumentError("hyper_search: use hyper_search_cnn for the CNN");
  }
  Rng rng(mix_seed(seed, 0x5EA4C4ULL));
  const auto split = detail::split_indices(x.rows(), val_fraction, rng);

  Matrix x_train(split.train.size(), x.cols());
  std::vector<int> y_train(split.train.size());
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    const auto row = x.row(split.train[i]);
    std::copy(row.begin(), row.end(), x_train.row(i).begin());
    y_train[i] = y[split.train[i]];
  }

  SearchResult result;
  for (std::size_t eval = 0; eval < budget; ++eval) {
    SearchEvaluation entry;
    entry.params = detail::draw_candidate(family, rng);
    try {
      const TrainedModel model = train_feature_model(family, entry.params, x_train, y_train);
      std::vector<int> labels(split.val.size()), preds(split.val.size());
      for (std::size_t i = 0; i < split.val.size(); ++i) {
        labels[i] = y[split.val[i]];
        preds[i] = model.predict(x.row(split.val[i])) ? 1 : 0;
      }
      entry.validation_mcc = detail::validation_mcc_of_predictions(labels, preds);
    } catch (const Error& e) {
      entry.failed = true;
      entry.error = e.what();
    }
    result.evaluations.push_back(entry);
    if (!entry.failed && entry.validation_mcc > result.best_mcc) {
      result.best_mcc = entry.validation_mcc;
      result.best = entry.params;
    }
  }

  if (!std::isfinite(result.best_mcc)) {
    std::string msg = "hyper_search: every candidate failed to train:";
    for (const auto& e : result.evaluations) msg += "\n  " + e.error;
    throw SearchError(msg);
  }
  return result;
}

// Grid search over CNN architectures, truncated at the budget in fixed grid
// order (conv size, filters, pool, fc1).
inline SearchResult hyper_search_cnn(std::span<const std::vector<double>> images,
                                     std::span<const int> y, std::size_t budget,
                                     std::uint64_t seed, const TrainConfig& base_cfg,
                                     int input_h, int input_w,
                                     double val_fraction = 0.25, unsigned jobs = 0) {
  if (budget < 1) throw ArgumentError("hyper_search_cnn: budget must be >= 1");
  Rng rng(mix_seed(seed, 0x5EA4C4ULL));
  const auto split = detail::split_indices(images.size(), val_fraction, rng);

  std::vector<std::vector<double>> train_images;
  std::vector<int> y_train;
  train_images.reserve(split.train.size());
  for (std::size_t i : split.train) {
    train_images.push_back(images[i]);
    y_train.push_back(y[i]);
  }

  SearchResult result;
  auto grid = detail::cnn_grid(input_h, input_w);
  if (grid.size() > budget) grid.resize(budget);
  for (const auto& arch : grid) {
    SearchEvaluation entry;
    entry.params = arch;
    try {
      TrainConfig cfg = base_cfg;
      cfg.seed = mix_seed(seed, 0xC11ULL);
      const CnnTrainResult trained = cnn_train(arch, train_images, y_train, cfg, jobs);
      std::vector<std::vector<double>> val_images;
      std::vector<int> labels;
      for (std::size_t i : split.val) {
        val_images.push_back(images[i]);
        labels.push_back(y[i]);
      }
      const auto probs = cnn_forward(trained.model, val_images);
      std::vector<int> preds(labels.size());
      for (std::size_t i = 0; i < labels.size(); ++i) preds[i] = probs[i][1] > 0.5 ? 1 : 0;
      entry.validation_mcc = detail::validation_mcc_of_predictions(labels, preds);
    } catch (const Error& e) {
      entry.failed = true;
      entry.error = e.what();
    }
    result.evaluations.push_back(entry);
    if (!entry.failed && entry.validation_mcc > result.best_mcc) {
      result.best_mcc = entry.validation_mcc;
      result.best = entry.params;
    }
  }

  if (!std::isfinite(result.best_mcc)) {
    std::string msg = "hyper_search_cnn: every candidate failed to train:";
    for (const auto& e : result.evaluations) msg += "\n  " + e.error;
    throw SearchError(msg);
  }
  return result;
}

}  // namespace wheezelab
