// A trained classifier plus the standardization fitted with it, with a
// uniform train/score surface over the feature-based families. The CNN keeps
// its own training entry point (it consumes spectrogram images, not feature
// vectors) but shares the container and the file format.
#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "wheezelab/errors.hpp"
#include "wheezelab/models/cnn.hpp"
#include "wheezelab/models/common.hpp"
#include "wheezelab/models/lda.hpp"
#include "wheezelab/models/logistic.hpp"
#include "wheezelab/models/logitboost.hpp"
#include "wheezelab/models/svm.hpp"

namespace wheezelab {

struct TrainedModel {
  ModelFamily family = ModelFamily::kBaseline;
  HyperParams hyper;
  Standardizer standardizer;  // empty for the CNN
  std::variant<LogisticModel, LdaModel, SvmModel, BoostModel, CnnModel> impl;

  // Decision score for one raw (unstandardized) feature vector; positive
  // means wheeze.
  double score(std::span<const double> raw) const {
    std::vector<double> z(raw.size());
    if (!standardizer.mean.empty()) {
      standardizer.apply_row(raw, z);
    } else {
      std::copy(raw.begin(), raw.end(), z.begin());
    }
    return std::visit(
        [&z](const auto& model) -> double {
          using T = std::decay_t<decltype(model)>;
          if constexpr (std::is_same_v<T, CnnModel>) {
            throw ArgumentError("TrainedModel::score: CNN scores spectrograms, not features");
          } else {
            return model.score(z);
          }
        },
        impl);
  }

  bool predict(std::span<const double> raw) const { return score(raw) > 0.0; }
};

// Trains one of the feature-based families on raw features (standardization
// is fitted here, on the given data only).
inline TrainedModel train_feature_model(ModelFamily family, const HyperParams& hyper,
                                        const Matrix& x_raw, std::span<const int> y) {
  TrainedModel out;
  out.family = family;
  out.hyper = hyper;
  out.standardizer = standardize_fit(x_raw);
  const Matrix x = out.standardizer.apply(x_raw);

  switch (family) {
    case ModelFamily::kBaseline: {
      const auto& p = std::get<LogisticParams>(hyper);
      out.impl = train_logistic(x, y, p.l2);
      break;
    }
    case ModelFamily::kLda: {
      const auto& p = std::get<LdaParams>(hyper);
      out.impl = train_lda(x, y, p.delta, p.gamma);
      break;
    }
    case ModelFamily::kSvmLinear:
    case ModelFamily::kSvmRbf: {
      auto p = std::get<SvmParams>(hyper);
      p.kernel = family == ModelFamily::kSvmLinear ? SvmKernel::kLinear : SvmKernel::kRbf;
      out.impl = train_svm(x, y, p);
      break;
    }
    case ModelFamily::kBoost: {
      const auto& p = std::get<BoostParams>(hyper);
      out.impl = train_logitboost(x, y, p);
      break;
    }
    case ModelFamily::kCnn:
      throw ArgumentError("train_feature_model: CNN is trained on spectrograms");
  }
  return out;
}

}  // namespace wheezelab
