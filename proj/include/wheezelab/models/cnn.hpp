// Small convolutional network over spectrogram images with the fixed stack
//   conv(valid, stride 1) -> batch norm -> ReLU -> max pool(stride 1)
//   -> dropout -> fully connected -> dropout -> fully connected -> softmax
// trained with Adam on cross-entropy. Everything is seeded and the parallel
// loops partition disjoint outputs, so training is bit-reproducible for a
// given seed regardless of worker count.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wheezelab/errors.hpp"
#include "wheezelab/models/common.hpp"
#include "wheezelab/rng.hpp"
#include "wheezelab/threading.hpp"

namespace wheezelab {

struct CnnWeights {
  std::vector<double> conv_w;  // [filter][ky][kx], single input channel
  std::vector<double> conv_b;  // [filter]
  std::vector<double> bn_gamma;
  std::vector<double> bn_beta;
  std::vector<double> fc1_w;  // [fc1][flat]
  std::vector<double> fc1_b;
  std::vector<double> fc2_w;  // [2][fc1]
  std::vector<double> fc2_b;  // [2]

  void resize(const CnnArchitecture& a) {
    conv_w.assign(static_cast<std::size_t>(a.conv_filters) * a.conv_size * a.conv_size, 0.0);
    conv_b.assign(a.conv_filters, 0.0);
    bn_gamma.assign(a.conv_filters, 1.0);
    bn_beta.assign(a.conv_filters, 0.0);
    fc1_w.assign(static_cast<std::size_t>(a.fc1_size) * a.flat_size(), 0.0);
    fc1_b.assign(a.fc1_size, 0.0);
    fc2_w.assign(2 * static_cast<std::size_t>(a.fc1_size), 0.0);
    fc2_b.assign(2, 0.0);
  }
};

struct CnnModel {
  CnnArchitecture arch;
  CnnWeights weights;
  std::vector<double> bn_run_mean;  // running statistics for inference
  std::vector<double> bn_run_var;
};

namespace cnn_detail {

inline constexpr double kBnEps = 1e-5;

struct SampleState {
  std::vector<double> conv_out;      // [f][y][x]
  std::vector<int> pool_argmax;      // flat index into conv grid per pooled cell
  std::vector<std::uint8_t> drop1;   // keep masks
  std::vector<std::uint8_t> drop2;
  std::vector<double> flat_dropped;  // fc1 input
  std::vector<double> fc1_out;       // pre second dropout
  std::vector<double> fc1_dropped;   // fc2 input
  std::array<double, 2> probs{};
  // backward scratch
  std::array<double, 2> dlogits{};
  std::vector<double> dfc1_out;
  std::vector<double> d_bn_out;  // becomes d_conv_out after the BN backward
};

inline void conv_forward(const CnnArchitecture& a, const CnnWeights& w,
                         std::span<const double> image, std::vector<double>& out) {
  const int kh = a.conv_size;
  const int oh = a.conv_out_h();
  const int ow = a.conv_out_w();
  out.assign(static_cast<std::size_t>(a.conv_filters) * oh * ow, 0.0);
  for (int f = 0; f < a.conv_filters; ++f) {
    const double* wf = w.conv_w.data() + static_cast<std::size_t>(f) * kh * kh;
    double* of = out.data() + static_cast<std::size_t>(f) * oh * ow;
    const double bias = w.conv_b[f];
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double acc = bias;
        for (int ky = 0; ky < kh; ++ky) {
          const double* in_row = image.data() + static_cast<std::size_t>(y + ky) * a.input_w + x;
          const double* w_row = wf + static_cast<std::size_t>(ky) * kh;
          for (int kx = 0; kx < kh; ++kx) acc += w_row[kx] * in_row[kx];
        }
        of[static_cast<std::size_t>(y) * ow + x] = acc;
      }
    }
  }
}

// bn -> relu -> pool -> dropout -> fc1 -> dropout -> fc2 -> softmax.
// mean/var are per-channel statistics (batch or running, caller's choice).
inline void head_forward(const CnnArchitecture& a, const CnnWeights& w,
                         std::span<const double> mean, std::span<const double> var,
                         bool use_dropout, Rng* rng, SampleState& s) {
  const int oh = a.conv_out_h();
  const int ow = a.conv_out_w();
  const int ph = a.pool_out_h();
  const int pw = a.pool_out_w();
  const std::size_t plane = static_cast<std::size_t>(oh) * ow;
  const std::size_t flat = a.flat_size();
  const double keep = 1.0 - a.dropout_rate;

  // Normalized activations are only needed until pooling; keep them local.
  std::vector<double> bn_out(s.conv_out.size());
  for (int f = 0; f < a.conv_filters; ++f) {
    const double inv_sigma = 1.0 / std::sqrt(var[f] + kBnEps);
    const double g = w.bn_gamma[f];
    const double b = w.bn_beta[f];
    const double m = mean[f];
    const double* in = s.conv_out.data() + f * plane;
    double* out = bn_out.data() + f * plane;
    for (std::size_t i = 0; i < plane; ++i) out[i] = g * (in[i] - m) * inv_sigma + b;
  }

  // ReLU fused into pooling: negative activations clamp to zero, argmax kept
  // for the backward scatter (-1 marks an all-clamped window).
  s.pool_argmax.assign(flat, -1);
  s.flat_dropped.assign(flat, 0.0);
  s.drop1.assign(use_dropout ? flat : 0, 1);
  if (use_dropout) {
    for (auto& m : s.drop1) m = rng->next_double() < keep ? 1 : 0;
  }
  std::size_t cell = 0;
  for (int f = 0; f < a.conv_filters; ++f) {
    const double* bn = bn_out.data() + f * plane;
    for (int y = 0; y < ph; ++y) {
      for (int x = 0; x < pw; ++x, ++cell) {
        double best = 0.0;
        int best_idx = -1;
        for (int py = 0; py < a.pool_size; ++py) {
          for (int px = 0; px < a.pool_size; ++px) {
            const int idx = (y + py) * ow + (x + px);
            const double v = bn[idx];
            if (v > best) {
              best = v;
              best_idx = idx;
            }
          }
        }
        s.pool_argmax[cell] = best_idx;
        double v = best;
        if (use_dropout) v = s.drop1[cell] ? v / keep : 0.0;
        s.flat_dropped[cell] = v;
      }
    }
  }

  s.fc1_out.assign(a.fc1_size, 0.0);
  for (int j = 0; j < a.fc1_size; ++j) {
    const double* row = w.fc1_w.data() + static_cast<std::size_t>(j) * flat;
    double acc = w.fc1_b[j];
    for (std::size_t i = 0; i < flat; ++i) acc += row[i] * s.flat_dropped[i];
    s.fc1_out[j] = acc;
  }

  s.drop2.assign(use_dropout ? a.fc1_size : 0, 1);
  s.fc1_dropped = s.fc1_out;
  if (use_dropout) {
    for (int j = 0; j < a.fc1_size; ++j) {
      s.drop2[j] = rng->next_double() < keep ? 1 : 0;
      s.fc1_dropped[j] = s.drop2[j] ? s.fc1_out[j] / keep : 0.0;
    }
  }

  std::array<double, 2> logits{};
  for (int k = 0; k < 2; ++k) {
    const double* row = w.fc2_w.data() + static_cast<std::size_t>(k) * a.fc1_size;
    double acc = w.fc2_b[k];
    for (int j = 0; j < a.fc1_size; ++j) acc += row[j] * s.fc1_dropped[j];
    logits[k] = acc;
  }
  const double mx = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - mx);
  const double e1 = std::exp(logits[1] - mx);
  s.probs = {e0 / (e0 + e1), e1 / (e0 + e1)};
}

}  // namespace cnn_detail

// Inference probabilities for a batch of images (dropout off, running batch
// norm statistics). Rows sum to 1.
inline std::vector<std::array<double, 2>> cnn_forward(
    const CnnModel& model, std::span<const std::vector<double>> batch) {
  model.arch.validate();
  const std::size_t expected =
      static_cast<std::size_t>(model.arch.input_h) * model.arch.input_w;
  std::vector<std::array<double, 2>> out(batch.size());
  parallel_for(batch.size(), 0, [&](std::size_t i) {
    if (batch[i].size() != expected) {
      throw ArchitectureError("cnn_forward: image size mismatch");
    }
    cnn_detail::SampleState s;
    cnn_detail::conv_forward(model.arch, model.weights, batch[i], s.conv_out);
    cnn_detail::head_forward(model.arch, model.weights, model.bn_run_mean,
                             model.bn_run_var, false, nullptr, s);
    out[i] = s.probs;
  });
  return out;
}

namespace cnn_detail {

// Per-parameter-array Adam state.
struct AdamState {
  std::vector<double> m, v;
  void resize(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
  }
};

struct Gradients {
  CnnWeights g;  // same shapes as the weights
  void resize(const CnnArchitecture& a) {
    g.resize(a);
    g.bn_gamma.assign(g.bn_gamma.size(), 0.0);
  }
};

// One training step on a batch: forward with batch statistics + dropout,
// cross-entropy backward, gradients for every parameter array. Returns the
// mean batch loss. Running statistics are updated by the caller.
class BatchProcessor {
 public:
  BatchProcessor(const CnnArchitecture& a, unsigned jobs) : arch_(a), jobs_(jobs) {}

  double process(const CnnWeights& w, std::span<const std::vector<double>> images,
                 std::span<const int> labels, std::span<const std::size_t> batch_idx,
                 bool use_dropout, Rng* dropout_rng, Gradients& grads,
                 std::vector<double>& batch_mean, std::vector<double>& batch_var) {
    const std::size_t b = batch_idx.size();
    const std::size_t plane =
        static_cast<std::size_t>(arch_.conv_out_h()) * arch_.conv_out_w();
    states_.resize(b);

    parallel_for(b, jobs_, [&](std::size_t s) {
      conv_forward(arch_, w, images[batch_idx[s]], states_[s].conv_out);
    });

    // Batch statistics per channel over samples and spatial positions.
    const double m_count = static_cast<double>(b * plane);
    batch_mean.assign(arch_.conv_filters, 0.0);
    batch_var.assign(arch_.conv_filters, 0.0);
    parallel_for(static_cast<std::size_t>(arch_.conv_filters), jobs_, [&](std::size_t f) {
      double acc = 0.0;
      for (std::size_t s = 0; s < b; ++s) {
        const double* p = states_[s].conv_out.data() + f * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      }
      const double mean = acc / m_count;
      double var = 0.0;
      for (std::size_t s = 0; s < b; ++s) {
        const double* p = states_[s].conv_out.data() + f * plane;
        for (std::size_t i = 0; i < plane; ++i) var += (p[i] - mean) * (p[i] - mean);
      }
      batch_mean[f] = mean;
      batch_var[f] = var / m_count;
    });

    // Dropout masks must not depend on the worker count: draw them serially
    // up front, then run the heavy per-sample head in parallel.
    std::vector<Rng> sample_rngs;
    if (use_dropout) {
      sample_rngs.reserve(b);
      for (std::size_t s = 0; s < b; ++s) {
        sample_rngs.emplace_back(mix_seed(dropout_rng->next_u64(), s));
      }
    }
    parallel_for(b, jobs_, [&](std::size_t s) {
      head_forward(arch_, w, batch_mean, batch_var, use_dropout,
                   use_dropout ? &sample_rngs[s] : nullptr, states_[s]);
    });

    // Per-sample backward down to d(bn_out).
    double loss_acc = 0.0;
    for (std::size_t s = 0; s < b; ++s) {
      const int label = labels[batch_idx[s]];
      loss_acc -= std::log(std::max(states_[s].probs[label != 0 ? 1 : 0], 1e-300));
    }
    const double inv_b = 1.0 / static_cast<double>(b);
    const double keep = 1.0 - arch_.dropout_rate;
    parallel_for(b, jobs_, [&](std::size_t s) {
      auto& st = states_[s];
      const int label = labels[batch_idx[s]] != 0 ? 1 : 0;
      st.dlogits = st.probs;
      st.dlogits[label] -= 1.0;
      st.dlogits[0] *= inv_b;
      st.dlogits[1] *= inv_b;

      st.dfc1_out.assign(arch_.fc1_size, 0.0);
      for (int j = 0; j < arch_.fc1_size; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 2; ++k) {
          acc += w.fc2_w[static_cast<std::size_t>(k) * arch_.fc1_size + j] * st.dlogits[k];
        }
        if (use_dropout) acc = st.drop2[j] ? acc / keep : 0.0;
        st.dfc1_out[j] = acc;
      }

      const std::size_t flat = arch_.flat_size();
      std::vector<double> dflat(flat, 0.0);
      for (int j = 0; j < arch_.fc1_size; ++j) {
        const double dj = st.dfc1_out[j];
        if (dj == 0.0) continue;
        const double* row = w.fc1_w.data() + static_cast<std::size_t>(j) * flat;
        for (std::size_t i = 0; i < flat; ++i) dflat[i] += row[i] * dj;
      }
      if (use_dropout) {
        for (std::size_t i = 0; i < flat; ++i) {
          dflat[i] = st.drop1[i] ? dflat[i] / keep : 0.0;
        }
      }

      // Scatter pooled gradients back to the winning activations.
      st.d_bn_out.assign(st.conv_out.size(), 0.0);
      const std::size_t per_channel = static_cast<std::size_t>(arch_.pool_out_h()) *
                                      arch_.pool_out_w();
      for (std::size_t cell = 0; cell < flat; ++cell) {
        const int idx = st.pool_argmax[cell];
        if (idx < 0) continue;  // window was fully clamped by ReLU
        const std::size_t f = cell / per_channel;
        st.d_bn_out[f * (st.conv_out.size() / arch_.conv_filters) + idx] += dflat[cell];
      }
    });

    // Gradient reductions in fixed (sample-major) order per output row.
    parallel_for(2, jobs_, [&](std::size_t k) {
      double db = 0.0;
      double* row = grads.g.fc2_w.data() + k * arch_.fc1_size;
      std::fill(row, row + arch_.fc1_size, 0.0);
      for (std::size_t s = 0; s < b; ++s) {
        const double dk = states_[s].dlogits[k];
        db += dk;
        for (int j = 0; j < arch_.fc1_size; ++j) row[j] += dk * states_[s].fc1_dropped[j];
      }
      grads.g.fc2_b[k] = db;
    });
    const std::size_t flat = arch_.flat_size();
    parallel_for(static_cast<std::size_t>(arch_.fc1_size), jobs_, [&](std::size_t j) {
      double db = 0.0;
      double* row = grads.g.fc1_w.data() + j * flat;
      std::fill(row, row + flat, 0.0);
      for (std::size_t s = 0; s < b; ++s) {
        const double dj = states_[s].dfc1_out[j];
        db += dj;
        if (dj == 0.0) continue;
        const double* in = states_[s].flat_dropped.data();
        for (std::size_t i = 0; i < flat; ++i) row[i] += dj * in[i];
      }
      grads.g.fc1_b[j] = db;
    });

    // Batch-norm backward; d_bn_out buffers become d(conv_out) in place.
    parallel_for(static_cast<std::size_t>(arch_.conv_filters), jobs_, [&](std::size_t f) {
      const double mean = batch_mean[f];
      const double inv_sigma = 1.0 / std::sqrt(batch_var[f] + kBnEps);
      double sum_dy = 0.0;
      double sum_dy_xhat = 0.0;
      for (std::size_t s = 0; s < b; ++s) {
        const double* dy = states_[s].d_bn_out.data() + f * plane;
        const double* xv = states_[s].conv_out.data() + f * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          sum_dy += dy[i];
          sum_dy_xhat += dy[i] * (xv[i] - mean) * inv_sigma;
        }
      }
      grads.g.bn_beta[f] = sum_dy;
      grads.g.bn_gamma[f] = sum_dy_xhat;
      const double g = w.bn_gamma[f];
      const double m_total = static_cast<double>(b * plane);
      for (std::size_t s = 0; s < b; ++s) {
        double* dy = states_[s].d_bn_out.data() + f * plane;
        const double* xv = states_[s].conv_out.data() + f * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double xhat = (xv[i] - mean) * inv_sigma;
          dy[i] = g * inv_sigma * (dy[i] - sum_dy / m_total - xhat * sum_dy_xhat / m_total);
        }
      }
    });

    // Convolution weight/bias gradients, one filter per task.
    const int kh = arch_.conv_size;
    const int oh = arch_.conv_out_h();
    const int ow = arch_.conv_out_w();
    parallel_for(static_cast<std::size_t>(arch_.conv_filters), jobs_, [&](std::size_t f) {
      double* dwf = grads.g.conv_w.data() + f * static_cast<std::size_t>(kh) * kh;
      std::fill(dwf, dwf + static_cast<std::size_t>(kh) * kh, 0.0);
      double db = 0.0;
      for (std::size_t s = 0; s < b; ++s) {
        const double* dx = states_[s].d_bn_out.data() + f * plane;
        const double* image = images[batch_idx[s]].data();
        for (int y = 0; y < oh; ++y) {
          for (int x = 0; x < ow; ++x) {
            const double d = dx[static_cast<std::size_t>(y) * ow + x];
            if (d == 0.0) continue;
            db += d;
            for (int ky = 0; ky < kh; ++ky) {
              const double* in_row = image + static_cast<std::size_t>(y + ky) * arch_.input_w + x;
              double* w_row = dwf + static_cast<std::size_t>(ky) * kh;
              for (int kx = 0; kx < kh; ++kx) w_row[kx] += d * in_row[kx];
            }
          }
        }
      }
      grads.g.conv_b[f] = db;
    });

    return loss_acc * inv_b;
  }

 private:
  CnnArchitecture arch_;
  unsigned jobs_;
  std::vector<SampleState> states_;
};

inline void adam_update(std::vector<double>& w, std::span<const double> g, AdamState& st,
                        const TrainConfig& cfg, long long step) {
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (std::size_t i = 0; i < w.size(); ++i) {
    st.m[i] = b1 * st.m[i] + (1.0 - b1) * g[i];
    st.v[i] = b2 * st.v[i] + (1.0 - b2) * g[i] * g[i];
    const double mh = st.m[i] / corr1;
    const double vh = st.v[i] / corr2;
    w[i] -= cfg.adam_lr * mh / (std::sqrt(vh) + 1e-8);
  }
}

inline CnnWeights seeded_init(const CnnArchitecture& a, std::uint64_t seed) {
  CnnWeights w;
  w.resize(a);
  Rng rng(mix_seed(seed, 0xC0FFEEULL));
  const double conv_scale = std::sqrt(2.0 / (static_cast<double>(a.conv_size) * a.conv_size));
  for (auto& v : w.conv_w) v = conv_scale * rng.normal();
  const double fc1_scale = std::sqrt(2.0 / static_cast<double>(a.flat_size()));
  for (auto& v : w.fc1_w) v = fc1_scale * rng.normal();
  const double fc2_scale = std::sqrt(2.0 / static_cast<double>(a.fc1_size));
  for (auto& v : w.fc2_w) v = fc2_scale * rng.normal();
  return w;
}

}  // namespace cnn_detail

struct CnnTrainResult {
  CnnModel model;  // weights of the best validation-loss epoch
  std::vector<double> train_loss_per_epoch;
  std::vector<double> val_loss_per_epoch;
  int best_epoch = -1;
  std::vector<std::string> warnings;
};

// Trains with a seeded 10% validation holdout, keeping the epoch with the
// best validation loss. Deterministic given cfg.seed.
inline CnnTrainResult cnn_train(const CnnArchitecture& arch,
                                std::span<const std::vector<double>> images,
                                std::span<const int> labels, const TrainConfig& cfg,
                                unsigned jobs = 0) {
  arch.validate();
  if (images.empty()) throw EmptyInputError("cnn_train: empty training set");
  if (images.size() != labels.size()) throw ArgumentError("cnn_train: size mismatch");
  if (cfg.max_epochs < 1) throw ArgumentError("cnn_train: max_epochs >= 1");

  CnnTrainResult result;

  // Validation holdout.
  std::vector<std::size_t> indices(images.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  Rng split_rng(mix_seed(cfg.seed, 0x5713ULL));
  fisher_yates_shuffle(indices, split_rng);
  std::size_t n_val = static_cast<std::size_t>(
      std::llround(cfg.val_fraction * static_cast<double>(images.size())));
  n_val = std::min(n_val, images.size() - 1);
  std::vector<std::size_t> val_idx(indices.begin(), indices.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(indices.begin() + static_cast<std::ptrdiff_t>(n_val), indices.end());

  std::size_t batch_size = static_cast<std::size_t>(cfg.batch_size);
  if (batch_size > train_idx.size()) {
    result.warnings.push_back("batch size " + std::to_string(batch_size) +
                              " clamped to training set size " +
                              std::to_string(train_idx.size()));
    batch_size = train_idx.size();
  }
  if (batch_size == 0) throw ArgumentError("cnn_train: empty batch");

  CnnModel model;
  model.arch = arch;
  model.weights = cnn_detail::seeded_init(arch, cfg.seed);
  model.bn_run_mean.assign(arch.conv_filters, 0.0);
  model.bn_run_var.assign(arch.conv_filters, 1.0);

  cnn_detail::BatchProcessor processor(arch, jobs);
  cnn_detail::Gradients grads;
  grads.resize(arch);
  cnn_detail::AdamState adam_conv_w, adam_conv_b, adam_gamma, adam_beta, adam_fc1_w,
      adam_fc1_b, adam_fc2_w, adam_fc2_b;
  adam_conv_w.resize(model.weights.conv_w.size());
  adam_conv_b.resize(model.weights.conv_b.size());
  adam_gamma.resize(model.weights.bn_gamma.size());
  adam_beta.resize(model.weights.bn_beta.size());
  adam_fc1_w.resize(model.weights.fc1_w.size());
  adam_fc1_b.resize(model.weights.fc1_b.size());
  adam_fc2_w.resize(model.weights.fc2_w.size());
  adam_fc2_b.resize(model.weights.fc2_b.size());

  Rng dropout_rng(mix_seed(cfg.seed, 0xD20ULL));
  std::vector<double> batch_mean, batch_var;
  constexpr double kBnMomentum = 0.9;

  double best_val = std::numeric_limits<double>::infinity();
  CnnModel best_model = model;
  long long adam_step = 0;

  auto validation_loss = [&]() {
    if (val_idx.empty()) return 0.0;
    std::vector<double> losses(val_idx.size());
    parallel_for(val_idx.size(), jobs, [&](std::size_t v) {
      cnn_detail::SampleState s;
      cnn_detail::conv_forward(arch, model.weights, images[val_idx[v]], s.conv_out);
      cnn_detail::head_forward(arch, model.weights, model.bn_run_mean, model.bn_run_var,
                               false, nullptr, s);
      const int label = labels[val_idx[v]] != 0 ? 1 : 0;
      losses[v] = -std::log(std::max(s.probs[label], 1e-300));
    });
    double acc = 0.0;
    for (double l : losses) acc += l;
    return acc / static_cast<double>(val_idx.size());
  };

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, 0xE90CULL, static_cast<std::uint64_t>(epoch)));
    fisher_yates_shuffle(train_idx, shuffle_rng);

    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < train_idx.size(); start += batch_size) {
      const std::size_t count = std::min(batch_size, train_idx.size() - start);
      const std::span<const std::size_t> batch(train_idx.data() + start, count);
      epoch_loss += processor.process(model.weights, images, labels, batch, true,
                                      &dropout_rng, grads, batch_mean, batch_var);
      ++n_batches;
      ++adam_step;
      cnn_detail::adam_update(model.weights.conv_w, grads.g.conv_w, adam_conv_w, cfg, adam_step);
      cnn_detail::adam_update(model.weights.conv_b, grads.g.conv_b, adam_conv_b, cfg, adam_step);
      cnn_detail::adam_update(model.weights.bn_gamma, grads.g.bn_gamma, adam_gamma, cfg, adam_step);
      cnn_detail::adam_update(model.weights.bn_beta, grads.g.bn_beta, adam_beta, cfg, adam_step);
      cnn_detail::adam_update(model.weights.fc1_w, grads.g.fc1_w, adam_fc1_w, cfg, adam_step);
      cnn_detail::adam_update(model.weights.fc1_b, grads.g.fc1_b, adam_fc1_b, cfg, adam_step);
      cnn_detail::adam_update(model.weights.fc2_w, grads.g.fc2_w, adam_fc2_w, cfg, adam_step);
      cnn_detail::adam_update(model.weights.fc2_b, grads.g.fc2_b, adam_fc2_b, cfg, adam_step);

      for (int f = 0; f < arch.conv_filters; ++f) {
        model.bn_run_mean[f] = kBnMomentum * model.bn_run_mean[f] + (1.0 - kBnMomentum) * batch_mean[f];
        model.bn_run_var[f] = kBnMomentum * model.bn_run_var[f] + (1.0 - kBnMomentum) * batch_var[f];
      }
    }
    result.train_loss_per_epoch.push_back(epoch_loss / static_cast<double>(n_batches));

    const double val = validation_loss();
    result.val_loss_per_epoch.push_back(val);
    if (val_idx.empty() || val < best_val) {
      best_val = val;
      best_model = model;
      result.best_epoch = epoch;
    }
  }

  result.model = std::move(best_model);
  return result;
}

// Max relative deviation between backpropagated gradients and central finite
// differences (step 1e-5), over up to samples_per_group randomly selected
// parameters of each parameter array. Runs with dropout disabled and batch
// statistics of the given sample (the backward pass is checked in the same
// mode). The deviation metric is symmetric in its two arguments.
inline double cnn_grad_check(const CnnArchitecture& arch, const CnnWeights& weights,
                             std::span<const double> image, int label,
                             std::uint64_t seed = 1, std::size_t samples_per_group = 200) {
  arch.validate();
  const std::vector<std::vector<double>> images = {
      std::vector<double>(image.begin(), image.end())};
  const std::vector<int> labels = {label != 0 ? 1 : 0};
  const std::vector<std::size_t> batch_idx = {0};

  CnnWeights w = weights;
  cnn_detail::BatchProcessor processor(arch, 0);
  cnn_detail::Gradients grads;
  grads.resize(arch);
  std::vector<double> mean, var;
  processor.process(w, images, labels, batch_idx, false, nullptr, grads, mean, var);

  auto loss_at = [&](CnnWeights& wt) {
    cnn_detail::SampleState s;
    cnn_detail::conv_forward(arch, wt, images[0], s.conv_out);
    std::vector<double> m1(arch.conv_filters), v1(arch.conv_filters);
    const std::size_t plane =
        static_cast<std::size_t>(arch.conv_out_h()) * arch.conv_out_w();
    for (int f = 0; f < arch.conv_filters; ++f) {
      const double* p = s.conv_out.data() + static_cast<std::size_t>(f) * plane;
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      const double mu = acc / static_cast<double>(plane);
      double vv = 0.0;
      for (std::size_t i = 0; i < plane; ++i) vv += (p[i] - mu) * (p[i] - mu);
      m1[f] = mu;
      v1[f] = vv / static_cast<double>(plane);
    }
    cnn_detail::head_forward(arch, wt, m1, v1, false, nullptr, s);
    return -std::log(std::max(s.probs[labels[0]], 1e-300));
  };

  Rng rng(seed);
  double max_rel = 0.0;
  const double h = 1e-5;
  auto check_group = [&](std::vector<double>& params, const std::vector<double>& analytic) {
    std::vector<std::size_t> picks;
    if (params.size() <= samples_per_group) {
      picks.resize(params.size());
      for (std::size_t i = 0; i < picks.size(); ++i) picks[i] = i;
    } else {
      picks = sample_without_replacement(params.size(), samples_per_group, rng);
    }
    for (std::size_t i : picks) {
      const double orig = params[i];
      params[i] = orig + h;
      const double lp = loss_at(w);
      params[i] = orig - h;
      const double lm = loss_at(w);
      params[i] = orig;
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[i];
      // Differences below the finite-difference noise floor count as
      // matching; they occur where the true gradient vanishes exactly (the
      // conv bias is absorbed by batch-norm mean subtraction).
      if (std::abs(a - numeric) < 1e-8) continue;
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
    }
  };

  check_group(w.conv_w, grads.g.conv_w);
  check_group(w.conv_b, grads.g.conv_b);
  check_group(w.bn_gamma, grads.g.bn_gamma);
  check_group(w.bn_beta, grads.g.bn_beta);
  check_group(w.fc1_w, grads.g.fc1_w);
  check_group(w.fc1_b, grads.g.fc1_b);
  check_group(w.fc2_w, grads.g.fc2_w);
  check_group(w.fc2_b, grads.g.fc2_b);
  return max_rel;
}

}  // namespace wheezelab
