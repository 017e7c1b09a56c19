// Versioned binary model container: magic, format version, family tag, a
// JSON hyperparameter block, and named parameter blobs of little-endian
// 64-bit floats. A human-readable sidecar summary (.txt) is written next to
// each model file.
#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "wheezelab/errors.hpp"
#include "wheezelab/ioutil.hpp"
#include "wheezelab/models/trained_model.hpp"

namespace wheezelab {

inline constexpr char kModelMagic[8] = {'W', 'Z', 'M', 'D', 'L', '0', '0', '1'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

using Blobs = std::map<std::string, std::vector<double>>;

inline nlohmann::json hyper_to_json(const HyperParams& hyper) {
  nlohmann::json j;
  std::visit(
      [&j](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LogisticParams>) {
          j = {{"kind", "logistic"}, {"l2", p.l2}};
        } else if constexpr (std::is_same_v<T, LdaParams>) {
          j = {{"kind", "lda"}, {"delta", p.delta}, {"gamma", p.gamma}};
        } else if constexpr (std::is_same_v<T, SvmParams>) {
          j = {{"kind", "svm"},
               {"kernel", p.kernel == SvmKernel::kLinear ? "linear" : "rbf"},
               {"box_constraint", p.box_constraint},
               {"kernel_scale", p.kernel_scale}};
        } else if constexpr (std::is_same_v<T, BoostParams>) {
          j = {{"kind", "boost"}, {"n_learn", p.n_learn}, {"learn_rate", p.learn_rate}};
        } else {
          j = {{"kind", "cnn"},
               {"conv_size", p.conv_size},
               {"conv_filters", p.conv_filters},
               {"pool_size", p.pool_size},
               {"fc1_size", p.fc1_size},
               {"dropout_rate", p.dropout_rate},
               {"input_h", p.input_h},
               {"input_w", p.input_w}};
        }
      },
      hyper);
  return j;
}

inline HyperParams hyper_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind");
  if (kind == "logistic") return LogisticParams{j.at("l2")};
  if (kind == "lda") return LdaParams{j.at("delta"), j.at("gamma")};
  if (kind == "svm") {
    SvmParams p;
    p.kernel = j.at("kernel") == "linear" ? SvmKernel::kLinear : SvmKernel::kRbf;
    p.box_constraint = j.at("box_constraint");
    p.kernel_scale = j.at("kernel_scale");
    return p;
  }
  if (kind == "boost") return BoostParams{j.at("n_learn"), j.at("learn_rate")};
  if (kind == "cnn") {
    CnnArchitecture a;
    a.conv_size = j.at("conv_size");
    a.conv_filters = j.at("conv_filters");
    a.pool_size = j.at("pool_size");
    a.fc1_size = j.at("fc1_size");
    a.dropout_rate = j.at("dropout_rate");
    a.input_h = j.at("input_h");
    a.input_w = j.at("input_w");
    return a;
  }
  throw ParseError("hyper_from_json: unknown kind '" + kind + "'");
}

inline Blobs collect_blobs(const TrainedModel& model) {
  Blobs blobs;
  blobs["standardizer.mean"] = model.standardizer.mean;
  blobs["standardizer.std"] = model.standardizer.std_dev;
  std::visit(
      [&blobs](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LogisticModel>) {
          blobs["weights"] = m.weights;
          blobs["bias"] = {m.bias};
        } else if constexpr (std::is_same_v<T, LdaModel>) {
          blobs["weights"] = m.weights;
          blobs["bias"] = {m.bias};
        } else if constexpr (std::is_same_v<T, SvmModel>) {
          blobs["coefficients"] = m.coefficients;
          blobs["rho"] = {m.rho};
          blobs["support_vectors"] = m.support_vectors.data();
          blobs["sv_shape"] = {static_cast<double>(m.support_vectors.rows()),
                               static_cast<double>(m.support_vectors.cols())};
        } else if constexpr (std::is_same_v<T, BoostModel>) {
          std::vector<double> packed;
          packed.reserve(m.stumps.size() * 4);
          for (const auto& s : m.stumps) {
            packed.push_back(static_cast<double>(s.feature));
            packed.push_back(s.threshold);
            packed.push_back(s.left);
            packed.push_back(s.right);
          }
          blobs["stumps"] = std::move(packed);
          blobs["train_log_loss"] = m.train_log_loss;
        } else {
          blobs["conv_w"] = m.weights.conv_w;
          blobs["conv_b"] = m.weights.conv_b;
          blobs["bn_gamma"] = m.weights.bn_gamma;
          blobs["bn_beta"] = m.weights.bn_beta;
          blobs["fc1_w"] = m.weights.fc1_w;
          blobs["fc1_b"] = m.weights.fc1_b;
          blobs["fc2_w"] = m.weights.fc2_w;
          blobs["fc2_b"] = m.weights.fc2_b;
          blobs["bn_run_mean"] = m.bn_run_mean;
          blobs["bn_run_var"] = m.bn_run_var;
        }
      },
      model.impl);
  return blobs;
}

inline void push_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void push_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace detail

inline void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  const nlohmann::json hyper = detail::hyper_to_json(model.hyper);
  const std::string hyper_str = hyper.dump();
  const detail::Blobs blobs = detail::collect_blobs(model);

  std::vector<std::uint8_t> out;
  out.insert(out.end(), kModelMagic, kModelMagic + 8);
  detail::push_u32(out, kModelFormatVersion);
  detail::push_u32(out, static_cast<std::uint32_t>(model.family));
  detail::push_u64(out, hyper_str.size());
  out.insert(out.end(), hyper_str.begin(), hyper_str.end());
  detail::push_u64(out, blobs.size());
  for (const auto& [name, values] : blobs) {
    detail::push_u64(out, name.size());
    out.insert(out.end(), name.begin(), name.end());
    detail::push_u64(out, values.size());
    for (double v : values) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      detail::push_u64(out, bits);
    }
  }
  write_binary_atomic(path, out);

  // Sidecar summary.
  std::string sidecar;
  sidecar += "family: ";
  sidecar += to_string(model.family);
  sidecar += "\nhyperparameters: " + hyper.dump() + "\n";
  for (const auto& [name, values] : blobs) {
    sidecar += name + ": " + std::to_string(values.size()) + " values\n";
  }
  write_file_atomic(path.string() + ".txt", sidecar);
}

inline TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("load_model: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > bytes.size()) throw FormatError("load_model: truncated " + path.string());
  };
  need(16);
  if (std::memcmp(bytes.data(), kModelMagic, 8) != 0) {
    throw FormatError("load_model: bad magic in " + path.string());
  }
  pos = 8;
  auto read_u32 = [&]() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  };
  auto read_u64 = [&]() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
    pos += 8;
    return v;
  };
  const std::uint32_t version = read_u32();
  if (version != kModelFormatVersion) {
    throw UnsupportedError("load_model: unsupported format version " +
                           std::to_string(version));
  }
  const auto family = static_cast<ModelFamily>(read_u32());
  const std::uint64_t hyper_len = read_u64();
  need(hyper_len);
  const std::string hyper_str(reinterpret_cast<const char*>(bytes.data() + pos), hyper_len);
  pos += hyper_len;
  const HyperParams hyper = detail::hyper_from_json(nlohmann::json::parse(hyper_str));

  detail::Blobs blobs;
  const std::uint64_t n_blobs = read_u64();
  for (std::uint64_t b = 0; b < n_blobs; ++b) {
    const std::uint64_t name_len = read_u64();
    need(name_len);
    std::string name(reinterpret_cast<const char*>(bytes.data() + pos), name_len);
    pos += name_len;
    const std::uint64_t count = read_u64();
    std::vector<double> values(count);
    for (auto& v : values) {
      const std::uint64_t bits = read_u64();
      std::memcpy(&v, &bits, 8);
    }
    blobs.emplace(std::move(name), std::move(values));
  }

  auto blob = [&blobs, &path](const std::string& name) -> std::vector<double>& {
    auto it = blobs.find(name);
    if (it == blobs.end()) {
      throw FormatError("load_model: missing blob '" + name + "' in " + path.string());
    }
    return it->second;
  };

  TrainedModel model;
  model.family = family;
  model.hyper = hyper;
  model.standardizer.mean = blob("standardizer.mean");
  model.standardizer.std_dev = blob("standardizer.std");

  switch (family) {
    case ModelFamily::kBaseline: {
      LogisticModel m;
      m.weights = blob("weights");
      m.bias = blob("bias").at(0);
      model.impl = std::move(m);
      break;
    }
    case ModelFamily::kLda: {
      LdaModel m;
      m.weights = blob("weights");
      m.bias = blob("bias").at(0);
      model.impl = std::move(m);
      break;
    }
    case ModelFamily::kSvmLinear:
    case ModelFamily::kSvmRbf: {
      SvmModel m;
      m.params = std::get<SvmParams>(hyper);
      m.params.kernel =
          family == ModelFamily::kSvmLinear ? SvmKernel::kLinear : SvmKernel::kRbf;
      m.coefficients = blob("coefficients");
      m.rho = blob("rho").at(0);
      const auto& shape = blob("sv_shape");
      const auto rows = static_cast<std::size_t>(shape.at(0));
      const auto cols = static_cast<std::size_t>(shape.at(1));
      m.support_vectors = Matrix(rows, cols);
      m.support_vectors.data() = blob("support_vectors");
      if (m.support_vectors.data().size() != rows * cols) {
        throw FormatError("load_model: support vector blob size mismatch");
      }
      model.impl = std::move(m);
      break;
    }
    case ModelFamily::kBoost: {
      BoostModel m;
      m.params = std::get<BoostParams>(hyper);
      const auto& packed = blob("stumps");
      if (packed.size() % 4 != 0) throw FormatError("load_model: bad stump blob");
      for (std::size_t s = 0; s < packed.size(); s += 4) {
        Stump st;
        st.feature = static_cast<std::size_t>(packed[s]);
        st.threshold = packed[s + 1];
        st.left = packed[s + 2];
        st.right = packed[s + 3];
        m.stumps.push_back(st);
      }
      m.train_log_loss = blob("train_log_loss");
      model.impl = std::move(m);
      break;
    }
    case ModelFamily::kCnn: {
      CnnModel m;
      m.arch = std::get<CnnArchitecture>(hyper);
      m.weights.conv_w = blob("conv_w");
      m.weights.conv_b = blob("conv_b");
      m.weights.bn_gamma = blob("bn_gamma");
      m.weights.bn_beta = blob("bn_beta");
      m.weights.fc1_w = blob("fc1_w");
      m.weights.fc1_b = blob("fc1_b");
      m.weights.fc2_w = blob("fc2_w");
      m.weights.fc2_b = blob("fc2_b");
      m.bn_run_mean = blob("bn_run_mean");
      m.bn_run_var = blob("bn_run_var");
      model.impl = std::move(m);
      break;
    }
  }
  return model;
}

}  // namespace wheezelab
