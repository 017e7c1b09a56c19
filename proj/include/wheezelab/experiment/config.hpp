// Experiment configuration: a single key = value text file with [section]
// headers. Unknown keys are rejected so typos surface immediately, and the
// resolved values are re-serialized to an "effective config" file for
// provenance.
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "wheezelab/burr.hpp"
#include "wheezelab/errors.hpp"
#include "wheezelab/eventgen.hpp"
#include "wheezelab/features.hpp"
#include "wheezelab/ioutil.hpp"
#include "wheezelab/models/common.hpp"

namespace wheezelab {

struct ExperimentConfig {
  // [corpus]
  std::filesystem::path data_dir;
  std::filesystem::path split_manifest;

  // [events]
  std::vector<DurationMode> modes = {DurationMode::kFixed, DurationMode::kVariable};
  std::uint64_t base_seed = 42;
  double fd_duration = 0.150;
  double vd_min = 0.100;
  double vd_max = 2.0;
  double spacing_window = 5.0;
  BurrParams burr;

  // [features]
  FeatureConfig features;

  // [models]
  std::vector<ModelFamily> families = {ModelFamily::kBaseline, ModelFamily::kLda,
                                       ModelFamily::kSvmLinear, ModelFamily::kSvmRbf,
                                       ModelFamily::kBoost,     ModelFamily::kCnn};
  int n_runs = 10;
  std::size_t search_budget = 30;
  double baseline_l2 = 1e-6;
  int max_epochs = 15;
  int batch_size = 128;
  double adam_lr = 1e-3;

  // [output]
  std::filesystem::path output_dir = "out";
  unsigned jobs = 0;  // 0 = hardware concurrency
  bool dump_spectrograms = false;

  GenerationConfig generation(DurationMode mode) const {
    GenerationConfig g;
    g.mode = mode;
    g.fd_duration = fd_duration;
    g.vd_min = vd_min;
    g.vd_max = vd_max;
    g.spacing_window = spacing_window;
    g.base_seed = base_seed;
    g.burr = burr;
    return g;
  }

  TrainConfig training() const {
    TrainConfig t;
    t.max_epochs = max_epochs;
    t.batch_size = batch_size;
    t.adam_lr = adam_lr;
    t.n_runs = n_runs;
    return t;
  }

  void validate() const {
    if (data_dir.empty()) throw ArgumentError("config: corpus.data_dir is required");
    if (split_manifest.empty()) {
      throw ArgumentError("config: corpus.split_manifest is required");
    }
    if (modes.empty()) throw ArgumentError("config: events.modes must not be empty");
    if (families.empty()) throw ArgumentError("config: models.families must not be empty");
    if (n_runs < 1) throw ArgumentError("config: models.n_runs must be >= 1");
    if (search_budget < 1) throw ArgumentError("config: models.search_budget must be >= 1");
    generation(DurationMode::kFixed).validate();
    features.validate();
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::string current;
  for (char c : value) {
    if (c == ',') {
      const std::string t = trim(current);
      if (!t.empty()) items.push_back(t);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  const std::string t = trim(current);
  if (!t.empty()) items.push_back(t);
  return items;
}

inline bool parse_bool(const std::string& v, const std::string& ctx) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError(ctx + ": expected a boolean, got '" + v + "'");
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(std::string_view text) {
  ExperimentConfig cfg;
  std::string section;
  std::size_t pos = 0, line_no = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string line = detail::trim(
        text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos));
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    const std::string ctx = "config line " + std::to_string(line_no);

    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(ctx + ": unterminated section header");
      section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(ctx + ": expected key = value");
    const std::string key = section + "." + detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));

    if (key == "corpus.data_dir") {
      cfg.data_dir = value;
    } else if (key == "corpus.split_manifest") {
      cfg.split_manifest = value;
    } else if (key == "events.modes") {
      cfg.modes.clear();
      for (const auto& m : detail::split_list(value)) {
        cfg.modes.push_back(duration_mode_from_string(m));
      }
    } else if (key == "events.base_seed") {
      cfg.base_seed = parse_uint_strict(value, ctx);
    } else if (key == "events.fd_duration") {
      cfg.fd_duration = parse_double_strict(value, ctx);
    } else if (key == "events.vd_min") {
      cfg.vd_min = parse_double_strict(value, ctx);
    } else if (key == "events.vd_max") {
      cfg.vd_max = parse_double_strict(value, ctx);
    } else if (key == "events.spacing_window") {
      cfg.spacing_window = parse_double_strict(value, ctx);
    } else if (key == "events.burr_alpha") {
      cfg.burr.alpha = parse_double_strict(value, ctx);
    } else if (key == "events.burr_c") {
      cfg.burr.c = parse_double_strict(value, ctx);
    } else if (key == "events.burr_k") {
      cfg.burr.k = parse_double_strict(value, ctx);
    } else if (key == "features.mel_bands") {
      cfg.features.mel_bands = static_cast<std::size_t>(parse_int_strict(value, ctx));
    } else if (key == "features.pitch_min_hz") {
      cfg.features.pitch_min_hz = parse_double_strict(value, ctx);
    } else if (key == "features.pitch_max_hz") {
      cfg.features.pitch_max_hz = parse_double_strict(value, ctx);
    } else if (key == "features.peak_rel_threshold") {
      cfg.features.peak_rel_threshold = parse_double_strict(value, ctx);
    } else if (key == "features.voicing_threshold") {
      cfg.features.voicing_threshold = parse_double_strict(value, ctx);
    } else if (key == "features.mfcc_include_c0") {
      cfg.features.mfcc_include_c0 = detail::parse_bool(value, ctx);
    } else if (key == "models.families") {
      cfg.families.clear();
      for (const auto& f : detail::split_list(value)) {
        cfg.families.push_back(model_family_from_string(f));
      }
    } else if (key == "models.n_runs") {
      cfg.n_runs = static_cast<int>(parse_int_strict(value, ctx));
    } else if (key == "models.search_budget") {
      cfg.search_budget = static_cast<std::size_t>(parse_int_strict(value, ctx));
    } else if (key == "models.baseline_l2") {
      cfg.baseline_l2 = parse_double_strict(value, ctx);
    } else if (key == "models.max_epochs") {
      cfg.max_epochs = static_cast<int>(parse_int_strict(value, ctx));
    } else if (key == "models.batch_size") {
      cfg.batch_size = static_cast<int>(parse_int_strict(value, ctx));
    } else if (key == "models.adam_lr") {
      cfg.adam_lr = parse_double_strict(value, ctx);
    } else if (key == "output.dir") {
      cfg.output_dir = value;
    } else if (key == "output.jobs") {
      cfg.jobs = static_cast<unsigned>(parse_int_strict(value, ctx));
    } else if (key == "output.dump_spectrograms") {
      cfg.dump_spectrograms = detail::parse_bool(value, ctx);
    } else {
      throw ParseError(ctx + ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_text_file(path));
}

// Serializes every resolved value; parsing the output reproduces the config.
inline std::string serialize_experiment_config(const ExperimentConfig& cfg) {
  std::string out;
  auto kv = [&out](std::string_view k, const std::string& v) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  };
  out += "[corpus]\n";
  kv("data_dir", cfg.data_dir.string());
  kv("split_manifest", cfg.split_manifest.string());
  out += "\n[events]\n";
  std::string modes;
  for (const auto m : cfg.modes) {
    if (!modes.empty()) modes += ',';
    modes += to_string(m);
  }
  kv("modes", modes);
  kv("base_seed", std::to_string(cfg.base_seed));
  kv("fd_duration", format_double(cfg.fd_duration));
  kv("vd_min", format_double(cfg.vd_min));
  kv("vd_max", format_double(cfg.vd_max));
  kv("spacing_window", format_double(cfg.spacing_window));
  kv("burr_alpha", format_double(cfg.burr.alpha));
  kv("burr_c", format_double(cfg.burr.c));
  kv("burr_k", format_double(cfg.burr.k));
  out += "\n[features]\n";
  kv("mel_bands", std::to_string(cfg.features.mel_bands));
  kv("pitch_min_hz", format_double(cfg.features.pitch_min_hz));
  kv("pitch_max_hz", format_double(cfg.features.pitch_max_hz));
  kv("peak_rel_threshold", format_double(cfg.features.peak_rel_threshold));
  kv("voicing_threshold", format_double(cfg.features.voicing_threshold));
  kv("mfcc_include_c0", cfg.features.mfcc_include_c0 ? "true" : "false");
  out += "\n[models]\n";
  std::string families;
  for (const auto f : cfg.families) {
    if (!families.empty()) families += ',';
    families += to_string(f);
  }
  kv("families", families);
  kv("n_runs", std::to_string(cfg.n_runs));
  kv("search_budget", std::to_string(cfg.search_budget));
  kv("baseline_l2", format_double(cfg.baseline_l2));
  kv("max_epochs", std::to_string(cfg.max_epochs));
  kv("batch_size", std::to_string(cfg.batch_size));
  kv("adam_lr", format_double(cfg.adam_lr));
  out += "\n[output]\n";
  kv("dir", cfg.output_dir.string());
  kv("jobs", std::to_string(cfg.jobs));
  kv("dump_spectrograms", cfg.dump_spectrograms ? "true" : "false");
  return out;
}

}  // namespace wheezelab
