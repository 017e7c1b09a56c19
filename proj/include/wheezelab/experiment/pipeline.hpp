// End-to-end experiment orchestration.
//
//   prepare: corpus -> per-mode event lists and feature matrices on disk
//   run:     hyperparameter search + n seeded trainings per family per mode,
//            persisting models, test predictions and per-run metrics
//   audit:   aggregate report with per-family statistics, Wilcoxon tests
//            against the baseline, FD-VD gaps, FN duration histograms and the
//            zero-padding probe
//
// Every artifact write is atomic and every path of the computation is seeded,
// so identical configs yield byte-identical outputs and completed runs are
// skipped on re-invocation.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "wheezelab/corpus.hpp"
#include "wheezelab/dsp.hpp"
#include "wheezelab/eval.hpp"
#include "wheezelab/eventgen.hpp"
#include "wheezelab/experiment/config.hpp"
#include "wheezelab/features.hpp"
#include "wheezelab/models/model_io.hpp"
#include "wheezelab/models/search.hpp"
#include "wheezelab/models/trained_model.hpp"
#include "wheezelab/threading.hpp"

namespace wheezelab {

namespace paths {

inline std::string tag(DurationMode mode, SplitSide split) {
  return std::string(to_string(mode)) + "_" + std::string(to_string(split));
}

inline std::filesystem::path events_csv(const ExperimentConfig& cfg, DurationMode mode,
                                        SplitSide split) {
  return cfg.output_dir / ("events_" + tag(mode, split) + ".csv");
}

inline std::filesystem::path features_csv(const ExperimentConfig& cfg, DurationMode mode,
                                          SplitSide split) {
  return cfg.output_dir / ("features_" + tag(mode, split) + ".csv");
}

inline std::filesystem::path search_json(const ExperimentConfig& cfg, DurationMode mode,
                                         ModelFamily family) {
  return cfg.output_dir / "search" /
         (std::string(to_string(mode)) + "_" + std::string(to_string(family)) + ".json");
}

inline std::filesystem::path run_dir(const ExperimentConfig& cfg, const char* kind,
                                     DurationMode mode, ModelFamily family) {
  return cfg.output_dir / kind / std::string(to_string(mode)) /
         std::string(to_string(family));
}

inline std::filesystem::path model_file(const ExperimentConfig& cfg, DurationMode mode,
                                        ModelFamily family, int run) {
  return run_dir(cfg, "models", mode, family) / ("run" + std::to_string(run) + ".bin");
}

inline std::filesystem::path predictions_csv(const ExperimentConfig& cfg, DurationMode mode,
                                             ModelFamily family, int run) {
  return run_dir(cfg, "predictions", mode, family) / ("run" + std::to_string(run) + ".csv");
}

inline std::filesystem::path metrics_json(const ExperimentConfig& cfg, DurationMode mode,
                                          ModelFamily family, int run) {
  return run_dir(cfg, "metrics", mode, family) / ("run" + std::to_string(run) + ".json");
}

inline std::filesystem::path report_dir(const ExperimentConfig& cfg) {
  return cfg.output_dir / "report";
}

}  // namespace paths

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

struct PrepareResult {
  std::size_t recordings = 0;
  std::size_t wheeze_events = 0;
  std::map<std::string, std::size_t> random_events;  // per mode
  std::vector<std::string> warnings;
};

namespace detail {

struct OrderedEvent {
  LabeledEvent event;
  SplitSide split;
  std::uint64_t seed = 0;
};

// Annotated events first within a recording, then generated, each by start.
inline bool event_order(const OrderedEvent& a, const OrderedEvent& b) {
  if (a.event.recording_id != b.event.recording_id) {
    return a.event.recording_id < b.event.recording_id;
  }
  if (a.event.prov != b.event.prov) {
    return a.event.prov == Provenance::kAnnotated;
  }
  if (a.event.start_s != b.event.start_s) return a.event.start_s < b.event.start_s;
  return a.event.end_s < b.event.end_s;
}

}  // namespace detail

inline PrepareResult cmd_prepare(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto split = parse_split_manifest(read_text_file(cfg.split_manifest));
  auto corpus = load_corpus(cfg.data_dir, split, kPipelineSampleRate, cfg.jobs);

  PrepareResult result;
  result.recordings = corpus.entries.size();
  result.warnings = corpus.warnings;
  for (const auto& entry : corpus.entries) result.wheeze_events += entry.wheezes.size();

  const FeatureExtractor extractor(cfg.features);

  for (const DurationMode mode : cfg.modes) {
    const GenerationConfig gen_cfg = cfg.generation(mode);

    std::vector<detail::OrderedEvent> events;
    std::vector<GenerationResult> generated(corpus.entries.size());
    parallel_for(corpus.entries.size(), cfg.jobs, [&](std::size_t i) {
      const auto& entry = corpus.entries[i];
      generated[i] = generate_events(entry.recording.id, entry.recording.duration(),
                                     entry.wheezes, gen_cfg);
    });
    for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
      const auto& entry = corpus.entries[i];
      for (const auto& w : entry.wheezes) {
        events.push_back({w, entry.split, generated[i].seed});
      }
      for (const auto& ev : generated[i].events) {
        events.push_back({ev, entry.split, generated[i].seed});
      }
      result.warnings.insert(result.warnings.end(), generated[i].warnings.begin(),
                             generated[i].warnings.end());
      result.random_events[std::string(to_string(mode))] += generated[i].events.size();
    }
    std::sort(events.begin(), events.end(), detail::event_order);

    // Feature extraction, parallel over events.
    std::map<std::string, const CorpusEntry*> by_id;
    for (const auto& entry : corpus.entries) by_id[entry.recording.id] = &entry;
    std::vector<EventFeatureVector> features(events.size());
    parallel_for(events.size(), cfg.jobs, [&](std::size_t i) {
      const auto& ev = events[i].event;
      const auto segment = prepare_segment(slice_event(by_id.at(ev.recording_id)->recording, ev));
      features[i] = extractor.extract(segment);
      features[i].label = ev.cls;
      features[i].duration_s = ev.duration();
      if (cfg.dump_spectrograms) {
        const auto spec = normalize01(stft_magnitude(segment));
        const auto dir = cfg.output_dir / "spectrograms" / std::string(to_string(mode)) /
                         std::string(to_string(events[i].split));
        const std::string stem = ev.recording_id + "_" + std::to_string(i);
        write_spectrogram(dir / (stem + ".spg"), spec);
        write_file_atomic(dir / (stem + ".csv"), spectrogram_to_csv(spec));
      }
    });

    for (const SplitSide side : {SplitSide::kTrain, SplitSide::kTest}) {
      std::vector<EventRow> rows;
      std::vector<EventFeatureVector> feats;
      for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i].split != side) continue;
        rows.push_back({events[i].event, mode, events[i].seed});
        feats.push_back(features[i]);
      }
      write_event_csv(paths::events_csv(cfg, mode, side), rows);
      write_feature_csv(paths::features_csv(cfg, mode, side), feats);
    }
  }

  write_file_atomic(cfg.output_dir / "effective_config.ini",
                    serialize_experiment_config(cfg));
  std::string warn_text;
  for (const auto& w : result.warnings) {
    warn_text += w;
    warn_text += '\n';
  }
  write_file_atomic(cfg.output_dir / "prepare_warnings.txt", warn_text);
  return result;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct RunSummary {
  int completed = 0;
  int skipped = 0;
  std::vector<std::string> failures;  // one message per failed run
};

namespace detail {

struct LoadedSplit {
  std::vector<EventRow> events;
  Matrix x;
  std::vector<int> y;
  std::vector<double> durations;
};

inline LoadedSplit load_split(const ExperimentConfig& cfg, DurationMode mode,
                              SplitSide side) {
  LoadedSplit out;
  out.events = read_event_csv(paths::events_csv(cfg, mode, side));
  const auto feats = read_feature_csv(paths::features_csv(cfg, mode, side));
  if (feats.size() != out.events.size()) {
    throw FormatError("run: event and feature CSVs disagree on row count for " +
                      paths::tag(mode, side));
  }
  out.x = Matrix(feats.size(), kEventFeatureCount);
  out.y.resize(feats.size());
  out.durations.resize(feats.size());
  for (std::size_t i = 0; i < feats.size(); ++i) {
    std::copy(feats[i].values.begin(), feats[i].values.end(), out.x.row(i).begin());
    out.y[i] = feats[i].label == EventClass::kWheeze ? 1 : 0;
    out.durations[i] = feats[i].duration_s;
  }
  return out;
}

inline std::uint64_t run_seed(const ExperimentConfig& cfg, DurationMode mode,
                              ModelFamily family, int run) {
  return mix_seed(cfg.base_seed, fnv1a64(to_string(family)),
                  static_cast<std::uint64_t>(run), fnv1a64(to_string(mode)));
}

inline nlohmann::json hyper_json(const HyperParams& hyper) {
  return detail::hyper_to_json(hyper);
}

inline void write_predictions_csv(const std::filesystem::path& path,
                                  std::span<const EventRow> events,
                                  std::span<const int> predicted,
                                  std::span<const double> scores) {
  std::string out = "recording_id,start_s,end_s,duration_s,label,predicted,score\n";
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i].event;
    out += ev.recording_id;
    out += ',';
    out += format_double(ev.start_s);
    out += ',';
    out += format_double(ev.end_s);
    out += ',';
    out += format_double(ev.duration());
    out += ',';
    out += to_string(ev.cls);
    out += ',';
    out += predicted[i] != 0 ? "wheeze" : "random";
    out += ',';
    out += format_double(scores[i]);
    out += '\n';
  }
  write_file_atomic(path, out);
}

struct PredictionRow {
  std::string recording_id;
  double start_s = 0.0;
  double end_s = 0.0;
  double duration_s = 0.0;
  EventClass label = EventClass::kWheeze;
  EventClass predicted = EventClass::kWheeze;
  double score = 0.0;
};

inline std::vector<PredictionRow> read_predictions_csv(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::vector<PredictionRow> rows;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    const std::size_t eol = text.find('\n', pos);
    const std::string_view line(text.data() + pos,
                                (eol == std::string::npos ? text.size() : eol) - pos);
    pos = eol == std::string::npos ? text.size() : eol + 1;
    ++line_no;
    if (line.empty() || line_no == 1) continue;
    const auto f = split_csv_line(line);
    const std::string ctx = path.string() + " line " + std::to_string(line_no);
    if (f.size() != 7) throw ParseError(ctx + ": expected 7 columns");
    PredictionRow row;
    row.recording_id = f[0];
    row.start_s = parse_double_strict(f[1], ctx);
    row.end_s = parse_double_strict(f[2], ctx);
    row.duration_s = parse_double_strict(f[3], ctx);
    row.label = event_class_from_string(f[4]);
    row.predicted = event_class_from_string(f[5]);
    row.score = parse_double_strict(f[6], ctx);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ConfusionCounts counts_from(std::span<const int> y, std::span<const int> pred) {
  ConfusionCounts c;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool actual = y[i] != 0;
    const bool p = pred[i] != 0;
    if (p && actual) ++c.tp;
    else if (p && !actual) ++c.fp;
    else if (!p && actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

inline nlohmann::json metrics_to_json(const ConfusionCounts& c, const MetricsReport& m) {
  return nlohmann::json{
      {"counts", {{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}}},
      {"metrics",
       {{"accuracy", m.accuracy},
        {"precision", m.precision},
        {"sensitivity", m.sensitivity},
        {"f1", m.f1},
        {"specificity", m.specificity},
        {"mcc", m.mcc}}},
      {"degenerate", m.degenerate}};
}

// Spectrogram images for the CNN, in the on-disk event order of the split.
inline std::vector<std::vector<double>> build_images(const ExperimentConfig& cfg,
                                                     const CorpusLoadResult& corpus,
                                                     std::span<const EventRow> events) {
  std::map<std::string, const CorpusEntry*> by_id;
  for (const auto& entry : corpus.entries) by_id[entry.recording.id] = &entry;
  std::vector<std::vector<double>> images(events.size());
  parallel_for(events.size(), cfg.jobs, [&](std::size_t i) {
    const auto& ev = events[i].event;
    const auto it = by_id.find(ev.recording_id);
    if (it == by_id.end()) {
      throw ArgumentError("run: recording '" + ev.recording_id +
                          "' from the event CSV is missing from the corpus");
    }
    const auto segment = prepare_segment(slice_event(it->second->recording, ev));
    images[i] = normalize01(stft_magnitude(segment)).values;
  });
  return images;
}

}  // namespace detail

inline RunSummary cmd_run(const ExperimentConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  RunSummary summary;

  // Prepared artifacts must exist for every requested mode.
  for (const DurationMode mode : cfg.modes) {
    for (const SplitSide side : {SplitSide::kTrain, SplitSide::kTest}) {
      if (!fs::exists(paths::events_csv(cfg, mode, side)) ||
          !fs::exists(paths::features_csv(cfg, mode, side))) {
        throw ArgumentError("run: prepared artifacts missing for " + paths::tag(mode, side) +
                            "; run prepare first");
      }
    }
  }

  const bool wants_cnn =
      std::find(cfg.families.begin(), cfg.families.end(), ModelFamily::kCnn) !=
      cfg.families.end();
  std::optional<CorpusLoadResult> corpus;
  if (wants_cnn) {
    const auto split = parse_split_manifest(read_text_file(cfg.split_manifest));
    corpus = load_corpus(cfg.data_dir, split, kPipelineSampleRate, cfg.jobs);
  }

  for (const DurationMode mode : cfg.modes) {
    const auto train = detail::load_split(cfg, mode, SplitSide::kTrain);
    const auto test = detail::load_split(cfg, mode, SplitSide::kTest);

    std::vector<std::vector<double>> train_images, test_images;
    if (wants_cnn) {
      train_images = detail::build_images(cfg, *corpus, train.events);
      test_images = detail::build_images(cfg, *corpus, test.events);
    }

    for (const ModelFamily family : cfg.families) {
      // --- search (once per family per mode, resumable) ---
      // A search failure takes down only this family's runs.
      HyperParams best_params;
      try {
      const fs::path search_path = paths::search_json(cfg, mode, family);
      if (fs::exists(search_path)) {
        best_params =
            detail::hyper_from_json(nlohmann::json::parse(read_text_file(search_path))
                                        .at("best"));
      } else {
        nlohmann::json search_doc;
        const std::uint64_t seed =
            mix_seed(cfg.base_seed, fnv1a64(to_string(family)), fnv1a64(to_string(mode)),
                     0x5EA2C8ULL);
        if (family == ModelFamily::kBaseline) {
          best_params = LogisticParams{cfg.baseline_l2};
          search_doc["strategy"] = "fixed baseline";
        } else if (family == ModelFamily::kCnn) {
          TrainConfig tc = cfg.training();
          const auto res =
              hyper_search_cnn(train_images, train.y, cfg.search_budget, seed, tc,
                               257, 59, 0.25, cfg.jobs);
          best_params = res.best;
          search_doc["strategy"] = "grid";
          search_doc["best_validation_mcc"] = res.best_mcc;
          search_doc["evaluations"] = res.evaluations.size();
        } else {
          const auto res = hyper_search(family, train.x, train.y, cfg.search_budget, seed);
          best_params = res.best;
          search_doc["strategy"] = "random";
          search_doc["best_validation_mcc"] = res.best_mcc;
          search_doc["evaluations"] = res.evaluations.size();
        }
        search_doc["best"] = detail::hyper_json(best_params);
        write_file_atomic(search_path, search_doc.dump(2) + "\n");
      }
      } catch (const std::exception& e) {
        for (int run = 0; run < cfg.n_runs; ++run) {
          summary.failures.push_back(std::string(to_string(mode)) + "/" +
                                     std::string(to_string(family)) + "/run" +
                                     std::to_string(run) + ": search failed: " + e.what());
        }
        continue;
      }

      // --- seeded runs ---
      auto execute_run = [&](int run) {
        const fs::path metrics_path = paths::metrics_json(cfg, mode, family, run);
        const fs::path pred_path = paths::predictions_csv(cfg, mode, family, run);
        const fs::path model_path = paths::model_file(cfg, mode, family, run);
        if (fs::exists(metrics_path) && fs::exists(pred_path) && fs::exists(model_path)) {
          return false;  // already complete
        }
        const std::uint64_t seed = detail::run_seed(cfg, mode, family, run);

        std::vector<int> predictions(test.y.size());
        std::vector<double> scores(test.y.size());
        TrainedModel model;
        if (family == ModelFamily::kCnn) {
          TrainConfig tc = cfg.training();
          tc.seed = seed;
          const auto arch = std::get<CnnArchitecture>(best_params);
          auto trained = cnn_train(arch, train_images, train.y, tc, cfg.jobs);
          const auto probs = cnn_forward(trained.model, test_images);
          for (std::size_t i = 0; i < probs.size(); ++i) {
            predictions[i] = probs[i][1] > 0.5 ? 1 : 0;
            scores[i] = std::log(std::max(probs[i][1], 1e-300)) -
                        std::log(std::max(probs[i][0], 1e-300));
          }
          model.family = ModelFamily::kCnn;
          model.hyper = arch;
          model.impl = std::move(trained.model);
        } else {
          model = train_feature_model(family, best_params, train.x, train.y);
          for (std::size_t i = 0; i < test.y.size(); ++i) {
            scores[i] = model.score(test.x.row(i));
            predictions[i] = scores[i] > 0.0 ? 1 : 0;
          }
        }

        const ConfusionCounts counts = detail::counts_from(test.y, predictions);
        const MetricsReport report = metrics(counts);
        nlohmann::json doc = detail::metrics_to_json(counts, report);
        doc["mode"] = to_string(mode);
        doc["family"] = to_string(family);
        doc["run"] = run;
        doc["seed"] = seed;
        doc["hyper"] = detail::hyper_json(best_params);

        save_model(model_path, model);
        detail::write_predictions_csv(pred_path, test.events, predictions, scores);
        write_file_atomic(metrics_path, doc.dump(2) + "\n");
        return true;
      };

      // CNN runs train with internal parallelism; the others fan out over the
      // worker pool. Either way a failed run only marks itself.
      std::mutex mutex;
      auto guarded = [&](int run) {
        try {
          const bool ran = execute_run(run);
          std::lock_guard<std::mutex> lock(mutex);
          (ran ? summary.completed : summary.skipped) += 1;
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(mutex);
          summary.failures.push_back(std::string(to_string(mode)) + "/" +
                                     std::string(to_string(family)) + "/run" +
                                     std::to_string(run) + ": " + e.what());
        }
      };
      if (family == ModelFamily::kCnn) {
        for (int run = 0; run < cfg.n_runs; ++run) guarded(run);
      } else {
        parallel_for(static_cast<std::size_t>(cfg.n_runs), cfg.jobs,
                     [&](std::size_t run) { guarded(static_cast<int>(run)); });
      }
    }
  }

  // Completion manifest (informational; resumption keys off the run files).
  nlohmann::json manifest = nlohmann::json::array();
  for (const DurationMode mode : cfg.modes) {
    for (const ModelFamily family : cfg.families) {
      for (int run = 0; run < cfg.n_runs; ++run) {
        if (fs::exists(paths::metrics_json(cfg, mode, family, run))) {
          manifest.push_back({{"mode", to_string(mode)},
                              {"family", to_string(family)},
                              {"run", run}});
        }
      }
    }
  }
  write_file_atomic(cfg.output_dir / "runs_manifest.json", manifest.dump(2) + "\n");
  return summary;
}

// ---------------------------------------------------------------------------
// audit
// ---------------------------------------------------------------------------

struct AuditResult {
  std::filesystem::path report_json;
  nlohmann::json report;
};

namespace detail {

struct FamilyRuns {
  std::vector<nlohmann::json> runs;  // per-run metrics documents
  std::vector<double> mcc;
  int best_run = -1;
};

inline double mean_of(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

inline double std_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

inline double padding_fraction(double duration_s) {
  return std::clamp(1.0 - std::min(duration_s, 2.0) / 2.0, 0.0, 1.0);
}

}  // namespace detail

inline AuditResult cmd_audit(const ExperimentConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;

  // Everything must be present; report exactly what is missing.
  std::vector<std::string> missing;
  for (const DurationMode mode : cfg.modes) {
    for (const ModelFamily family : cfg.families) {
      for (int run = 0; run < cfg.n_runs; ++run) {
        if (!fs::exists(paths::metrics_json(cfg, mode, family, run))) {
          missing.push_back(std::string(to_string(mode)) + "/" +
                            std::string(to_string(family)) + "/run" + std::to_string(run));
        }
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = "audit: missing run outputs:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw ArgumentError(msg);
  }

  static constexpr const char* kMetricNames[] = {"accuracy", "precision",  "sensitivity",
                                                 "f1",       "specificity", "mcc"};
  nlohmann::json report;
  std::map<std::string, std::map<std::string, double>> mean_mcc;  // mode -> family

  for (const DurationMode mode : cfg.modes) {
    const std::string mode_name(to_string(mode));
    nlohmann::json mode_doc;

    std::map<ModelFamily, detail::FamilyRuns> family_runs;
    for (const ModelFamily family : cfg.families) {
      detail::FamilyRuns fr;
      for (int run = 0; run < cfg.n_runs; ++run) {
        fr.runs.push_back(nlohmann::json::parse(
            read_text_file(paths::metrics_json(cfg, mode, family, run))));
        fr.mcc.push_back(fr.runs.back().at("metrics").at("mcc"));
      }
      fr.best_run = static_cast<int>(
          std::max_element(fr.mcc.begin(), fr.mcc.end()) - fr.mcc.begin());
      family_runs[family] = std::move(fr);
    }

    std::string csv = "family";
    for (const char* m : kMetricNames) {
      csv += std::string(",") + m + "_mean," + m + "_std";
    }
    csv += ",wilcoxon_p,significant\n";

    // Wilcoxon vs baseline, Bonferroni over the optimized families.
    const bool have_baseline = family_runs.count(ModelFamily::kBaseline) > 0;
    const std::size_t m_comparisons =
        have_baseline && cfg.families.size() > 1 ? cfg.families.size() - 1 : 0;
    const double threshold =
        m_comparisons > 0 ? bonferroni_threshold(0.01, m_comparisons) : 0.0;
    mode_doc["bonferroni"] = {{"alpha", 0.01},
                              {"comparisons", m_comparisons},
                              {"threshold", threshold}};

    for (const ModelFamily family : cfg.families) {
      const auto& fr = family_runs.at(family);
      nlohmann::json fam_doc;
      for (const char* metric : kMetricNames) {
        std::vector<double> values;
        for (const auto& run : fr.runs) values.push_back(run.at("metrics").at(metric));
        fam_doc[metric] = {{"mean", detail::mean_of(values)},
                           {"std", detail::std_of(values)}};
      }
      fam_doc["best_run"] = fr.best_run;
      fam_doc["best_mcc"] = fr.mcc[fr.best_run];
      fam_doc["runs"] = fr.runs;

      nlohmann::json wilcoxon = nullptr;
      bool significant = false;
      if (have_baseline && family != ModelFamily::kBaseline && cfg.n_runs >= 5) {
        const auto& base = family_runs.at(ModelFamily::kBaseline);
        const auto w = wilcoxon_right(fr.mcc, base.mcc);
        wilcoxon = {{"p", w.p_value}, {"all_zero", w.all_zero}};
        significant = w.p_value < threshold;
        fam_doc["wilcoxon_vs_baseline"] = wilcoxon;
        fam_doc["significant"] = significant;
      }
      mean_mcc[mode_name][std::string(to_string(family))] =
          fam_doc["mcc"]["mean"].get<double>();
      mode_doc["families"][std::string(to_string(family))] = fam_doc;

      csv += to_string(family);
      for (const char* metric : kMetricNames) {
        csv += "," + format_double(fam_doc[metric]["mean"].get<double>());
        csv += "," + format_double(fam_doc[metric]["std"].get<double>());
      }
      csv += wilcoxon.is_null() ? ",," : ("," + format_double(wilcoxon["p"].get<double>()) +
                                          "," + (significant ? "true" : "false"));
      csv += '\n';

      // FN duration histogram of the best run.
      const auto predictions = detail::read_predictions_csv(
          paths::predictions_csv(cfg, mode, family, fr.best_run));
      std::vector<LabeledEvent> wheezes, fns;
      for (const auto& p : predictions) {
        if (p.label != EventClass::kWheeze) continue;
        const LabeledEvent ev{p.recording_id, p.start_s, p.end_s, p.label,
                              Provenance::kAnnotated};
        wheezes.push_back(ev);
        if (p.predicted == EventClass::kRandom) fns.push_back(ev);
      }
      const auto hist = fn_duration_histogram(fns, wheezes);
      write_file_atomic(paths::report_dir(cfg) / ("hist_" + mode_name + "_" +
                                                  std::string(to_string(family)) + ".csv"),
                        duration_histogram_csv(hist));
    }
    write_file_atomic(paths::report_dir(cfg) / ("report_" + mode_name + ".csv"), csv);

    // Zero-padding-fraction probe: how separable the classes are on segment
    // padding alone.
    {
      const auto train = read_event_csv(paths::events_csv(cfg, mode, SplitSide::kTrain));
      const auto test = read_event_csv(paths::events_csv(cfg, mode, SplitSide::kTest));
      std::vector<double> x_train, x_test;
      std::vector<int> y_train, y_test;
      for (const auto& r : train) {
        x_train.push_back(detail::padding_fraction(r.event.duration()));
        y_train.push_back(r.event.cls == EventClass::kWheeze ? 1 : 0);
      }
      for (const auto& r : test) {
        x_test.push_back(detail::padding_fraction(r.event.duration()));
        y_test.push_back(r.event.cls == EventClass::kWheeze ? 1 : 0);
      }
      const ScalarProbe probe = fit_scalar_probe(x_train, y_train);
      ConfusionCounts c;
      for (std::size_t i = 0; i < x_test.size(); ++i) {
        const bool pred = probe.predict(x_test[i]);
        const bool actual = y_test[i] != 0;
        if (pred && actual) ++c.tp;
        else if (pred && !actual) ++c.fp;
        else if (!pred && actual) ++c.fn;
        else ++c.tn;
      }
      const auto probe_metrics = metrics(c);
      mode_doc["padding_probe"] = {{"train_mcc", probe.train_mcc},
                                   {"test_mcc", probe_metrics.mcc},
                                   {"threshold", probe.threshold}};
    }

    report["modes"][mode_name] = mode_doc;
  }

  // FD - VD MCC gap per family.
  if (mean_mcc.count("fd") && mean_mcc.count("vd")) {
    std::string gap_csv = "family,mcc_fd_mean,mcc_vd_mean,gap\n";
    for (const ModelFamily family : cfg.families) {
      const std::string name(to_string(family));
      const double fd = mean_mcc.at("fd").at(name);
      const double vd = mean_mcc.at("vd").at(name);
      report["mcc_gap_fd_minus_vd"][name] = fd - vd;
      gap_csv += name + "," + format_double(fd) + "," + format_double(vd) + "," +
                 format_double(fd - vd) + "\n";
    }
    write_file_atomic(paths::report_dir(cfg) / "gaps.csv", gap_csv);
  }

  AuditResult result;
  result.report = report;
  result.report_json = paths::report_dir(cfg) / "report.json";
  write_file_atomic(result.report_json, report.dump(2) + "\n");
  return result;
}

}  // namespace wheezelab
