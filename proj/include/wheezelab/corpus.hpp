// Corpus assembly: pairs .wav files with sibling .txt annotation files,
// resamples everything to the pipeline rate, and materializes per-recording
// wheeze events. Annotation intervals reaching past the end of a recording
// are clipped (and noted), not rejected.
#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "wheezelab/annotations.hpp"
#include "wheezelab/audio.hpp"
#include "wheezelab/errors.hpp"
#include "wheezelab/ioutil.hpp"
#include "wheezelab/threading.hpp"

namespace wheezelab {

inline constexpr int kPipelineSampleRate = 4000;

struct CorpusEntry {
  AudioRecording recording;          // resampled to kPipelineSampleRate
  std::vector<LabeledEvent> wheezes; // annotated, clipped to the recording
  SplitSide split = SplitSide::kTrain;
};

struct DatasetSplit {
  std::vector<LabeledEvent> train;
  std::vector<LabeledEvent> test;
};

struct CorpusLoadResult {
  std::vector<CorpusEntry> entries;  // sorted by recording id
  std::vector<std::string> warnings;
};

// Loads one recording plus its annotations, resampling and clipping.
inline CorpusEntry load_corpus_entry(const std::filesystem::path& wav_path,
                                     const std::filesystem::path& annotation_path,
                                     SplitSide split, int target_rate,
                                     std::vector<std::string>* warnings = nullptr) {
  CorpusEntry entry;
  entry.split = split;
  entry.recording = resample(load_wav_file(wav_path), target_rate);

  const double duration = entry.recording.duration();
  auto events = parse_annotations(read_text_file(annotation_path), entry.recording.id);
  for (auto& ev : events) {
    if (ev.start_s >= duration) {
      if (warnings) {
        warnings->push_back(entry.recording.id + ": dropped annotation starting at " +
                            format_double(ev.start_s) + " s beyond recording end");
      }
      continue;
    }
    if (ev.end_s > duration) {
      if (warnings) {
        warnings->push_back(entry.recording.id + ": clipped annotation end " +
                            format_double(ev.end_s) + " s to recording end " +
                            format_double(duration) + " s");
      }
      ev.end_s = duration;
    }
    entry.wheezes.push_back(std::move(ev));
  }
  std::sort(entry.wheezes.begin(), entry.wheezes.end(),
            [](const LabeledEvent& a, const LabeledEvent& b) { return a.start_s < b.start_s; });
  return entry;
}

// Scans data_dir against the split manifest. Every manifest entry must have
// both its .wav and .txt present; all gaps are reported together before any
// work happens.
inline CorpusLoadResult load_corpus(const std::filesystem::path& data_dir,
                                    const std::map<std::string, SplitSide>& split,
                                    int target_rate = kPipelineSampleRate,
                                    unsigned jobs = 0) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(data_dir)) {
    throw ArgumentError("load_corpus: not a directory: " + data_dir.string());
  }

  std::vector<std::string> missing;
  struct Job {
    std::string id;
    fs::path wav, txt;
    SplitSide side;
  };
  std::vector<Job> jobs_list;
  for (const auto& [id, side] : split) {
    const fs::path wav = data_dir / (id + ".wav");
    const fs::path txt = data_dir / (id + ".txt");
    if (!fs::exists(wav)) missing.push_back(wav.string());
    if (!fs::exists(txt)) missing.push_back(txt.string());
    if (fs::exists(wav) && fs::exists(txt)) jobs_list.push_back({id, wav, txt, side});
  }
  if (!missing.empty()) {
    std::string msg = "load_corpus: missing corpus files:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw ArgumentError(msg);
  }

  CorpusLoadResult result;
  result.entries.resize(jobs_list.size());
  std::vector<std::vector<std::string>> per_entry_warnings(jobs_list.size());
  parallel_for(jobs_list.size(), jobs, [&](std::size_t i) {
    result.entries[i] = load_corpus_entry(jobs_list[i].wav, jobs_list[i].txt,
                                          jobs_list[i].side, target_rate,
                                          &per_entry_warnings[i]);
  });
  for (auto& w : per_entry_warnings) {
    result.warnings.insert(result.warnings.end(), w.begin(), w.end());
  }
  return result;
}

}  // namespace wheezelab
