// Seeded generation of non-wheeze ("random") events per recording, in two
// modes: fixed 150 ms durations (fd) and Burr-distributed variable durations
// (vd). Placement partitions the recording into consecutive 5 s windows, lets
// at most one event start per window, and never overlaps an annotated wheeze.
// The per-file seed is derived only from the base seed and the recording id,
// so both modes share window assignments.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wheezelab/annotations.hpp"
#include "wheezelab/burr.hpp"
#include "wheezelab/errors.hpp"
#include "wheezelab/ioutil.hpp"
#include "wheezelab/rng.hpp"

namespace wheezelab {

enum class DurationMode { kFixed, kVariable };

inline std::string_view to_string(DurationMode m) {
  return m == DurationMode::kFixed ? "fd" : "vd";
}

inline DurationMode duration_mode_from_string(std::string_view s) {
  if (s == "fd") return DurationMode::kFixed;
  if (s == "vd") return DurationMode::kVariable;
  throw ParseError("unknown duration mode: '" + std::string(s) + "'");
}

// Generated events per wheeze, matching the 40/60 wheeze/random class split.
inline constexpr double kRandomToWheezeRatio = 1.534;

struct GenerationConfig {
  DurationMode mode = DurationMode::kFixed;
  double fd_duration = 0.150;    // seconds
  double vd_min = 0.100;         // seconds
  double vd_max = 2.0;           // seconds
  double spacing_window = 5.0;   // seconds, at most one event starts per window
  std::uint64_t base_seed = 0;
  BurrParams burr;

  void validate() const {
    if (!(vd_min > 0.0) || !(vd_min < vd_max)) {
      throw ArgumentError("GenerationConfig: need 0 < vd_min < vd_max");
    }
    if (!(fd_duration >= vd_min) || !(fd_duration <= vd_max)) {
      throw ArgumentError("GenerationConfig: fd_duration outside [vd_min, vd_max]");
    }
    if (!(spacing_window > 0.0)) {
      throw ArgumentError("GenerationConfig: spacing_window must be positive");
    }
    burr.validate();
  }
};

inline std::uint64_t per_recording_seed(std::uint64_t base_seed, std::string_view id) {
  return mix_seed(base_seed, fnv1a64(id));
}

// One event duration. Fixed mode consumes no randomness.
inline double sample_duration(Rng& rng, const GenerationConfig& cfg) {
  cfg.validate();
  if (cfg.mode == DurationMode::kFixed) return cfg.fd_duration;
  return sample_burr_truncated(rng, cfg.burr, cfg.vd_min, cfg.vd_max);
}

struct GenerationResult {
  std::vector<LabeledEvent> events;
  std::vector<std::string> warnings;
  std::uint64_t seed = 0;  // the per-recording seed actually used
};

// Generates min(floor(duration/window), round(1.534 * |wheezes|)) events,
// zero when the recording has no wheezes. Windows are chosen uniformly
// without replacement before any duration is drawn; start times are then
// rejection-sampled inside each window against the wheeze intervals, with a
// global 10^4 attempt budget (exhaustion drops events, never fails hard).
inline GenerationResult generate_events(const std::string& recording_id,
                                        double recording_duration,
                                        std::span<const LabeledEvent> wheezes,
                                        const GenerationConfig& cfg) {
  cfg.validate();
  if (!(recording_duration > 0.0)) {
    throw ArgumentError("generate_events: recording duration must be positive");
  }

  GenerationResult result;
  result.seed = per_recording_seed(cfg.base_seed, recording_id);
  if (wheezes.empty()) return result;

  const auto full_windows =
      static_cast<std::size_t>(std::floor(recording_duration / cfg.spacing_window));
  const auto by_ratio = static_cast<std::size_t>(
      std::llround(kRandomToWheezeRatio * static_cast<double>(wheezes.size())));
  const std::size_t target = std::min(full_windows, by_ratio);
  if (target == 0) return result;

  Rng rng(result.seed);
  std::vector<std::size_t> windows = sample_without_replacement(full_windows, target, rng);
  std::sort(windows.begin(), windows.end());

  auto overlaps_wheeze = [&wheezes](double start, double end) {
    for (const auto& w : wheezes) {
      if (start < w.end_s && w.start_s < end) return true;
    }
    return false;
  };

  int attempts_left = 10'000;
  for (std::size_t w : windows) {
    const double window_start = static_cast<double>(w) * cfg.spacing_window;
    const double window_end = window_start + cfg.spacing_window;
    bool placed = false;
    while (attempts_left > 0) {
      --attempts_left;
      const double duration = sample_duration(rng, cfg);
      // Event must start inside its window and fit inside the recording;
      // spilling into the next window is fine.
      const double upper = std::min(window_end, recording_duration - duration);
      if (upper <= window_start) continue;
      const double start = rng.uniform(window_start, upper);
      const double end = start + duration;
      if (overlaps_wheeze(start, end)) continue;
      result.events.push_back(LabeledEvent{recording_id, start, end, EventClass::kRandom,
                                           Provenance::kGenerated});
      placed = true;
      break;
    }
    if (!placed) {
      result.warnings.push_back(recording_id + ": gave up placing an event in window " +
                                std::to_string(w) + " (attempt budget exhausted)");
      if (attempts_left <= 0) break;
    }
  }
  if (result.events.size() < target && attempts_left <= 0) {
    result.warnings.push_back(recording_id + ": placed " +
                              std::to_string(result.events.size()) + " of " +
                              std::to_string(target) + " requested events");
  }
  return result;
}

// Event-list CSV: one row per event, both annotated and generated.
struct EventRow {
  LabeledEvent event;
  DurationMode mode = DurationMode::kFixed;
  std::uint64_t seed = 0;
};

inline constexpr std::string_view kEventCsvHeader =
    "recording_id,start_s,end_s,class,provenance,mode,seed";

inline std::string event_csv_to_string(std::span<const EventRow> rows) {
  std::string out(kEventCsvHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += r.event.recording_id;
    out += ',';
    out += format_double(r.event.start_s);
    out += ',';
    out += format_double(r.event.end_s);
    out += ',';
    out += to_string(r.event.cls);
    out += ',';
    out += to_string(r.event.prov);
    out += ',';
    out += to_string(r.mode);
    out += ',';
    out += std::to_string(r.seed);
    out += '\n';
  }
  return out;
}

inline void write_event_csv(const std::filesystem::path& path,
                            std::span<const EventRow> rows) {
  write_file_atomic(path, event_csv_to_string(rows));
}

inline std::vector<EventRow> read_event_csv(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::vector<EventRow> rows;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    const std::size_t eol = text.find('\n', pos);
    const std::string_view line(text.data() + pos,
                                (eol == std::string::npos ? text.size() : eol) - pos);
    pos = eol == std::string::npos ? text.size() : eol + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kEventCsvHeader) {
        throw ParseError(path.string() + ": unexpected event CSV header");
      }
      continue;
    }
    const auto f = split_csv_line(line);
    const std::string ctx = path.string() + " line " + std::to_string(line_no);
    if (f.size() != 7) throw ParseError(ctx + ": expected 7 columns");
    EventRow row;
    row.event.recording_id = f[0];
    row.event.start_s = parse_double_strict(f[1], ctx);
    row.event.end_s = parse_double_strict(f[2], ctx);
    row.event.cls = event_class_from_string(f[3]);
    row.event.prov = provenance_from_string(f[4]);
    row.mode = duration_mode_from_string(f[5]);
    row.seed = parse_uint_strict(f[6], ctx);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace wheezelab
