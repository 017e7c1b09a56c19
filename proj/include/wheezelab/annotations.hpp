// Labeled events and their text formats: the 4-column annotation convention
// (start end crackle_flag wheeze_flag), the two-column train/test split
// manifest, and event slicing out of a recording.
#pragma once

#include <cmath>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wheezelab/audio.hpp"
#include "wheezelab/errors.hpp"
#include "wheezelab/ioutil.hpp"

namespace wheezelab {

enum class EventClass { kWheeze, kRandom };
enum class Provenance { kAnnotated, kGenerated };

inline std::string_view to_string(EventClass c) {
  return c == EventClass::kWheeze ? "wheeze" : "random";
}

inline std::string_view to_string(Provenance p) {
  return p == Provenance::kAnnotated ? "annotated" : "generated";
}

inline EventClass event_class_from_string(std::string_view s) {
  if (s == "wheeze") return EventClass::kWheeze;
  if (s == "random") return EventClass::kRandom;
  throw ParseError("unknown event class: '" + std::string(s) + "'");
}

inline Provenance provenance_from_string(std::string_view s) {
  if (s == "annotated") return Provenance::kAnnotated;
  if (s == "generated") return Provenance::kGenerated;
  throw ParseError("unknown provenance: '" + std::string(s) + "'");
}

struct LabeledEvent {
  std::string recording_id;
  double start_s = 0.0;
  double end_s = 0.0;
  EventClass cls = EventClass::kWheeze;
  Provenance prov = Provenance::kAnnotated;

  double duration() const { return end_s - start_s; }
};

// Parses annotation text. Each non-empty line must carry exactly
// start_s, end_s, crackle_flag, wheeze_flag. Lines whose wheeze flag is 0 are
// skipped (crackles are out of scope here).
inline std::vector<LabeledEvent> parse_annotations(std::string_view text,
                                                   std::string_view recording_id) {
  std::vector<LabeledEvent> events;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    const std::string ctx = "annotation line " + std::to_string(line_no);
    if (fields.size() != 4) {
      throw ParseError(ctx + ": expected 4 fields, got " + std::to_string(fields.size()));
    }
    const double start = parse_double_strict(fields[0], ctx);
    const double end = parse_double_strict(fields[1], ctx);
    const long long crackle = parse_int_strict(fields[2], ctx);
    const long long wheeze = parse_int_strict(fields[3], ctx);
    if (crackle != 0 && crackle != 1) throw ParseError(ctx + ": crackle flag must be 0 or 1");
    if (wheeze != 0 && wheeze != 1) throw ParseError(ctx + ": wheeze flag must be 0 or 1");
    if (end <= start) throw ParseError(ctx + ": end <= start");
    if (wheeze == 1) {
      events.push_back(LabeledEvent{std::string(recording_id), start, end,
                                    EventClass::kWheeze, Provenance::kAnnotated});
    }
  }
  return events;
}

inline std::string serialize_annotations(std::span<const LabeledEvent> events) {
  std::string out;
  for (const auto& ev : events) {
    out += format_double(ev.start_s);
    out += ' ';
    out += format_double(ev.end_s);
    out += " 0 1\n";
  }
  return out;
}

// Samples from floor(start*rate) inclusive to floor(end*rate) exclusive.
// The tiny bias keeps decimal annotation times (not exactly representable in
// binary) from landing one sample short.
inline std::vector<double> slice_event(const AudioRecording& rec, const LabeledEvent& ev) {
  if (ev.start_s < 0.0 || ev.end_s <= ev.start_s || ev.end_s > rec.duration() + 1e-9) {
    throw RangeError("slice_event: event [" + format_double(ev.start_s) + ", " +
                     format_double(ev.end_s) + ") outside recording " + rec.id);
  }
  const double rate = rec.sample_rate;
  auto index_of = [rate](double t) {
    return static_cast<std::size_t>(std::floor(t * rate + 1e-6));
  };
  const std::size_t begin = index_of(ev.start_s);
  const std::size_t end = std::min(index_of(ev.end_s), rec.samples.size());
  if (begin >= end) throw RangeError("slice_event: empty slice");
  return std::vector<double>(rec.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                             rec.samples.begin() + static_cast<std::ptrdiff_t>(end));
}

enum class SplitSide { kTrain, kTest };

inline std::string_view to_string(SplitSide s) {
  return s == SplitSide::kTrain ? "train" : "test";
}

// Two whitespace-separated columns per line: recording_id, train|test.
inline std::map<std::string, SplitSide> parse_split_manifest(std::string_view text) {
  std::map<std::string, SplitSide> split;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    const std::string ctx = "split manifest line " + std::to_string(line_no);
    if (fields.size() != 2) throw ParseError(ctx + ": expected 2 fields");
    const std::string id(fields[0]);
    SplitSide side;
    if (fields[1] == "train") {
      side = SplitSide::kTrain;
    } else if (fields[1] == "test") {
      side = SplitSide::kTest;
    } else {
      throw ParseError(ctx + ": expected train|test, got '" + std::string(fields[1]) + "'");
    }
    if (!split.emplace(id, side).second) {
      throw ParseError(ctx + ": duplicate recording id '" + id + "'");
    }
  }
  return split;
}

}  // namespace wheezelab
