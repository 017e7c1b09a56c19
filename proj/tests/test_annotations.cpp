#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>

#include "wheezelab/annotations.hpp"
#include "wheezelab/corpus.hpp"
#include "wheezelab/rng.hpp"

namespace wheezelab {
namespace {

TEST(ParseAnnotations, DirectFieldMapping) {
  const auto events = parse_annotations("0.5 1.2 0 1\n", "rec");
  ASSERT_EQ(events.size(), 1u);
  EXPECT_DOUBLE_EQ(events[0].start_s, 0.5);
  EXPECT_DOUBLE_EQ(events[0].end_s, 1.2);
  EXPECT_EQ(events[0].cls, EventClass::kWheeze);
  EXPECT_EQ(events[0].prov, Provenance::kAnnotated);
  EXPECT_EQ(events[0].recording_id, "rec");
}

TEST(ParseAnnotations, CrackleOnlyLineIgnored) {
  EXPECT_TRUE(parse_annotations("0.5 1.2 1 0\n", "rec").empty());
}

TEST(ParseAnnotations, MixedFileAndBlankLines) {
  const auto events = parse_annotations(
      "0.1 0.4 0 0\n"
      "\n"
      "0.5\t1.2 1 1\n"
      "2.0 2.75 0 1\r\n",
      "rec");
  ASSERT_EQ(events.size(), 2u);
  EXPECT_DOUBLE_EQ(events[1].start_s, 2.0);
}

TEST(ParseAnnotations, ErrorsCarryLineNumbers) {
  try {
    parse_annotations("0.1 0.2 0 1\nabc 0.2 0 1\n", "rec");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_annotations("0.5 0.5 0 1\n", "r"), ParseError);  // end <= start
  EXPECT_THROW(parse_annotations("0.5 1.0 0\n", "r"), ParseError);    // 3 fields
  EXPECT_THROW(parse_annotations("0.5 1.0 0 2\n", "r"), ParseError);  // bad flag
}

TEST(ParseAnnotations, SerializeRoundTripExact) {
  Rng rng(77);
  std::vector<LabeledEvent> events;
  for (int i = 0; i < 50; ++i) {
    const double start = rng.uniform(0.0, 20.0);
    const double end = start + rng.uniform(1e-4, 3.0);
    events.push_back({"rec", start, end, EventClass::kWheeze, Provenance::kAnnotated});
  }
  const auto parsed = parse_annotations(serialize_annotations(events), "rec");
  ASSERT_EQ(parsed.size(), events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    EXPECT_EQ(parsed[i].start_s, events[i].start_s);  // bit-exact
    EXPECT_EQ(parsed[i].end_s, events[i].end_s);
  }
}

AudioRecording ramp_recording(std::size_t n, int rate) {
  AudioRecording rec;
  rec.id = "ramp";
  rec.sample_rate = rate;
  rec.samples.resize(n);
  std::iota(rec.samples.begin(), rec.samples.end(), 0.0);
  for (auto& s : rec.samples) s /= static_cast<double>(n);  // keep in [-1,1]
  return rec;
}

TEST(SliceEvent, WholeRecording) {
  const auto rec = ramp_recording(8000, 4000);
  const LabeledEvent ev{"ramp", 0.0, rec.duration(), EventClass::kWheeze,
                        Provenance::kAnnotated};
  EXPECT_EQ(slice_event(rec, ev).size(), rec.samples.size());
}

TEST(SliceEvent, SampleCountArithmetic) {
  const auto rec = ramp_recording(8000, 4000);
  const LabeledEvent ev{"ramp", 1.0, 1.5, EventClass::kWheeze, Provenance::kAnnotated};
  EXPECT_EQ(slice_event(rec, ev).size(), 2000u);
}

TEST(SliceEvent, IndicesMatchDirectIndexing) {
  const auto rec = ramp_recording(8000, 4000);
  const LabeledEvent ev{"ramp", 0.25, 0.35, EventClass::kWheeze, Provenance::kAnnotated};
  const auto seg = slice_event(rec, ev);
  ASSERT_EQ(seg.size(), 400u);  // [1000, 1400)
  EXPECT_DOUBLE_EQ(seg.front(), rec.samples[1000]);
  EXPECT_DOUBLE_EQ(seg.back(), rec.samples[1399]);
}

TEST(SliceEvent, OutOfBoundsRejected) {
  const auto rec = ramp_recording(4000, 4000);
  const LabeledEvent ev{"ramp", 0.5, 1.5, EventClass::kWheeze, Provenance::kAnnotated};
  EXPECT_THROW(slice_event(rec, ev), RangeError);
}

TEST(SliceEvent, NonOverlappingSlicesCoverAtMostRecording) {
  const auto rec = ramp_recording(8000, 4000);
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    double t = 0.0;
    std::size_t total = 0;
    while (true) {
      const double start = t + rng.uniform(0.0, 0.3);
      const double end = start + rng.uniform(0.01, 0.5);
      if (end >= rec.duration()) break;
      total += slice_event(rec, {"ramp", start, end, EventClass::kWheeze,
                                 Provenance::kAnnotated})
                   .size();
      t = end;
    }
    EXPECT_LE(total, rec.samples.size());
  }
}

TEST(SplitManifest, ParsesAndRejectsDuplicates) {
  const auto split = parse_split_manifest("a train\nb test\n\nc train\n");
  EXPECT_EQ(split.size(), 3u);
  EXPECT_EQ(split.at("b"), SplitSide::kTest);
  EXPECT_THROW(parse_split_manifest("a train\na test\n"), ParseError);
  EXPECT_THROW(parse_split_manifest("a validation\n"), ParseError);
}

class CorpusFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() / "wzlab_corpus_test";
    std::filesystem::create_directories(dir_);
    std::vector<double> samples(12000, 0.0);  // 3 s at 4 kHz
    for (std::size_t i = 0; i < samples.size(); ++i) {
      samples[i] = 0.1 * std::sin(2.0 * M_PI * 300.0 * i / 4000.0);
    }
    save_wav_16bit(dir_ / "rec_a.wav", samples, 4000);
    write_file_atomic(dir_ / "rec_a.txt", "0.5 1.0 0 1\n1.5 5.0 0 1\n");
    save_wav_16bit(dir_ / "rec_b.wav", samples, 4000);
    write_file_atomic(dir_ / "rec_b.txt", "");
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::filesystem::path dir_;
};

TEST_F(CorpusFixture, ClipsOverlongAnnotationsAndWarns) {
  std::vector<std::string> warnings;
  const auto entry =
      load_corpus_entry(dir_ / "rec_a.wav", dir_ / "rec_a.txt", SplitSide::kTrain,
                        4000, &warnings);
  ASSERT_EQ(entry.wheezes.size(), 2u);
  EXPECT_DOUBLE_EQ(entry.wheezes[1].end_s, 3.0);  // clipped from 5.0
  EXPECT_EQ(warnings.size(), 1u);
}

TEST_F(CorpusFixture, MissingFilesListedBeforeAnyWork) {
  std::map<std::string, SplitSide> split{{"rec_a", SplitSide::kTrain},
                                         {"missing", SplitSide::kTest}};
  try {
    load_corpus(dir_, split);
    FAIL() << "expected ArgumentError";
  } catch (const ArgumentError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("missing.wav"), std::string::npos);
    EXPECT_NE(msg.find("missing.txt"), std::string::npos);
  }
}

TEST_F(CorpusFixture, LoadsAllManifestEntries) {
  std::map<std::string, SplitSide> split{{"rec_a", SplitSide::kTrain},
                                         {"rec_b", SplitSide::kTest}};
  const auto result = load_corpus(dir_, split);
  ASSERT_EQ(result.entries.size(), 2u);
  EXPECT_EQ(result.entries[0].recording.id, "rec_a");
  EXPECT_EQ(result.entries[1].wheezes.size(), 0u);
  EXPECT_EQ(result.entries[1].split, SplitSide::kTest);
}

}  // namespace
}  // namespace wheezelab
