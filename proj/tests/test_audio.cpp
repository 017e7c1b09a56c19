#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <vector>

#include "wheezelab/audio.hpp"
#include "wheezelab/dsp.hpp"

namespace wheezelab {
namespace {

// Hand-rolled little-endian WAV builder, independent of save_wav_16bit.
std::vector<std::uint8_t> make_wav(const std::vector<std::int16_t>& interleaved,
                                   std::uint16_t channels, std::uint32_t rate,
                                   std::uint16_t format_tag = 1,
                                   std::uint16_t bits = 16) {
  std::vector<std::uint8_t> b;
  auto u16 = [&b](std::uint16_t v) {
    b.push_back(v & 0xFF);
    b.push_back(v >> 8);
  };
  auto u32 = [&b](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xFF);
  };
  const std::uint32_t data_size = static_cast<std::uint32_t>(interleaved.size() * 2);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  u32(36 + data_size);
  b.insert(b.end(), {'W', 'A', 'V', 'E'});
  b.insert(b.end(), {'f', 'm', 't', ' '});
  u32(16);
  u16(format_tag);
  u16(channels);
  u32(rate);
  u32(rate * channels * 2);
  u16(channels * 2);
  u16(bits);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  u32(data_size);
  for (std::int16_t s : interleaved) u16(static_cast<std::uint16_t>(s));
  return b;
}

TEST(LoadWav, HeaderArithmetic) {
  std::vector<std::int16_t> samples(8000, 1000);
  const auto rec = load_wav(make_wav(samples, 1, 4000), "r1");
  EXPECT_EQ(rec.sample_rate, 4000);
  EXPECT_EQ(rec.samples.size(), 8000u);
  EXPECT_DOUBLE_EQ(rec.duration(), 2.0);
}

TEST(LoadWav, StereoAveragesToMono) {
  std::vector<std::int16_t> interleaved;
  for (int i = 0; i < 100; ++i) {
    interleaved.push_back(16384);   // L = +0.5
    interleaved.push_back(-16384);  // R = -0.5
  }
  const auto rec = load_wav(make_wav(interleaved, 2, 8000));
  ASSERT_EQ(rec.samples.size(), 100u);
  for (double s : rec.samples) EXPECT_DOUBLE_EQ(s, 0.0);
}

TEST(LoadWav, FullScaleNegative) {
  // Oracle: -32768 / 32768 = -1 exactly.
  const auto rec = load_wav(make_wav({-32768, 32767}, 1, 4000));
  EXPECT_DOUBLE_EQ(rec.samples[0], -1.0);
  EXPECT_DOUBLE_EQ(rec.samples[1], 32767.0 / 32768.0);
}

TEST(LoadWav, Errors) {
  EXPECT_THROW(load_wav(std::vector<std::uint8_t>{1, 2, 3}), FormatError);
  EXPECT_THROW(load_wav(make_wav({1, 2}, 1, 4000, /*format=*/3)), UnsupportedError);
  EXPECT_THROW(load_wav(make_wav({}, 1, 4000)), EmptyInputError);
  // 8-bit payload claim
  EXPECT_THROW(load_wav(make_wav({1, 2}, 1, 4000, 1, /*bits=*/8)), UnsupportedError);
}

TEST(LoadWav, SkipsUnknownChunks) {
  auto bytes = make_wav({100, 200, 300}, 1, 4000);
  // splice a LIST chunk between fmt and data
  std::vector<std::uint8_t> extra = {'L', 'I', 'S', 'T', 4, 0, 0, 0, 'I', 'N', 'F', 'O'};
  bytes.insert(bytes.begin() + 36, extra.begin(), extra.end());
  // fix RIFF size
  const std::uint32_t riff = static_cast<std::uint32_t>(bytes.size() - 8);
  for (int i = 0; i < 4; ++i) bytes[4 + i] = (riff >> (8 * i)) & 0xFF;
  const auto rec = load_wav(bytes);
  EXPECT_EQ(rec.samples.size(), 3u);
}

TEST(Resample, IdentityAtTargetRate) {
  AudioRecording rec;
  rec.id = "id";
  rec.sample_rate = 4000;
  rec.samples = {0.1, -0.2, 0.3};
  const auto out = resample(rec, 4000);
  EXPECT_EQ(out.samples, rec.samples);
}

TEST(Resample, LengthRounding) {
  AudioRecording rec;
  rec.sample_rate = 44100;
  rec.samples.assign(88200, 0.0);  // 2 s
  const auto out = resample(rec, 4000);
  EXPECT_NEAR(static_cast<double>(out.samples.size()), 8000.0, 1.0);
  EXPECT_EQ(out.sample_rate, 4000);
}

TEST(Resample, SinePreservedThroughDecimation) {
  // Oracle: STFT peak-pick of the resampled signal must sit within one bin of
  // 440 Hz.
  AudioRecording rec;
  rec.sample_rate = 44100;
  rec.samples.resize(88200);
  for (std::size_t i = 0; i < rec.samples.size(); ++i) {
    rec.samples[i] = 0.5 * std::sin(2.0 * M_PI * 440.0 * i / 44100.0);
  }
  const auto out = resample(rec, 4000);
  ASSERT_GE(out.samples.size(), kSegmentSamples);
  const auto spec = stft_magnitude(
      std::span<const double>(out.samples.data(), kSegmentSamples));
  // average over interior frames, then argmax
  std::vector<double> profile(spec.rows, 0.0);
  for (std::size_t b = 0; b < spec.rows; ++b) {
    for (std::size_t t = 0; t < spec.cols; ++t) profile[b] += spec.at(b, t);
  }
  const auto peak_bin = static_cast<double>(
      std::max_element(profile.begin(), profile.end()) - profile.begin());
  const double bin_hz = 4000.0 / 512.0;
  EXPECT_NEAR(peak_bin * bin_hz, 440.0, bin_hz);
  // amplitude should survive (anti-alias filter passband)
  double peak_amp = 0.0;
  for (double s : out.samples) peak_amp = std::max(peak_amp, std::abs(s));
  EXPECT_GT(peak_amp, 0.4);
}

TEST(Resample, IdempotentAtTargetRate) {
  AudioRecording rec;
  rec.sample_rate = 10000;
  rec.samples.resize(10000);
  for (std::size_t i = 0; i < rec.samples.size(); ++i) {
    rec.samples[i] = 0.3 * std::sin(2.0 * M_PI * 200.0 * i / 10000.0);
  }
  const auto once = resample(rec, 4000);
  const auto twice = resample(once, 4000);
  EXPECT_EQ(once.samples, twice.samples);
}

TEST(Resample, RejectsBadRate) {
  AudioRecording rec;
  rec.sample_rate = 4000;
  rec.samples = {0.0};
  EXPECT_THROW(resample(rec, 0), ArgumentError);
  EXPECT_THROW(resample(rec, -1), ArgumentError);
}

TEST(SaveWav, RoundTripsThroughLoader) {
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "wzlab_roundtrip.wav";
  std::vector<double> samples(400);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = 0.25 * std::sin(2.0 * M_PI * 100.0 * i / 4000.0);
  }
  save_wav_16bit(path, samples, 4000);
  const auto rec = load_wav_file(path);
  ASSERT_EQ(rec.samples.size(), samples.size());
  EXPECT_EQ(rec.sample_rate, 4000);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_NEAR(rec.samples[i], samples[i], 1.0 / 32768.0);
  }
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace wheezelab
