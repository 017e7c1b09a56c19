#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <vector>

#include "wheezelab/dsp.hpp"

namespace wheezelab {
namespace {

TEST(PrepareSegment, IdentityAtExactLength) {
  std::vector<double> samples(kSegmentSamples, 0.25);
  const auto out = prepare_segment(samples);
  EXPECT_EQ(out, samples);
}

TEST(PrepareSegment, CentersShortSegments) {
  std::vector<double> samples(600, 1.0);  // 150 ms at 4 kHz
  const auto out = prepare_segment(samples);
  ASSERT_EQ(out.size(), kSegmentSamples);
  for (std::size_t i = 0; i < 3700; ++i) EXPECT_EQ(out[i], 0.0);
  for (std::size_t i = 3700; i < 4300; ++i) EXPECT_EQ(out[i], 1.0);
  for (std::size_t i = 4300; i < kSegmentSamples; ++i) EXPECT_EQ(out[i], 0.0);
}

TEST(PrepareSegment, OddDeficitPadsExtraOnRight) {
  std::vector<double> samples(601, 1.0);
  const auto out = prepare_segment(samples);
  // (8000 - 601) / 2 = 3699 (floor): left pad 3699, right pad 3700
  EXPECT_EQ(out[3698], 0.0);
  EXPECT_EQ(out[3699], 1.0);
  EXPECT_EQ(out[4299], 1.0);
  EXPECT_EQ(out[4300], 0.0);
}

TEST(PrepareSegment, TruncatesToFirstTwoSeconds) {
  std::vector<double> samples(9000);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = static_cast<double>(i);
  const auto out = prepare_segment(samples);
  ASSERT_EQ(out.size(), kSegmentSamples);
  EXPECT_EQ(out.front(), 0.0);
  EXPECT_EQ(out.back(), 7999.0);
}

TEST(PrepareSegment, EmptyRejected) {
  EXPECT_THROW(prepare_segment(std::vector<double>{}), EmptyInputError);
}

TEST(Stft, ShapeIs257By59) {
  const auto spec = stft_magnitude(std::vector<double>(kSegmentSamples, 0.0));
  EXPECT_EQ(spec.rows, 257u);
  EXPECT_EQ(spec.cols, 59u);
}

TEST(Stft, AllZeroSegmentGivesAllZeroMatrix) {
  const auto spec = stft_magnitude(std::vector<double>(kSegmentSamples, 0.0));
  for (double v : spec.values) EXPECT_EQ(v, 0.0);
}

TEST(Stft, RejectsWrongLength) {
  EXPECT_THROW(stft_magnitude(std::vector<double>(100, 0.0)), ArgumentError);
}

// Direct DFT of one windowed frame: the independent oracle for stft_magnitude.
std::vector<double> direct_frame_dft(std::span<const double> segment, std::size_t start) {
  const std::size_t n = 512;
  const auto window = hamming_window(n);
  std::vector<double> mags(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double angle = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(i) /
                           static_cast<double>(n);
      acc += segment[start + i] * window[i] *
             std::complex<double>(std::cos(angle), std::sin(angle));
    }
    mags[k] = std::abs(acc);
  }
  return mags;
}

TEST(Stft, MatchesDirectDftOracle) {
  std::vector<double> segment(kSegmentSamples);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    segment[i] = std::sin(2.0 * M_PI * 317.0 * i / 4000.0) +
                 0.3 * std::sin(2.0 * M_PI * 1100.0 * i / 4000.0 + 0.7);
  }
  const auto spec = stft_magnitude(segment);
  for (std::size_t t : {std::size_t{0}, std::size_t{13}, std::size_t{58}}) {
    const auto oracle = direct_frame_dft(segment, t * 128);
    for (std::size_t b = 0; b < spec.rows; ++b) {
      EXPECT_NEAR(spec.at(b, t), oracle[b], 1e-9);
    }
  }
}

TEST(Stft, ImpulseLightsExactlyTheCoveringFrames) {
  std::vector<double> segment(kSegmentSamples, 0.0);
  segment[4000] = 1.0;
  const auto spec = stft_magnitude(segment);
  // frames whose [start, start+512) window covers sample 4000: t in [28, 31]
  for (std::size_t t = 0; t < spec.cols; ++t) {
    double energy = 0.0;
    for (std::size_t b = 0; b < spec.rows; ++b) energy += spec.at(b, t);
    if (t >= 28 && t <= 31) {
      EXPECT_GT(energy, 0.0) << "frame " << t;
    } else {
      EXPECT_EQ(energy, 0.0) << "frame " << t;
    }
  }
}

TEST(Stft, SineArgmaxLandsOnItsBin) {
  std::vector<double> segment(kSegmentSamples);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    segment[i] = std::sin(2.0 * M_PI * 500.0 * i / 4000.0);
  }
  const auto spec = stft_magnitude(segment);
  for (std::size_t t = 0; t < spec.cols; ++t) {
    std::size_t argmax = 0;
    for (std::size_t b = 1; b < spec.rows; ++b) {
      if (spec.at(b, t) > spec.at(argmax, t)) argmax = b;
    }
    EXPECT_EQ(argmax, 64u) << "frame " << t;  // 500 / (4000/512)
  }
}

TEST(Stft, SineEnergyConcentratedNearItsFrequency) {
  std::vector<double> segment(kSegmentSamples);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    segment[i] = std::sin(2.0 * M_PI * 742.0 * i / 4000.0);
  }
  const auto spec = stft_magnitude(segment);
  const auto center = static_cast<std::ptrdiff_t>(std::round(742.0 / (4000.0 / 512.0)));
  double inside = 0.0, total = 0.0;
  for (std::size_t b = 0; b < spec.rows; ++b) {
    for (std::size_t t = 0; t < spec.cols; ++t) {
      const double e = spec.at(b, t) * spec.at(b, t);
      total += e;
      if (std::abs(static_cast<std::ptrdiff_t>(b) - center) <= 2) inside += e;
    }
  }
  EXPECT_GT(inside / total, 0.9);
}

TEST(Stft, HopShiftMovesColumnsByOne) {
  std::vector<double> base(kSegmentSamples, 0.0);
  std::uint64_t state = 88172645463325252ull;  // xorshift pseudo-noise
  for (auto& v : base) {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    v = static_cast<double>(state % 2000) / 1000.0 - 1.0;
  }
  std::vector<double> shifted(kSegmentSamples, 0.0);
  for (std::size_t i = 128; i < kSegmentSamples; ++i) shifted[i] = base[i - 128];

  const auto a = stft_magnitude(base);
  const auto b = stft_magnitude(shifted);
  for (std::size_t t = 1; t < a.cols; ++t) {
    for (std::size_t bin = 0; bin < a.rows; ++bin) {
      EXPECT_NEAR(b.at(bin, t), a.at(bin, t - 1), 1e-9);
    }
  }
}

TEST(Normalize01, AffineMapAndDegenerateCase) {
  Spectrogram spec(2, 2);
  spec.at(0, 0) = 2.0;
  spec.at(0, 1) = 4.0;
  spec.at(1, 0) = 6.0;
  spec.at(1, 1) = 3.0;
  const auto out = normalize01(spec);
  EXPECT_DOUBLE_EQ(out.at(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(out.at(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(out.at(1, 0), 1.0);

  Spectrogram constant(3, 3);
  std::fill(constant.values.begin(), constant.values.end(), 7.0);
  const auto zeros = normalize01(constant);
  for (double v : zeros.values) EXPECT_EQ(v, 0.0);
}

TEST(Normalize01, OutputSpansUnitRange) {
  std::vector<double> segment(kSegmentSamples);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    segment[i] = std::sin(2.0 * M_PI * 321.0 * i / 4000.0);
  }
  const auto out = normalize01(stft_magnitude(segment));
  const auto [mn, mx] = std::minmax_element(out.values.begin(), out.values.end());
  EXPECT_DOUBLE_EQ(*mn, 0.0);
  EXPECT_DOUBLE_EQ(*mx, 1.0);
}

TEST(SpectrogramIo, BinaryRoundTripWithinFloat32) {
  Spectrogram spec(5, 7);
  for (std::size_t i = 0; i < spec.values.size(); ++i) {
    spec.values[i] = std::sin(static_cast<double>(i));
  }
  const auto path = std::filesystem::temp_directory_path() / "wzlab_spec.bin";
  write_spectrogram(path, spec);
  const auto back = read_spectrogram(path);
  ASSERT_EQ(back.rows, spec.rows);
  ASSERT_EQ(back.cols, spec.cols);
  for (std::size_t i = 0; i < spec.values.size(); ++i) {
    EXPECT_NEAR(back.values[i], spec.values[i], 1e-6);
  }
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace wheezelab
