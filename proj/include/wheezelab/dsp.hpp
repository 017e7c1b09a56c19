// Event segment -> fixed-shape spectrogram. A variable-length event at 4 kHz
// is fitted into exactly 2 s (centered zero-padding, or truncation to the
// first 2 s), then transformed with a 512-sample Hamming window and hop 128
// into a 257 x 59 magnitude matrix. normalize01 rescales into [0, 1] for
// image-style consumers; feature extraction reads the raw magnitudes.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "wheezelab/errors.hpp"
#include "wheezelab/fft.hpp"
#include "wheezelab/ioutil.hpp"

namespace wheezelab {

inline constexpr int kSegmentSampleRate = 4000;
inline constexpr std::size_t kSegmentSamples = 8000;  // 2 s at 4 kHz

struct StftConfig {
  std::size_t window_length = 512;  // 128 ms at 4 kHz
  std::size_t hop = 128;            // 75% overlap
  std::size_t fft_size = 512;

  void validate() const {
    if (hop != window_length / 4) throw ArgumentError("StftConfig: hop must be window/4");
    if (fft_size < window_length) throw ArgumentError("StftConfig: fft_size < window");
    if ((fft_size & (fft_size - 1)) != 0) throw ArgumentError("StftConfig: fft_size not 2^n");
  }

  std::size_t bins() const { return fft_size / 2 + 1; }
  std::size_t frames(std::size_t segment_length) const {
    return (segment_length - window_length) / hop + 1;
  }
};

// Frequency-major matrix: rows = bins, columns = time frames.
struct Spectrogram {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major

  Spectrogram() = default;
  Spectrogram(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& at(std::size_t bin, std::size_t frame) { return values[bin * cols + frame]; }
  double at(std::size_t bin, std::size_t frame) const { return values[bin * cols + frame]; }

  double bin_hz() const {
    return static_cast<double>(kSegmentSampleRate) / (2.0 * (static_cast<double>(rows) - 1.0));
  }
  double frame_seconds() const { return 128.0 / kSegmentSampleRate; }
};

// Fits samples into exactly kSegmentSamples: shorter events are centered with
// equal zero pad (odd deficit -> extra sample on the right); longer events
// keep their first 2 s.
inline std::vector<double> prepare_segment(std::span<const double> samples) {
  if (samples.empty()) throw EmptyInputError("prepare_segment: empty segment");
  std::vector<double> out(kSegmentSamples, 0.0);
  const std::size_t kept = std::min(samples.size(), kSegmentSamples);
  const std::size_t left =
      samples.size() >= kSegmentSamples ? 0 : (kSegmentSamples - samples.size()) / 2;
  for (std::size_t i = 0; i < kept; ++i) out[left + i] = samples[i];
  return out;
}

inline std::vector<double> hamming_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                  static_cast<double>(n - 1));
  }
  return w;
}

// Magnitude STFT of a prepared segment: 257 bins x 59 frames under the
// default configuration.
inline Spectrogram stft_magnitude(std::span<const double> segment,
                                  const StftConfig& cfg = {}) {
  cfg.validate();
  if (segment.size() != kSegmentSamples) {
    throw ArgumentError("stft_magnitude: segment must hold exactly " +
                        std::to_string(kSegmentSamples) + " samples");
  }
  const std::size_t n_frames = cfg.frames(segment.size());
  const std::size_t n_bins = cfg.bins();
  const std::vector<double> window = hamming_window(cfg.window_length);

  Spectrogram spec(n_bins, n_frames);
  std::vector<double> frame(cfg.fft_size, 0.0);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::size_t start = t * cfg.hop;
    for (std::size_t i = 0; i < cfg.window_length; ++i) {
      frame[i] = segment[start + i] * window[i];
    }
    const std::vector<double> mags = magnitude_spectrum(frame);
    for (std::size_t b = 0; b < n_bins; ++b) spec.at(b, t) = mags[b];
  }
  return spec;
}

// Affine rescale to [0, 1]; a constant matrix maps to all zeros.
inline Spectrogram normalize01(const Spectrogram& spec) {
  Spectrogram out = spec;
  if (spec.values.empty()) return out;
  const auto [mn_it, mx_it] = std::minmax_element(spec.values.begin(), spec.values.end());
  const double mn = *mn_it;
  const double mx = *mx_it;
  if (mx == mn) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    return out;
  }
  const double scale = 1.0 / (mx - mn);
  for (auto& v : out.values) v = (v - mn) * scale;
  return out;
}

// --- binary dump: 8-byte magic, u32 rows, u32 cols, row-major LE f32 ---

inline constexpr char kSpectrogramMagic[8] = {'W', 'Z', 'S', 'P', 'E', 'C', '0', '1'};

inline std::vector<std::uint8_t> spectrogram_to_bytes(const Spectrogram& spec) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + spec.values.size() * 4);
  for (char c : kSpectrogramMagic) out.push_back(static_cast<std::uint8_t>(c));
  auto push_u32 = [&out](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  push_u32(static_cast<std::uint32_t>(spec.rows));
  push_u32(static_cast<std::uint32_t>(spec.cols));
  for (double v : spec.values) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    push_u32(bits);
  }
  return out;
}

inline void write_spectrogram(const std::filesystem::path& path, const Spectrogram& spec) {
  write_binary_atomic(path, spectrogram_to_bytes(spec));
}

inline Spectrogram read_spectrogram(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("read_spectrogram: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kSpectrogramMagic, 8) != 0) {
    throw FormatError("read_spectrogram: bad magic in " + path.string());
  }
  auto read_u32 = [&bytes](std::size_t off) {
    return static_cast<std::uint32_t>(bytes[off]) | (static_cast<std::uint32_t>(bytes[off + 1]) << 8) |
           (static_cast<std::uint32_t>(bytes[off + 2]) << 16) |
           (static_cast<std::uint32_t>(bytes[off + 3]) << 24);
  };
  const std::uint32_t rows = read_u32(8);
  const std::uint32_t cols = read_u32(12);
  if (bytes.size() != 16 + static_cast<std::size_t>(rows) * cols * 4) {
    throw FormatError("read_spectrogram: truncated payload in " + path.string());
  }
  Spectrogram spec(rows, cols);
  for (std::size_t i = 0; i < spec.values.size(); ++i) {
    const std::uint32_t bits = read_u32(16 + i * 4);
    float f;
    std::memcpy(&f, &bits, 4);
    spec.values[i] = f;
  }
  return spec;
}

// Debug-friendly CSV export (one row per frequency bin).
inline std::string spectrogram_to_csv(const Spectrogram& spec) {
  std::string out;
  for (std::size_t r = 0; r < spec.rows; ++r) {
    for (std::size_t c = 0; c < spec.cols; ++c) {
      if (c) out += ',';
      out += format_double(spec.at(r, c));
    }
    out += '\n';
  }
  return out;
}

}  // namespace wheezelab
