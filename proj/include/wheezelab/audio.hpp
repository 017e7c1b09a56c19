// Audio ingestion: RIFF/WAVE PCM decoding, 16-bit PCM writing (used by tools
// and test fixtures), and windowed-sinc resampling to the 4 kHz pipeline rate.
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

namespace wheezelab {

struct AudioRecording {
  std::string id;               // source filename stem
  std::vector<double> samples;  // mono, amplitudes in [-1, 1]
  int sample_rate = 0;          // Hz

  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

namespace detail {

inline std::uint32_t read_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16le(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

// Decodes a linear-PCM RIFF/WAVE payload with 16-bit samples. Multi-channel
// input is averaged down to mono; amplitudes are scaled by 1/32768.
inline AudioRecording load_wav(std::span<const std::uint8_t> bytes,
                               std::string id = "") {
  using detail::read_u16le;
  using detail::read_u32le;

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("load_wav: not a RIFF/WAVE payload");
  }

  bool have_fmt = false;
  std::uint16_t format_tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t chunk_size = read_u32le(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + chunk_size > bytes.size()) {
      throw FormatError("load_wav: chunk extends past end of payload");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw FormatError("load_wav: fmt chunk too small");
      format_tag = read_u16le(chunk + 8);
      channels = read_u16le(chunk + 10);
      sample_rate = read_u32le(chunk + 12);
      bits_per_sample = read_u16le(chunk + 22);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = chunk_size;
    }
    pos = body + chunk_size + (chunk_size & 1);  // chunks are 2-byte aligned
  }

  if (!have_fmt || data == nullptr) {
    throw FormatError("load_wav: missing fmt or data chunk");
  }
  if (format_tag != 1) {
    throw UnsupportedError("load_wav: only linear PCM (format 1) is supported");
  }
  if (bits_per_sample != 16) {
    throw UnsupportedError("load_wav: only 16-bit samples are supported");
  }
  if (channels == 0 || sample_rate == 0) {
    throw FormatError("load_wav: invalid channel count or sample rate");
  }

  const std::size_t frame_bytes = 2u * channels;
  const std::size_t n_frames = data_size / frame_bytes;
  if (n_frames == 0) throw EmptyInputError("load_wav: zero samples");

  AudioRecording rec;
  rec.id = std::move(id);
  rec.sample_rate = static_cast<int>(sample_rate);
  rec.samples.resize(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      const std::uint8_t* sp = data + f * frame_bytes + 2u * c;
      const std::int16_t v =
          static_cast<std::int16_t>(static_cast<std::uint16_t>(sp[0] | (sp[1] << 8)));
      acc += static_cast<double>(v);
    }
    rec.samples[f] = acc / channels / 32768.0;
  }
  return rec;
}

inline AudioRecording load_wav_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("load_wav_file: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return load_wav(bytes, path.stem().string());
}

// Writes mono 16-bit PCM. Values are clamped to [-1, 1] before quantization.
inline void save_wav_16bit(const std::filesystem::path& path,
                           std::span<const double> samples, int sample_rate) {
  if (samples.empty()) throw EmptyInputError("save_wav_16bit: no samples");
  if (sample_rate <= 0) throw ArgumentError("save_wav_16bit: bad sample rate");

  const std::uint32_t data_size = static_cast<std::uint32_t>(samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  auto push_bytes = [&out](const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  };
  auto push_u32 = [&](std::uint32_t v) {
    const std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                               static_cast<std::uint8_t>(v >> 16),
                               static_cast<std::uint8_t>(v >> 24)};
    push_bytes(b, 4);
  };
  auto push_u16 = [&](std::uint16_t v) {
    const std::uint8_t b[2] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8)};
    push_bytes(b, 2);
  };

  push_bytes("RIFF", 4);
  push_u32(36 + data_size);
  push_bytes("WAVE", 4);
  push_bytes("fmt ", 4);
  push_u32(16);
  push_u16(1);  // PCM
  push_u16(1);  // mono
  push_u32(static_cast<std::uint32_t>(sample_rate));
  push_u32(static_cast<std::uint32_t>(sample_rate) * 2);
  push_u16(2);
  push_u16(16);
  push_bytes("data", 4);
  push_u32(data_size);
  for (double s : samples) {
    const double clamped = std::clamp(s, -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(
        std::lround(std::clamp(clamped * 32768.0, -32768.0, 32767.0)));
    push_u16(static_cast<std::uint16_t>(q));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("save_wav_16bit: cannot open " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
}

// Windowed-sinc resampler. The anti-alias cutoff sits at 0.45x the smaller of
// the two rates (0.9x the output Nyquist frequency when decimating), with a
// Blackman window of 16 zero crossings per side. Identity when the rate
// already matches.
inline AudioRecording resample(const AudioRecording& rec, int target_rate) {
  if (target_rate <= 0) throw ArgumentError("resample: target_rate must be positive");
  if (rec.samples.empty()) throw EmptyInputError("resample: empty recording");
  if (rec.sample_rate == target_rate) return rec;

  const double in_rate = rec.sample_rate;
  const double out_rate = target_rate;
  const std::size_t in_len = rec.samples.size();
  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(in_len) * out_rate / in_rate));

  // Cutoff as cycles per input sample.
  const double cutoff_hz = 0.45 * std::min(in_rate, out_rate);
  const double fc = cutoff_hz / in_rate;
  const double zero_crossings = 16.0;
  const double half_width = zero_crossings / (2.0 * fc);

  auto kernel = [fc, half_width](double t) {
    const double u = t / half_width;  // window argument in [-1, 1]
    if (u <= -1.0 || u >= 1.0) return 0.0;
    const double window = 0.42 + 0.5 * std::cos(M_PI * u) + 0.08 * std::cos(2.0 * M_PI * u);
    const double x = 2.0 * fc * t;
    const double sinc = x == 0.0 ? 1.0 : std::sin(M_PI * x) / (M_PI * x);
    return 2.0 * fc * sinc * window;
  };

  AudioRecording out;
  out.id = rec.id;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);
  for (std::size_t n = 0; n < out_len; ++n) {
    const double t = static_cast<double>(n) * in_rate / out_rate;
    const auto k_lo = static_cast<long long>(std::ceil(t - half_width));
    const auto k_hi = static_cast<long long>(std::floor(t + half_width));
    double acc = 0.0;
    for (long long k = std::max<long long>(k_lo, 0);
         k <= std::min<long long>(k_hi, static_cast<long long>(in_len) - 1); ++k) {
      acc += rec.samples[static_cast<std::size_t>(k)] * kernel(t - k);
    }
    out.samples[n] = std::clamp(acc, -1.0, 1.0);
  }
  return out;
}

}  // namespace wheezelab
