// Per-frame acoustic descriptors and their per-event aggregation.
//
// Each spectrogram frame yields 47 values:
//   16 spectral-shape features (centroid, spread, zero-crossing rate,
//      entropy, flatness, roughness, irregularity, flux, 4 brightness bands,
//      4 rolloff points),
//   13 mel-frequency cepstral coefficients,
//   13 first-order MFCC deltas,
//    5 harmonic features (chroma centroid, chroma peak, pitch, voicing,
//      inharmonicity).
// An event is summarized by 5 statistics (mean, std, median, min, max) of
// each feature over its 59 frames: 235 values total.
//
// Undefined ratios on silent frames resolve to 0 by convention so downstream
// consumers never see non-finite values.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "wheezelab/annotations.hpp"
#include "wheezelab/dsp.hpp"
#include "wheezelab/errors.hpp"
#include "wheezelab/ioutil.hpp"

namespace wheezelab {

inline constexpr std::size_t kFrameFeatureCount = 47;
inline constexpr std::size_t kStatisticCount = 5;
inline constexpr std::size_t kEventFeatureCount = kFrameFeatureCount * kStatisticCount;

using FrameFeatureRow = std::array<double, kFrameFeatureCount>;

struct FeatureConfig {
  std::size_t mel_bands = 40;
  double mel_fmax_hz = 2000.0;
  double pitch_min_hz = 60.0;
  double pitch_max_hz = 1000.0;
  double peak_rel_threshold = 0.01;  // spectral peaks >= 1% of the max bin
  double voicing_threshold = 0.3;    // below this, inharmonicity is 0
  bool mfcc_include_c0 = true;       // coefficient 1 of 13 is the energy term

  void validate() const {
    if (mel_bands < 2) throw ArgumentError("FeatureConfig: need >= 2 mel bands");
    if (!(pitch_min_hz > 0.0) || !(pitch_min_hz < pitch_max_hz)) {
      throw ArgumentError("FeatureConfig: bad pitch range");
    }
  }
};

inline const std::vector<std::string>& frame_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n = {"centroid",   "spread",       "zcr",
                                  "entropy",    "flatness",     "roughness",
                                  "irregularity", "flux",
                                  "brightness100", "brightness200", "brightness400",
                                  "brightness800", "rolloff95",  "rolloff75",
                                  "rolloff25",  "rolloff05"};
    char buf[16];
    for (int i = 1; i <= 13; ++i) {
      std::snprintf(buf, sizeof(buf), "mfcc%02d", i);
      n.emplace_back(buf);
    }
    for (int i = 1; i <= 13; ++i) {
      std::snprintf(buf, sizeof(buf), "dmfcc%02d", i);
      n.emplace_back(buf);
    }
    n.insert(n.end(), {"chroma_centroid", "chroma_peak", "pitch", "voicing",
                       "inharmonicity"});
    return n;
  }();
  return names;
}

inline const std::array<std::string, kStatisticCount>& statistic_names() {
  static const std::array<std::string, kStatisticCount> names = {"mean", "std", "median",
                                                                 "min", "max"};
  return names;
}

// 235 column names, feature-major / statistic-minor (centroid_mean,
// centroid_std, ..., inharmonicity_max).
inline const std::vector<std::string>& event_feature_column_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    n.reserve(kEventFeatureCount);
    for (const auto& f : frame_feature_names()) {
      for (const auto& s : statistic_names()) n.push_back(f + "_" + s);
    }
    return n;
  }();
  return names;
}

struct EventFeatureVector {
  std::array<double, kEventFeatureCount> values{};
  EventClass label = EventClass::kWheeze;
  double duration_s = 0.0;
};

namespace detail {

struct MelBand {
  std::size_t first_bin = 0;
  std::vector<double> weights;  // triangular weights from first_bin on
};

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace detail

class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureConfig cfg = {}, StftConfig stft = {})
      : cfg_(cfg), stft_(stft) {
    cfg_.validate();
    stft_.validate();
    const std::size_t bins = stft_.bins();
    bin_hz_.resize(bins);
    for (std::size_t i = 0; i < bins; ++i) {
      bin_hz_[i] = static_cast<double>(i) * kSegmentSampleRate /
                   static_cast<double>(stft_.fft_size);
    }
    build_mel_bank();
    build_dct_table();
    build_chroma_classes();
  }

  const FeatureConfig& config() const { return cfg_; }
  const StftConfig& stft_config() const { return stft_; }

  // --- per-frame features -------------------------------------------------

  // 16 spectral-shape values. prev_mag may be null (first frame: flux = 0).
  std::array<double, 16> spectral_shape(std::span<const double> mag,
                                        const double* prev_mag,
                                        std::span<const double> frame_samples) const {
    check_bins(mag.size());
    std::array<double, 16> out{};

    const std::size_t n = mag.size();
    double mag_sum = 0.0, energy_sum = 0.0;
    for (double m : mag) {
      mag_sum += m;
      energy_sum += m * m;
    }

    // Zero-crossing rate is defined on the waveform regardless of spectrum.
    out[2] = zero_crossing_rate(frame_samples);

    // Flux: Euclidean distance to the previous frame's spectrum.
    if (prev_mag != nullptr) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = mag[i] - prev_mag[i];
        acc += d * d;
      }
      out[7] = std::sqrt(acc);
    }

    if (mag_sum <= 0.0) return out;  // silent frame: ratios are 0 by convention

    // Centroid and spread (first two moments of the magnitude distribution).
    double centroid = 0.0;
    for (std::size_t i = 0; i < n; ++i) centroid += bin_hz_[i] * mag[i];
    centroid /= mag_sum;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = bin_hz_[i] - centroid;
      var += d * d * mag[i];
    }
    out[0] = centroid;
    out[1] = std::sqrt(var / mag_sum);

    // Entropy of the power distribution, normalized to [0, 1] by log(bins).
    double entropy = 0.0;
    for (double m : mag) {
      const double p = m * m / energy_sum;
      if (p > 0.0) entropy -= p * std::log(p);
    }
    out[3] = entropy / std::log(static_cast<double>(n));

    // Flatness: geometric over arithmetic mean of the magnitudes.
    bool has_zero = false;
    double log_acc = 0.0;
    for (double m : mag) {
      if (m <= 0.0) {
        has_zero = true;
        break;
      }
      log_acc += std::log(m);
    }
    const double arith = mag_sum / static_cast<double>(n);
    out[4] = has_zero ? 0.0 : std::exp(log_acc / static_cast<double>(n)) / arith;

    // Roughness: Plomp-Levelt dissonance summed over spectral-peak pairs.
    const auto peaks = spectral_peaks(mag);
    double rough = 0.0;
    for (std::size_t a = 0; a < peaks.size(); ++a) {
      for (std::size_t b = a + 1; b < peaks.size(); ++b) {
        rough += plomp_levelt(bin_hz_[peaks[a]], mag[peaks[a]], bin_hz_[peaks[b]],
                              mag[peaks[b]]);
      }
    }
    out[5] = rough;

    // Irregularity: squared bin-to-bin variation over total energy.
    double irr = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double d = mag[i] - mag[i + 1];
      irr += d * d;
    }
    out[6] = irr / energy_sum;

    // Brightness: energy fraction above each cut frequency.
    static constexpr std::array<double, 4> kBrightnessHz = {100.0, 200.0, 400.0, 800.0};
    for (std::size_t b = 0; b < kBrightnessHz.size(); ++b) {
      double above = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (bin_hz_[i] > kBrightnessHz[b]) above += mag[i] * mag[i];
      }
      out[8 + b] = above / energy_sum;
    }

    // Rolloff: lowest bin frequency whose cumulative energy reaches P%.
    static constexpr std::array<double, 4> kRolloffPct = {0.95, 0.75, 0.25, 0.05};
    for (std::size_t r = 0; r < kRolloffPct.size(); ++r) {
      const double target = kRolloffPct[r] * energy_sum;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += mag[i] * mag[i];
        if (acc >= target) {
          out[12 + r] = bin_hz_[i];
          break;
        }
      }
    }
    return out;
  }

  // 13 MFCCs: orthonormal DCT-II of log mel-band energies of the power
  // spectrum (energy floor 1e-10). Coefficient 1 is the DCT energy term when
  // mfcc_include_c0 is set, otherwise coefficients 1..13 are returned.
  std::array<double, 13> mfcc(std::span<const double> mag) const {
    check_bins(mag.size());
    std::vector<double> log_energy(cfg_.mel_bands);
    for (std::size_t b = 0; b < cfg_.mel_bands; ++b) {
      const auto& band = mel_bank_[b];
      double e = 0.0;
      for (std::size_t i = 0; i < band.weights.size(); ++i) {
        const double m = mag[band.first_bin + i];
        e += band.weights[i] * m * m;
      }
      log_energy[b] = std::log(std::max(e, 1e-10));
    }
    std::array<double, 13> out{};
    const std::size_t offset = cfg_.mfcc_include_c0 ? 0 : 1;
    for (std::size_t k = 0; k < 13; ++k) {
      double acc = 0.0;
      const double* row = dct_table_.data() + (k + offset) * cfg_.mel_bands;
      for (std::size_t b = 0; b < cfg_.mel_bands; ++b) acc += row[b] * log_energy[b];
      out[k] = acc;
    }
    return out;
  }

  // Five harmonic values: chroma centroid, chroma peak, pitch, voicing,
  // inharmonicity. A silent frame returns all zeros.
  std::array<double, 5> harmonic(std::span<const double> frame_samples,
                                 std::span<const double> mag) const {
    check_bins(mag.size());
    std::array<double, 5> out{};

    // Pitch by normalized autocorrelation over the configured lag range,
    // refined with parabolic interpolation around the best integer lag.
    const std::size_t n = frame_samples.size();
    double r0 = 0.0;
    for (double x : frame_samples) r0 += x * x;
    if (r0 < 1e-20) return out;

    const auto lag_min = static_cast<std::size_t>(
        std::ceil(kSegmentSampleRate / cfg_.pitch_max_hz));
    const auto lag_max = std::min<std::size_t>(
        static_cast<std::size_t>(std::floor(kSegmentSampleRate / cfg_.pitch_min_hz)),
        n >= 2 ? n - 2 : 0);

    double pitch = 0.0;
    double voicing = 0.0;
    if (lag_min >= 1 && lag_max > lag_min) {
      auto autocorr = [&frame_samples, n](std::size_t lag) {
        double acc = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) {
          acc += frame_samples[i] * frame_samples[i + lag];
        }
        return acc;
      };
      std::size_t best_lag = lag_min;
      double best_r = -1.0;
      std::vector<double> r(lag_max + 2, 0.0);
      for (std::size_t lag = lag_min; lag <= lag_max; ++lag) {
        r[lag] = autocorr(lag) / r0;
        if (r[lag] > best_r) {
          best_r = r[lag];
          best_lag = lag;
        }
      }
      double refined = static_cast<double>(best_lag);
      if (best_lag > lag_min && best_lag < lag_max) {
        const double rl = r[best_lag - 1];
        const double rc = r[best_lag];
        const double rr = r[best_lag + 1];
        const double denom = rl - 2.0 * rc + rr;
        if (std::abs(denom) > 1e-15) {
          refined += std::clamp(0.5 * (rl - rr) / denom, -0.5, 0.5);
        }
      }
      pitch = kSegmentSampleRate / refined;
      voicing = std::clamp(best_r, 0.0, 1.0);
    }
    out[2] = pitch;
    out[3] = voicing;

    // Inharmonicity: energy-weighted deviation of spectral peaks from the
    // nearest pitch harmonic; zero when the frame is not voiced enough.
    if (voicing >= cfg_.voicing_threshold && pitch > 0.0) {
      const auto peaks = spectral_peaks(mag);
      double weighted = 0.0, weight = 0.0;
      for (std::size_t idx : peaks) {
        const double f = bin_hz_[idx];
        if (f <= 0.0) continue;
        const double harmonic_no = std::max(1.0, std::round(f / pitch));
        const double dev = std::abs(f / (harmonic_no * pitch) - 1.0);
        const double w = mag[idx] * mag[idx];
        weighted += w * dev;
        weight += w;
      }
      out[4] = weight > 0.0 ? weighted / weight : 0.0;
    }

    // Chroma: bin energies folded onto 12 pitch classes (C = 0, so A = 9).
    std::array<double, 12> chroma{};
    double total = 0.0;
    for (std::size_t i = 0; i < mag.size(); ++i) {
      if (chroma_class_[i] < 0) continue;
      const double e = mag[i] * mag[i];
      chroma[static_cast<std::size_t>(chroma_class_[i])] += e;
      total += e;
    }
    if (total > 0.0) {
      std::size_t peak = 0;
      for (std::size_t c = 1; c < 12; ++c) {
        if (chroma[c] > chroma[peak]) peak = c;
      }
      out[1] = static_cast<double>(peak);
      std::complex<double> z(0.0, 0.0);
      for (std::size_t c = 0; c < 12; ++c) {
        const double angle = 2.0 * M_PI * static_cast<double>(c) / 12.0;
        z += chroma[c] * std::complex<double>(std::cos(angle), std::sin(angle));
      }
      if (std::abs(z) > 1e-12) {
        double idx = std::arg(z) * 12.0 / (2.0 * M_PI);
        if (idx < 0.0) idx += 12.0;
        out[0] = idx;
      }
    }
    return out;
  }

  // --- per-event pipeline ---------------------------------------------------

  // All frame rows of a prepared segment (also computes MFCC deltas).
  std::vector<FrameFeatureRow> frame_rows(std::span<const double> segment) const {
    if (segment.size() != kSegmentSamples) {
      throw ArgumentError("frame_rows: segment must be prepared to " +
                          std::to_string(kSegmentSamples) + " samples");
    }
    const Spectrogram spec = stft_magnitude(segment, stft_);
    const std::size_t frames = spec.cols;
    const std::size_t bins = spec.rows;

    std::vector<double> column(bins), prev_column(bins);
    std::vector<std::array<double, 13>> mfccs(frames);
    std::vector<FrameFeatureRow> rows(frames);

    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t b = 0; b < bins; ++b) column[b] = spec.at(b, t);
      const std::span<const double> frame_samples =
          segment.subspan(t * stft_.hop, stft_.window_length);

      const auto shape =
          spectral_shape(column, t == 0 ? nullptr : prev_column.data(), frame_samples);
      mfccs[t] = mfcc(column);
      const auto harm = harmonic(frame_samples, column);

      auto& row = rows[t];
      std::copy(shape.begin(), shape.end(), row.begin());
      std::copy(mfccs[t].begin(), mfccs[t].end(), row.begin() + 16);
      // delta slots (29..41) are filled below
      std::copy(harm.begin(), harm.end(), row.begin() + 42);
      std::swap(column, prev_column);
    }

    const auto deltas = delta_sequence(mfccs);
    for (std::size_t t = 0; t < frames; ++t) {
      std::copy(deltas[t].begin(), deltas[t].end(), rows[t].begin() + 29);
    }
    return rows;
  }

  EventFeatureVector extract(std::span<const double> segment) const {
    return aggregate_event_features(frame_rows(segment));
  }

  // delta[t] = mfcc[t] - mfcc[t-1]; delta[0] = 0.
  static std::vector<std::array<double, 13>> delta_sequence(
      const std::vector<std::array<double, 13>>& mfccs) {
    std::vector<std::array<double, 13>> deltas(mfccs.size());
    for (std::size_t t = 0; t < mfccs.size(); ++t) {
      if (t == 0) {
        deltas[t].fill(0.0);
      } else {
        for (std::size_t k = 0; k < 13; ++k) deltas[t][k] = mfccs[t][k] - mfccs[t - 1][k];
      }
    }
    return deltas;
  }

  // 5 statistics per feature over the fixed frame count. Median of the sorted
  // 59 values; std is the sample standard deviation.
  static EventFeatureVector aggregate_event_features(
      std::span<const FrameFeatureRow> rows) {
    const std::size_t expected = StftConfig{}.frames(kSegmentSamples);
    if (rows.size() != expected) {
      throw ArgumentError("aggregate_event_features: expected " + std::to_string(expected) +
                          " rows, got " + std::to_string(rows.size()));
    }
    EventFeatureVector out;
    const std::size_t n = rows.size();
    std::vector<double> track(n);
    for (std::size_t f = 0; f < kFrameFeatureCount; ++f) {
      for (std::size_t t = 0; t < n; ++t) track[t] = rows[t][f];
      double mean = std::accumulate(track.begin(), track.end(), 0.0) / static_cast<double>(n);
      double var = 0.0;
      for (double v : track) var += (v - mean) * (v - mean);
      var /= static_cast<double>(n - 1);
      std::vector<double> sorted = track;
      std::sort(sorted.begin(), sorted.end());
      const double median = sorted[n / 2];

      double* slot = out.values.data() + f * kStatisticCount;
      slot[0] = mean;
      slot[1] = std::sqrt(var);
      slot[2] = median;
      slot[3] = sorted.front();
      slot[4] = sorted.back();
    }
    return out;
  }

 private:
  void check_bins(std::size_t n) const {
    if (n != stft_.bins()) {
      throw ArgumentError("feature input must have " + std::to_string(stft_.bins()) +
                          " spectrum bins");
    }
  }

  static double zero_crossing_rate(std::span<const double> samples) {
    if (samples.size() < 2) return 0.0;
    std::size_t crossings = 0;
    for (std::size_t i = 1; i < samples.size(); ++i) {
      if (samples[i - 1] * samples[i] < 0.0) ++crossings;
    }
    return static_cast<double>(crossings) * kSegmentSampleRate /
           static_cast<double>(samples.size());
  }

  // Local maxima at least peak_rel_threshold of the strongest bin.
  std::vector<std::size_t> spectral_peaks(std::span<const double> mag) const {
    std::vector<std::size_t> peaks;
    const double mx = *std::max_element(mag.begin(), mag.end());
    if (mx <= 0.0) return peaks;
    const double floor_v = cfg_.peak_rel_threshold * mx;
    for (std::size_t i = 1; i + 1 < mag.size(); ++i) {
      if (mag[i] >= floor_v && mag[i] > mag[i - 1] && mag[i] >= mag[i + 1]) {
        peaks.push_back(i);
      }
    }
    return peaks;
  }

  // Plomp-Levelt dissonance of two partials (Sethares parameterization).
  static double plomp_levelt(double f1, double a1, double f2, double a2) {
    const double fmin = std::min(f1, f2);
    const double df = std::abs(f2 - f1);
    const double s = 0.24 / (0.0207 * fmin + 18.96);
    return a1 * a2 * (std::exp(-3.5 * s * df) - std::exp(-5.75 * s * df));
  }

  void build_mel_bank() {
    const std::size_t bins = stft_.bins();
    const double mel_max = detail::hz_to_mel(cfg_.mel_fmax_hz);
    std::vector<double> edges(cfg_.mel_bands + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      edges[i] = detail::mel_to_hz(mel_max * static_cast<double>(i) /
                                   static_cast<double>(cfg_.mel_bands + 1));
    }
    mel_bank_.resize(cfg_.mel_bands);
    for (std::size_t b = 0; b < cfg_.mel_bands; ++b) {
      const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
      auto& band = mel_bank_[b];
      band.first_bin = bins;
      for (std::size_t i = 0; i < bins; ++i) {
        const double f = bin_hz_[i];
        double w = 0.0;
        if (f > lo && f < mid) {
          w = (f - lo) / (mid - lo);
        } else if (f >= mid && f < hi) {
          w = (hi - f) / (hi - mid);
        } else if (f == mid) {
          w = 1.0;
        }
        if (w > 0.0) {
          if (band.first_bin == bins) band.first_bin = i;
          band.weights.push_back(w);
        } else if (band.first_bin != bins) {
          break;  // triangles are contiguous in frequency
        }
      }
      if (band.first_bin == bins) band.first_bin = 0;  // empty band (degenerate config)
    }
  }

  // Orthonormal DCT-II basis, rows k = 0..13 over mel_bands columns.
  void build_dct_table() {
    const std::size_t n = cfg_.mel_bands;
    dct_table_.assign(14 * n, 0.0);
    for (std::size_t k = 0; k < 14; ++k) {
      const double norm = k == 0 ? std::sqrt(1.0 / static_cast<double>(n))
                                 : std::sqrt(2.0 / static_cast<double>(n));
      for (std::size_t b = 0; b < n; ++b) {
        dct_table_[k * n + b] =
            norm * std::cos(M_PI * static_cast<double>(k) *
                            (2.0 * static_cast<double>(b) + 1.0) /
                            (2.0 * static_cast<double>(n)));
      }
    }
  }

  // Pitch class of each bin (C = 0 convention: class(440 Hz) = 9), -1 for
  // bins below the fold threshold.
  void build_chroma_classes() {
    chroma_class_.assign(bin_hz_.size(), -1);
    for (std::size_t i = 0; i < bin_hz_.size(); ++i) {
      const double f = bin_hz_[i];
      if (f < 60.0) continue;
      const long long semis = std::llround(12.0 * std::log2(f / 440.0));
      chroma_class_[i] = static_cast<int>(((semis % 12) + 12 + 9) % 12);
    }
  }

  FeatureConfig cfg_;
  StftConfig stft_;
  std::vector<double> bin_hz_;
  std::vector<detail::MelBand> mel_bank_;
  std::vector<double> dct_table_;
  std::vector<int> chroma_class_;
};

// --- feature CSV -------------------------------------------------------------

inline std::string feature_csv_header() {
  std::string h;
  for (const auto& name : event_feature_column_names()) {
    h += name;
    h += ',';
  }
  h += "label,duration_s";
  return h;
}

inline std::string feature_csv_to_string(std::span<const EventFeatureVector> rows) {
  std::string out = feature_csv_header();
  out += '\n';
  for (const auto& r : rows) {
    for (double v : r.values) {
      out += format_double(v);
      out += ',';
    }
    out += to_string(r.label);
    out += ',';
    out += format_double(r.duration_s);
    out += '\n';
  }
  return out;
}

inline void write_feature_csv(const std::filesystem::path& path,
                              std::span<const EventFeatureVector> rows) {
  write_file_atomic(path, feature_csv_to_string(rows));
}

inline std::vector<EventFeatureVector> read_feature_csv(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::vector<EventFeatureVector> rows;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    const std::size_t eol = text.find('\n', pos);
    const std::string_view line(text.data() + pos,
                                (eol == std::string::npos ? text.size() : eol) - pos);
    pos = eol == std::string::npos ? text.size() : eol + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != feature_csv_header()) {
        throw ParseError(path.string() + ": unexpected feature CSV header");
      }
      continue;
    }
    const auto f = split_csv_line(line);
    const std::string ctx = path.string() + " line " + std::to_string(line_no);
    if (f.size() != kEventFeatureCount + 2) {
      throw ParseError(ctx + ": expected " + std::to_string(kEventFeatureCount + 2) +
                       " columns, got " + std::to_string(f.size()));
    }
    EventFeatureVector row;
    for (std::size_t i = 0; i < kEventFeatureCount; ++i) {
      row.values[i] = parse_double_strict(f[i], ctx);
    }
    row.label = event_class_from_string(f[kEventFeatureCount]);
    row.duration_s = parse_double_strict(f[kEventFeatureCount + 1], ctx);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace wheezelab
