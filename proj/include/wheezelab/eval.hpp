// Confusion-matrix metrics, the right-tailed Wilcoxon signed-rank test,
// Bonferroni thresholds, and the duration histograms used by the bias audit.
// Zero-denominator metrics resolve to 0 and are flagged by name so reports
// stay total and machine readable.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "wheezelab/annotations.hpp"
#include "wheezelab/errors.hpp"

namespace wheezelab {

// Wheeze is the positive class.
struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t tn = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + tn + fp + fn; }
};

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double sensitivity = 0.0;
  double f1 = 0.0;
  double specificity = 0.0;
  double mcc = 0.0;
  std::vector<std::string> degenerate;  // metrics whose denominator was zero
};

inline MetricsReport metrics(const ConfusionCounts& c) {
  if (c.total() <= 0) throw EmptyInputError("metrics: no evaluated events");
  const double tp = static_cast<double>(c.tp);
  const double tn = static_cast<double>(c.tn);
  const double fp = static_cast<double>(c.fp);
  const double fn = static_cast<double>(c.fn);

  MetricsReport r;
  auto ratio = [&r](double num, double den, const char* name) {
    if (den <= 0.0) {
      r.degenerate.emplace_back(name);
      return 0.0;
    }
    return num / den;
  };
  r.accuracy = (tp + tn) / (tp + tn + fp + fn);
  r.precision = ratio(tp, tp + fp, "precision");
  r.sensitivity = ratio(tp, tp + fn, "sensitivity");
  r.f1 = ratio(2.0 * r.precision * r.sensitivity, r.precision + r.sensitivity, "f1");
  r.specificity = ratio(tn, tn + fp, "specificity");
  const double mcc_den =
      std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
  r.mcc = ratio(tp * tn - fp * fn, mcc_den, "mcc");
  return r;
}

struct WilcoxonResult {
  double p_value = 1.0;
  double statistic = 0.0;  // sum of ranks of positive differences
  std::size_t n_nonzero = 0;
  bool all_zero = false;
};

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace detail

// Right-tailed Wilcoxon signed-rank test of H1: median(x - y) > 0.
// Zero differences are dropped and tied magnitudes mid-ranked. The p-value is
// P(W >= w_observed) under the null: computed by full enumeration of the 2^n
// sign assignments for n <= 15 and by the tie-corrected normal approximation
// (0.5 continuity correction) beyond.
inline WilcoxonResult wilcoxon_right(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ArgumentError("wilcoxon_right: length mismatch");
  if (x.size() < 5) throw ArgumentError("wilcoxon_right: need at least 5 pairs");

  std::vector<double> diff;
  diff.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d != 0.0) diff.push_back(d);
  }

  WilcoxonResult result;
  result.n_nonzero = diff.size();
  if (diff.empty()) {
    result.all_zero = true;
    result.p_value = 1.0;
    return result;
  }

  const std::size_t n = diff.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&diff](std::size_t a, std::size_t b) {
    return std::abs(diff[a]) < std::abs(diff[b]);
  });

  // Average ranks across tied magnitudes.
  std::vector<double> rank(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n &&
           std::abs(diff[order[j + 1]]) == std::abs(diff[order[i]])) {
      ++j;
    }
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }

  double w_pos = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (diff[k] > 0.0) w_pos += rank[k];
  }
  result.statistic = w_pos;

  if (n <= 15) {
    const std::uint64_t assignments = 1ull << n;
    std::uint64_t at_least = 0;
    for (std::uint64_t mask = 0; mask < assignments; ++mask) {
      double w = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        if (mask & (1ull << k)) w += rank[k];
      }
      if (w >= w_pos - 1e-9) ++at_least;
    }
    result.p_value = static_cast<double>(at_least) / static_cast<double>(assignments);
  } else {
    const double nd = static_cast<double>(n);
    const double mean = nd * (nd + 1.0) / 4.0;
    double tie_term = 0.0;
    i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n &&
             std::abs(diff[order[j + 1]]) == std::abs(diff[order[i]])) {
        ++j;
      }
      const double t = static_cast<double>(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
    const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
    const double z = (w_pos - mean - 0.5) / std::sqrt(var);
    result.p_value = 1.0 - detail::normal_cdf(z);
  }
  return result;
}

inline double bonferroni_threshold(double alpha, std::size_t m) {
  if (m == 0) throw ArgumentError("bonferroni_threshold: m must be positive");
  return alpha / static_cast<double>(m);
}

// Paired histograms of annotated-wheeze durations and false-negative
// durations. Bins start at 0.1 s; durations beyond the last edge (2 s) are
// clamped into the final bin, durations below the first edge into bin 0, so
// totals always match the input cardinalities.
struct DurationHistogram {
  double bin_width = 0.05;
  double first_edge = 0.1;
  std::vector<double> bin_start;
  std::vector<double> bin_end;
  std::vector<std::int64_t> wheeze_count;
  std::vector<std::int64_t> fn_count;
};

inline DurationHistogram fn_duration_histogram(std::span<const LabeledEvent> fn_events,
                                               std::span<const LabeledEvent> all_wheezes,
                                               double bin_width = 0.05) {
  if (!(bin_width > 0.0)) throw ArgumentError("fn_duration_histogram: bad bin width");
  DurationHistogram h;
  h.bin_width = bin_width;
  const double last_edge = 2.0;
  const auto n_bins = static_cast<std::size_t>(
      std::llround((last_edge - h.first_edge) / bin_width));
  h.bin_start.resize(n_bins);
  h.bin_end.resize(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    h.bin_start[b] = h.first_edge + static_cast<double>(b) * bin_width;
    h.bin_end[b] = h.first_edge + static_cast<double>(b + 1) * bin_width;
  }
  h.wheeze_count.assign(n_bins, 0);
  h.fn_count.assign(n_bins, 0);

  auto bin_of = [&](double duration) {
    const auto raw = static_cast<long long>(std::floor((duration - h.first_edge) / bin_width));
    return static_cast<std::size_t>(
        std::clamp<long long>(raw, 0, static_cast<long long>(n_bins) - 1));
  };
  for (const auto& ev : all_wheezes) ++h.wheeze_count[bin_of(ev.duration())];
  for (const auto& ev : fn_events) ++h.fn_count[bin_of(ev.duration())];
  return h;
}

inline std::string duration_histogram_csv(const DurationHistogram& h) {
  std::string out = "bin_start,bin_end,wheeze_count,fn_count\n";
  for (std::size_t b = 0; b < h.bin_start.size(); ++b) {
    out += format_double(h.bin_start[b]);
    out += ',';
    out += format_double(h.bin_end[b]);
    out += ',';
    out += std::to_string(h.wheeze_count[b]);
    out += ',';
    out += std::to_string(h.fn_count[b]);
    out += '\n';
  }
  return out;
}

// Threshold classifier on a single scalar feature; fitted by exhaustive scan
// maximizing training MCC over both orientations. Used by the audit to probe
// how much of a model's performance the zero-padding fraction alone explains.
struct ScalarProbe {
  double threshold = 0.0;
  bool positive_below = false;  // orientation of the positive class
  double train_mcc = 0.0;

  bool predict(double value) const {
    return positive_below ? value < threshold : value >= threshold;
  }
};

inline ScalarProbe fit_scalar_probe(std::span<const double> values,
                                    std::span<const int> labels) {
  if (values.size() != labels.size() || values.empty()) {
    throw ArgumentError("fit_scalar_probe: bad inputs");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<double> candidates;
  candidates.push_back(sorted.front() - 1.0);
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
  }
  candidates.push_back(sorted.back() + 1.0);

  ScalarProbe best;
  double best_mcc = -2.0;
  for (bool below : {false, true}) {
    for (double t : candidates) {
      ConfusionCounts c;
      for (std::size_t i = 0; i < values.size(); ++i) {
        const bool pred = below ? values[i] < t : values[i] >= t;
        const bool actual = labels[i] != 0;
        if (pred && actual) ++c.tp;
        else if (pred && !actual) ++c.fp;
        else if (!pred && actual) ++c.fn;
        else ++c.tn;
      }
      const double mcc = metrics(c).mcc;
      if (mcc > best_mcc + 1e-12) {
        best_mcc = mcc;
        best.threshold = t;
        best.positive_below = below;
      }
    }
  }
  best.train_mcc = best_mcc;
  return best;
}

}  // namespace wheezelab
