#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "wheezelab/eval.hpp"
#include "wheezelab/rng.hpp"

namespace wheezelab {
namespace {

TEST(Metrics, PerfectClassifierOnTestTotals) {
  const auto r = metrics(ConfusionCounts{725, 1129, 0, 0});
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(r.precision, 1.0);
  EXPECT_DOUBLE_EQ(r.sensitivity, 1.0);
  EXPECT_DOUBLE_EQ(r.f1, 1.0);
  EXPECT_DOUBLE_EQ(r.specificity, 1.0);
  EXPECT_DOUBLE_EQ(r.mcc, 1.0);
  EXPECT_TRUE(r.degenerate.empty());
}

TEST(Metrics, HandEvaluatedCase) {
  const auto r = metrics(ConfusionCounts{50, 40, 10, 0});
  EXPECT_NEAR(r.accuracy, 0.900, 1e-12);
  EXPECT_NEAR(r.precision, 50.0 / 60.0, 1e-12);
  EXPECT_NEAR(r.sensitivity, 1.0, 1e-12);
  EXPECT_NEAR(r.f1, 2.0 * (50.0 / 60.0) / (50.0 / 60.0 + 1.0), 1e-12);
  EXPECT_NEAR(r.f1, 0.9091, 1e-4);
  EXPECT_NEAR(r.specificity, 0.800, 1e-12);
  EXPECT_NEAR(r.mcc, 0.8165, 1e-4);
}

TEST(Metrics, DegenerateDenominatorsFlagged) {
  const auto r = metrics(ConfusionCounts{0, 90, 0, 10});  // no positive predictions
  EXPECT_DOUBLE_EQ(r.precision, 0.0);
  EXPECT_NE(std::find(r.degenerate.begin(), r.degenerate.end(), "precision"),
            r.degenerate.end());
  EXPECT_THROW(metrics(ConfusionCounts{}), EmptyInputError);
}

// Independent recomputation straight from the definitions.
MetricsReport recompute(const ConfusionCounts& c) {
  const double tp = c.tp, tn = c.tn, fp = c.fp, fn = c.fn;
  MetricsReport r;
  r.accuracy = (tp + tn) / (tp + tn + fp + fn);
  r.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  r.sensitivity = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  r.f1 = r.precision + r.sensitivity > 0
             ? 2.0 * r.precision * r.sensitivity / (r.precision + r.sensitivity)
             : 0.0;
  r.specificity = tn + fp > 0 ? tn / (tn + fp) : 0.0;
  const double d = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
  r.mcc = d > 0 ? (tp * tn - fp * fn) / d : 0.0;
  return r;
}

TEST(Metrics, RandomCountsMatchIndependentRecomputation) {
  Rng rng(2718);
  for (int trial = 0; trial < 1000; ++trial) {
    ConfusionCounts c{static_cast<std::int64_t>(rng.below(500)),
                      static_cast<std::int64_t>(rng.below(500)),
                      static_cast<std::int64_t>(rng.below(500)),
                      static_cast<std::int64_t>(rng.below(500))};
    if (c.total() == 0) continue;
    const auto a = metrics(c);
    const auto b = recompute(c);
    EXPECT_LT(std::abs(a.accuracy - b.accuracy), 1e-12);
    EXPECT_LT(std::abs(a.precision - b.precision), 1e-12);
    EXPECT_LT(std::abs(a.sensitivity - b.sensitivity), 1e-12);
    EXPECT_LT(std::abs(a.f1 - b.f1), 1e-12);
    EXPECT_LT(std::abs(a.specificity - b.specificity), 1e-12);
    EXPECT_LT(std::abs(a.mcc - b.mcc), 1e-12);
    EXPECT_GE(a.mcc, -1.0);
    EXPECT_LE(a.mcc, 1.0);
  }
}

TEST(Metrics, PredictionInversionFlipsMcc) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    ConfusionCounts c{1 + static_cast<std::int64_t>(rng.below(200)),
                      1 + static_cast<std::int64_t>(rng.below(200)),
                      1 + static_cast<std::int64_t>(rng.below(200)),
                      1 + static_cast<std::int64_t>(rng.below(200))};
    const ConfusionCounts inverted{c.fn, c.fp, c.tn, c.tp};
    const auto a = metrics(c);
    const auto b = metrics(inverted);
    EXPECT_NEAR(a.mcc, -b.mcc, 1e-12);
    EXPECT_NEAR(a.accuracy, 1.0 - b.accuracy, 1e-12);
  }
}

TEST(Metrics, F1IsHarmonicMeanWhenDefined) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    ConfusionCounts c{1 + static_cast<std::int64_t>(rng.below(100)),
                      static_cast<std::int64_t>(rng.below(100)),
                      static_cast<std::int64_t>(rng.below(100)),
                      static_cast<std::int64_t>(rng.below(100))};
    const auto r = metrics(c);
    if (r.precision > 0.0 && r.sensitivity > 0.0) {
      EXPECT_NEAR(r.f1, 2.0 / (1.0 / r.precision + 1.0 / r.sensitivity), 1e-12);
    }
  }
}

// Full-enumeration oracle, written independently of the implementation.
double wilcoxon_oracle(std::vector<double> x, std::vector<double> y) {
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] - y[i] != 0.0) d.push_back(x[i] - y[i]);
  }
  const std::size_t n = d.size();
  if (n == 0) return 1.0;
  // midranks of |d|
  std::vector<double> mag(n);
  for (std::size_t i = 0; i < n; ++i) mag[i] = std::abs(d[i]);
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0.0, equal = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      below += mag[j] < mag[i];
      equal += mag[j] == mag[i];
    }
    rank[i] = below + 0.5 * (equal + 1.0);
  }
  double w_obs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] > 0.0) w_obs += rank[i];
  }
  std::size_t count = 0;
  const std::size_t total = 1u << n;
  for (std::size_t mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) w += rank[i];
    }
    if (w >= w_obs - 1e-9) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(total);
}

TEST(Wilcoxon, AllPositiveDifferences) {
  std::vector<double> x(10), y(10, 0.0);
  std::iota(x.begin(), x.end(), 1.0);
  const auto r = wilcoxon_right(x, y);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0 / 1024.0);
  EXPECT_DOUBLE_EQ(r.statistic, 55.0);
}

TEST(Wilcoxon, AllNegativeDifferences) {
  std::vector<double> x(10, 0.0), y(10);
  std::iota(y.begin(), y.end(), 1.0);
  const auto r = wilcoxon_right(x, y);
  // right tail of the weakest possible statistic: no evidence at all
  EXPECT_GE(r.p_value, 1.0 - 1.0 / 1024.0);
  EXPECT_LE(r.p_value, 1.0);
}

TEST(Wilcoxon, EqualSamplesFlagged) {
  const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto r = wilcoxon_right(x, x);
  EXPECT_TRUE(r.all_zero);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
  EXPECT_GE(r.p_value, 0.5);
}

TEST(Wilcoxon, HundredRandomCasesMatchEnumerationExactly) {
  Rng rng(1001);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(10), y(10);
    for (std::size_t i = 0; i < 10; ++i) {
      // quantized values make ties and zero differences common
      x[i] = std::round(rng.uniform(-3.0, 3.0));
      y[i] = std::round(rng.uniform(-3.0, 3.0));
    }
    const auto r = wilcoxon_right(x, y);
    EXPECT_EQ(r.p_value, wilcoxon_oracle(x, y)) << "trial " << trial;
  }
}

TEST(Wilcoxon, NormalApproximationCloseToExactAtThreshold) {
  // n = 16 uses the approximation; n = 15 is exact. Same data shifted by one
  // pair should produce nearby p-values.
  Rng rng(8);
  std::vector<double> x16(16), y16(16, 0.0);
  for (auto& v : x16) v = rng.uniform(-1.0, 2.0);
  const auto approx = wilcoxon_right(x16, y16);
  // exact enumeration oracle for the same 16 differences
  std::vector<double> x = x16, y = y16;
  double exact = 0.0;
  {
    std::vector<double> d;
    for (std::size_t i = 0; i < x.size(); ++i) d.push_back(x[i] - y[i]);
    std::vector<double> rank(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      double below = 0, equal = 0;
      for (std::size_t j = 0; j < d.size(); ++j) {
        below += std::abs(d[j]) < std::abs(d[i]);
        equal += std::abs(d[j]) == std::abs(d[i]);
      }
      rank[i] = below + 0.5 * (equal + 1.0);
    }
    double w_obs = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d[i] > 0) w_obs += rank[i];
    }
    std::size_t count = 0;
    for (std::uint32_t mask = 0; mask < (1u << 16); ++mask) {
      double w = 0.0;
      for (std::size_t i = 0; i < 16; ++i) {
        if (mask & (1u << i)) w += rank[i];
      }
      if (w >= w_obs - 1e-9) ++count;
    }
    exact = static_cast<double>(count) / static_cast<double>(1u << 16);
  }
  EXPECT_NEAR(approx.p_value, exact, 0.02);
}

TEST(Wilcoxon, InputValidation) {
  const std::vector<double> small = {1, 2, 3};
  EXPECT_THROW(wilcoxon_right(small, small), ArgumentError);
  const std::vector<double> five = {1, 2, 3, 4, 5};
  const std::vector<double> four = {1, 2, 3, 4};
  EXPECT_THROW(wilcoxon_right(five, four), ArgumentError);
}

TEST(Bonferroni, ThresholdSemantics) {
  EXPECT_DOUBLE_EQ(bonferroni_threshold(0.01, 5), 0.002);
  EXPECT_DOUBLE_EQ(bonferroni_threshold(0.01, 1), 0.01);
  EXPECT_THROW(bonferroni_threshold(0.01, 0), ArgumentError);
  EXPECT_TRUE(0.0019 < bonferroni_threshold(0.01, 5));
  EXPECT_FALSE(0.0021 < bonferroni_threshold(0.01, 5));
}

LabeledEvent wheeze(double start, double duration) {
  return {"r", start, start + duration, EventClass::kWheeze, Provenance::kAnnotated};
}

TEST(FnHistogram, NoFalseNegatives) {
  const std::vector<LabeledEvent> wheezes = {wheeze(0, 0.2), wheeze(1, 0.5)};
  const auto h = fn_duration_histogram({}, wheezes);
  for (auto c : h.fn_count) EXPECT_EQ(c, 0);
  EXPECT_EQ(std::accumulate(h.wheeze_count.begin(), h.wheeze_count.end(), std::int64_t{0}),
            2);
}

TEST(FnHistogram, OverlongDurationsShareTheTerminalBin) {
  const std::vector<LabeledEvent> wheezes = {wheeze(0, 2.5), wheeze(3, 3.0),
                                             wheeze(7, 0.3)};
  const std::vector<LabeledEvent> fns = {wheezes[0], wheezes[1]};
  const auto h = fn_duration_histogram(fns, wheezes);
  EXPECT_EQ(h.wheeze_count.back(), 2);
  EXPECT_EQ(h.fn_count.back(), 2);
  EXPECT_DOUBLE_EQ(h.bin_start.front(), 0.1);
  EXPECT_DOUBLE_EQ(h.bin_end.back(), 2.0);
  EXPECT_NEAR(h.bin_end[0] - h.bin_start[0], 0.05, 1e-12);
}

TEST(FnHistogram, TotalsMatchAndFnBoundedByWheezes) {
  Rng rng(17);
  std::vector<LabeledEvent> wheezes, fns;
  for (int i = 0; i < 200; ++i) {
    const auto ev = wheeze(i, rng.uniform(0.05, 3.0));
    wheezes.push_back(ev);
    if (rng.next_double() < 0.3) fns.push_back(ev);
  }
  const auto h = fn_duration_histogram(fns, wheezes);
  EXPECT_EQ(std::accumulate(h.wheeze_count.begin(), h.wheeze_count.end(), std::int64_t{0}),
            static_cast<std::int64_t>(wheezes.size()));
  EXPECT_EQ(std::accumulate(h.fn_count.begin(), h.fn_count.end(), std::int64_t{0}),
            static_cast<std::int64_t>(fns.size()));
  for (std::size_t b = 0; b < h.fn_count.size(); ++b) {
    EXPECT_LE(h.fn_count[b], h.wheeze_count[b]);
  }
}

TEST(ScalarProbe, SeparableThresholdBothOrientations) {
  const std::vector<double> values = {0.1, 0.2, 0.3, 0.8, 0.9, 1.0};
  const std::vector<int> labels_up = {0, 0, 0, 1, 1, 1};
  const auto up = fit_scalar_probe(values, labels_up);
  EXPECT_DOUBLE_EQ(up.train_mcc, 1.0);
  EXPECT_TRUE(up.predict(0.95));
  EXPECT_FALSE(up.predict(0.15));

  const std::vector<int> labels_down = {1, 1, 1, 0, 0, 0};
  const auto down = fit_scalar_probe(values, labels_down);
  EXPECT_DOUBLE_EQ(down.train_mcc, 1.0);
  EXPECT_TRUE(down.predict(0.15));
  EXPECT_FALSE(down.predict(0.95));
}

}  // namespace
}  // namespace wheezelab
