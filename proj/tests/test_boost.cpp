#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "wheezelab/models/logitboost.hpp"
#include "wheezelab/rng.hpp"

namespace wheezelab {
namespace {

Matrix column(const std::vector<double>& values) {
  Matrix m(values.size(), 1);
  for (std::size_t i = 0; i < values.size(); ++i) m.at(i, 0) = values[i];
  return m;
}

TEST(LogitBoost, SingleStumpSolvesThresholdProblem) {
  const auto x = column({-2.0, -1.5, -1.0, 1.0, 1.5, 2.0});
  const std::vector<int> y = {0, 0, 0, 1, 1, 1};
  const auto model = train_logitboost(x, y, BoostParams{1, 1.0});
  ASSERT_EQ(model.stumps.size(), 1u);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    EXPECT_EQ(model.score(x.row(i)) > 0.0, y[i] != 0) << "sample " << i;
  }
}

TEST(LogitBoost, AdditiveStumpsLearnAnInterval) {
  // y = 1 inside |x| < 0.5: needs at least two stumps, which an additive
  // model represents exactly.
  std::vector<double> xs;
  std::vector<int> y;
  Rng rng(8);
  for (int i = 0; i < 300; ++i) {
    const double v = rng.uniform(-2.0, 2.0);
    xs.push_back(v);
    y.push_back(std::abs(v) < 0.5 ? 1 : 0);
  }
  const auto model = train_logitboost(column(xs), y, BoostParams{40, 0.5});
  std::size_t correct = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    correct += (model.score(std::vector<double>{xs[i]}) > 0.0) == (y[i] != 0);
  }
  EXPECT_GT(static_cast<double>(correct) / xs.size(), 0.98);
}

TEST(LogitBoost, TrainingLossNonIncreasing) {
  Rng rng(91);
  Matrix x(120, 4);
  std::vector<int> y(120);
  for (std::size_t i = 0; i < 120; ++i) {
    y[i] = i % 2 == 0 ? 1 : 0;
    for (std::size_t j = 0; j < 4; ++j) {
      x.at(i, j) = (y[i] != 0 ? 0.7 : -0.7) + rng.normal();
    }
  }
  const auto model = train_logitboost(x, y, BoostParams{60, 0.3});
  ASSERT_EQ(model.train_log_loss.size(), 60u);
  for (std::size_t r = 1; r < model.train_log_loss.size(); ++r) {
    EXPECT_LE(model.train_log_loss[r], model.train_log_loss[r - 1] + 1e-12)
        << "round " << r;
  }
}

TEST(LogitBoost, RejectsOutOfRangeLearnRate) {
  const auto x = column({-1.0, 1.0});
  const std::vector<int> y = {0, 1};
  EXPECT_THROW(train_logitboost(x, y, BoostParams{5, 0.0}), ArgumentError);
  EXPECT_THROW(train_logitboost(x, y, BoostParams{5, 1.5}), ArgumentError);
  EXPECT_THROW(train_logitboost(x, y, BoostParams{0, 0.5}), ArgumentError);
}

// Exhaustive scan over every (feature, boundary) pair: the oracle for the
// weighted least-squares stump fit.
double oracle_best_sse(const Matrix& x, const std::vector<double>& z,
                       const std::vector<double>& w) {
  const std::size_t n = x.rows();
  double total_w = 0.0, total_wz = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total_w += w[i];
    total_wz += w[i] * z[i];
  }
  // SSE up to the shared constant sum(w z^2): -(wzl^2/wl + wzr^2/wr)
  auto sse_of = [&](double wl, double wzl) {
    const double wr = total_w - wl;
    const double wzr = total_wz - wzl;
    return -(wl > 0.0 ? wzl * wzl / wl : 0.0) - (wr > 0.0 ? wzr * wzr / wr : 0.0);
  };
  double best = -(total_wz * total_wz / total_w);  // no-split
  for (std::size_t j = 0; j < x.cols(); ++j) {
    std::vector<double> values;
    for (std::size_t i = 0; i < n; ++i) values.push_back(x.at(i, j));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t t = 0; t + 1 < values.size(); ++t) {
      const double thr = 0.5 * (values[t] + values[t + 1]);
      double wl = 0.0, wzl = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (x.at(i, j) < thr) {
          wl += w[i];
          wzl += w[i] * z[i];
        }
      }
      best = std::min(best, sse_of(wl, wzl));
    }
  }
  return best;
}

TEST(LogitBoost, StumpFitMatchesExhaustiveScan) {
  Rng rng(44);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x(25, 3);
    std::vector<double> z(25), w(25);
    for (auto& v : x.data()) v = rng.uniform(-1.0, 1.0);
    for (auto& v : z) v = rng.uniform(-4.0, 4.0);
    for (auto& v : w) v = rng.uniform(0.01, 1.0);

    std::vector<std::vector<std::size_t>> order(3);
    for (std::size_t j = 0; j < 3; ++j) {
      order[j].resize(25);
      std::iota(order[j].begin(), order[j].end(), std::size_t{0});
      std::stable_sort(order[j].begin(), order[j].end(),
                       [&x, j](std::size_t a, std::size_t b) {
                         return x.at(a, j) < x.at(b, j);
                       });
    }
    const Stump stump = detail::fit_stump(x, z, w, order);
    double wl = 0.0, wzl = 0.0, total_w = 0.0, total_wz = 0.0;
    for (std::size_t i = 0; i < 25; ++i) {
      total_w += w[i];
      total_wz += w[i] * z[i];
      if (x.at(i, stump.feature) < stump.threshold) {
        wl += w[i];
        wzl += w[i] * z[i];
      }
    }
    const double wr = total_w - wl;
    const double wzr = total_wz - wzl;
    const double achieved = -(wl > 0.0 ? wzl * wzl / wl : 0.0) -
                            (wr > 0.0 ? wzr * wzr / wr : 0.0);
    EXPECT_NEAR(achieved, oracle_best_sse(x, z, w), 1e-9) << "trial " << trial;
  }
}

TEST(LogitBoost, DeterministicTraining) {
  Rng rng(66);
  Matrix x(50, 5);
  std::vector<int> y(50);
  for (std::size_t i = 0; i < 50; ++i) {
    y[i] = i < 25 ? 1 : 0;
    for (std::size_t j = 0; j < 5; ++j) x.at(i, j) = rng.normal() + (y[i] != 0 ? 0.5 : -0.5);
  }
  const auto a = train_logitboost(x, y, BoostParams{25, 0.4});
  const auto b = train_logitboost(x, y, BoostParams{25, 0.4});
  ASSERT_EQ(a.stumps.size(), b.stumps.size());
  for (std::size_t s = 0; s < a.stumps.size(); ++s) {
    EXPECT_EQ(a.stumps[s].feature, b.stumps[s].feature);
    EXPECT_EQ(a.stumps[s].threshold, b.stumps[s].threshold);
    EXPECT_EQ(a.stumps[s].left, b.stumps[s].left);
    EXPECT_EQ(a.stumps[s].right, b.stumps[s].right);
  }
}

}  // namespace
}  // namespace wheezelab
