#include <gtest/gtest.h>

#include <cmath>

#include "planprobe/error.hpp"
#include "planprobe/labeling.hpp"
#include "planprobe/rng.hpp"

using namespace planprobe;
using namespace planprobe::labeling;

namespace {

std::vector<double> ms(std::vector<double> x, double b, double g) { return milestone_labels({"m", x}, b, g).values; }
std::vector<double> rs(std::vector<double> x, double b, double g) { return reward_labels({"r", x}, b, g).values; }

void expect_near(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

/// Direct sum: y_t = sum_k gamma^k x_{t+k}, terminal 0.
std::vector<double> reward_oracle(const std::vector<double>& x, double g) {
  std::vector<double> y(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    double s = 0.0;
    for (std::size_t k = t; k < x.size(); ++k) s += std::pow(g, static_cast<double>(k - t)) * x[k];
    y[t] = s;
  }
  return y;
}

/// Direct form: y_t = max_k gamma^k x_{t+k}, terminal 0.
std::vector<double> milestone_oracle(const std::vector<double>& x, double g) {
  std::vector<double> y(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    double m = 0.0;
    for (std::size_t k = t; k < x.size(); ++k) m = std::max(m, std::pow(g, static_cast<double>(k - t)) * x[k]);
    y[t] = m;
  }
  return y;
}

}  // namespace

TEST(MilestoneLabels, WorkedExamples) {
  EXPECT_EQ(ms({0, 0, 0, 1}, 0.0, 0.5), (std::vector<double>{0.125, 0.25, 0.5, 1.0}));
  EXPECT_EQ(ms({0, 0, 0}, 0.0, 0.73), (std::vector<double>{0, 0, 0}));
  expect_near(ms({0, 0}, 0.8, 0.9), {0.648, 0.72}, 1e-15);
}

TEST(RewardLabels, WorkedExamples) {
  EXPECT_EQ(rs({1, 1, 1}, 0.0, 0.5), (std::vector<double>{1.75, 1.5, 1.0}));
  EXPECT_EQ(rs({0, 0, 0}, 0.0, 0.9), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(rs({0}, 2.0, 0.5), (std::vector<double>{1.0}));
}

TEST(Labels, DomainErrors) {
  EXPECT_THROW(ms({0, 1}, 0.0, 0.0), DomainError);
  EXPECT_THROW(ms({0, 1}, 0.0, 1.01), DomainError);
  EXPECT_THROW(ms({0, 1}, 1.5, 0.9), DomainError);
  EXPECT_THROW(ms({0, 1}, -0.1, 0.9), DomainError);
  EXPECT_THROW(rs({0, 1}, 0.0, -0.5), DomainError);
  EXPECT_NO_THROW(ms({0, 1}, 1.0, 1.0));
}

TEST(Labels, MatchDirectFormOracles) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(60);
    const double g = 0.5 + 0.5 * rng.uniform();
    std::vector<double> x(n), r(n);
    for (std::size_t t = 0; t < n; ++t) {
      x[t] = rng.uniform() < 0.1 ? 1.0 : 0.0;
      r[t] = rng.normal();
    }
    expect_near(ms(x, 0.0, g), milestone_oracle(x, g), 1e-12);
    expect_near(rs(r, 0.0, g), reward_oracle(r, g), 1e-9);
  }
}

TEST(Labels, SlicedWithExactBootstrapsEqualFullEpisode) {
  Rng rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(200);
    const double g = trial % 2 ? 0.995 : 0.5 + 0.5 * rng.uniform();
    std::vector<double> x(n), r(n);
    for (std::size_t t = 0; t < n; ++t) {
      x[t] = rng.uniform() < 0.05 ? 1.0 : 0.0;
      r[t] = rng.uniform() < 0.3 ? rng.normal() : 0.0;
    }
    const auto full_m = ms(x, 0.0, g), full_r = rs(r, 0.0, g);
    std::vector<std::size_t> cuts = {0};
    while (cuts.back() < n) cuts.push_back(std::min(n, cuts.back() + 1 + rng.uniform_int(64)));
    std::vector<double> got_m, got_r;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const std::size_t a = cuts[i], b = cuts[i + 1];
      const double bm = b < n ? full_m[b] : 0.0, br = b < n ? full_r[b] : 0.0;
      const auto ym = ms({x.begin() + a, x.begin() + b}, bm, g);
      const auto yr = rs({r.begin() + a, r.begin() + b}, br, g);
      got_m.insert(got_m.end(), ym.begin(), ym.end());
      got_r.insert(got_r.end(), yr.begin(), yr.end());
    }
    expect_near(got_m, full_m, 1e-9);
    expect_near(got_r, full_r, 1e-9);
  }
}

TEST(Labels, FullEpisodeConcatenatesSliceTracks) {
  const std::vector<std::vector<double>> parts = {{0, 0}, {0, 1}};
  EXPECT_EQ(full_episode_labels(parts, 0.5, Recurrence::Milestone).values, ms({0, 0, 0, 1}, 0.0, 0.5));
  EXPECT_EQ(full_episode_labels(parts, 0.5, Recurrence::RewardSum).values, rs({0, 0, 0, 1}, 0.0, 0.5));
}

TEST(Labels, SingleEventFollowsPowerLaw) {
  Rng rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(300);
    const std::size_t at = rng.uniform_int(n);
    const double g = trial % 3 == 0 ? 0.5 : trial % 3 == 1 ? 0.995 : 0.9 + 0.1 * rng.uniform();
    std::vector<double> x(n, 0.0);
    x[at] = 1.0;
    const auto y = ms(x, 0.0, g);
    for (std::size_t t = 0; t <= at; ++t) {
      // Repeated multiplication is exact for dyadic gamma; otherwise within 1e-12 of pow.
      double expect = 1.0;
      for (std::size_t k = t; k < at; ++k) expect *= g;
      EXPECT_EQ(y[t], expect);
      EXPECT_NEAR(y[t], std::pow(g, static_cast<double>(at - t)), 1e-12);
    }
    for (std::size_t t = at + 1; t < n; ++t) EXPECT_EQ(y[t], 0.0);
  }
}

TEST(Labels, MonotoneInBootstrapAndBounded) {
  Rng rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(80);
    const double g = 0.8 + 0.2 * rng.uniform();
    std::vector<double> x(n), r(n);
    for (std::size_t t = 0; t < n; ++t) {
      x[t] = rng.uniform() < 0.1 ? 1.0 : 0.0;
      r[t] = rng.normal();
    }
    const double b1 = rng.uniform(), b2 = b1 + (1.0 - b1) * rng.uniform();
    const auto m1 = ms(x, b1, g), m2 = ms(x, b2, g);
    const auto r1 = rs(r, b1, g), r2 = rs(r, b2, g);
    for (std::size_t t = 0; t < n; ++t) {
      EXPECT_LE(m1[t], m2[t]);
      EXPECT_LE(r1[t], r2[t]);
      EXPECT_GE(m1[t], 0.0);
      EXPECT_LE(m2[t], 1.0);
    }
  }
}
