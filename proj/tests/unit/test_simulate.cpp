#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mmhp/error.hpp"
#include "mmhp/simulate.hpp"
#include "models.hpp"

using testing_models::vec;

namespace {

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

template <typename F>
Moments moments(std::size_t n, F&& draw) {
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = draw(i);
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = (sum2 - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace

TEST(Rng, DeterministicAndStreamsDiffer) {
  mmhp::Rng a(7, 1), b(7, 1), c(7, 2);
  const double x = a.uniform();
  EXPECT_EQ(x, b.uniform());
  EXPECT_NE(x, c.uniform());
  EXPECT_GT(x, 0.0);
  EXPECT_LT(x, 1.0);
}

TEST(Rng, ExponentialMean) {
  mmhp::Rng rng(3);
  const auto m = moments(200000, [&](std::size_t) { return rng.exponential(4.0); });
  EXPECT_NEAR(m.mean, 0.25, 4.0 * m.se);
}

TEST(Rng, CategoricalSkipsZeroWeights) {
  mmhp::Rng rng(5);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(rng.categorical(vec({0.0, 1.0, 0.0})), 1u);
}

TEST(Chain, JumpCountMatchesPoisson) {
  // Symmetric two-state chain: jumps form a Poisson process of rate epsilon.
  const auto a = mmhp::RateMatrix::symmetric(2, 0.01);
  const auto m = moments(1000, [&](std::size_t seed) {
    return static_cast<double>(mmhp::simulate_chain(a, 0, 1000.0, seed + 1).jump_times.size());
  });
  EXPECT_NEAR(m.mean, 10.0, 3.0 * m.se);
}

TEST(Chain, AlternatesAndIsDeterministic) {
  const auto a = mmhp::RateMatrix::symmetric(2, 0.5);
  const auto p = mmhp::simulate_chain(a, 1, 100.0, 9);
  const auto q = mmhp::simulate_chain(a, 1, 100.0, 9);
  EXPECT_EQ(p.jump_times, q.jump_times);
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p.states.front(), 1u);
  EXPECT_EQ(p.state_at(0.0), 1u);
  if (!p.jump_times.empty()) {
    EXPECT_EQ(p.state_before(p.jump_times[0]), 1u);
    EXPECT_EQ(p.state_at(p.jump_times[0]), p.states[1]);
  }
}

TEST(Chain, AbsorbingStateNeverJumps) {
  EXPECT_TRUE(mmhp::simulate_chain(mmhp::RateMatrix::symmetric(2, 0.0), 0, 1e6, 1).jump_times.empty());
}

TEST(Chain, FixedChainValidation) {
  EXPECT_THROW((void)mmhp::fixed_chain({5.0, 3.0}, {0, 1, 0}, 10.0), mmhp::Error);
  EXPECT_THROW((void)mmhp::fixed_chain({5.0}, {0, 0}, 10.0), mmhp::Error);
  EXPECT_THROW((void)mmhp::fixed_chain({11.0}, {0, 1}, 10.0), mmhp::Error);
}

TEST(Thinning, PoissonWhenBetaZero) {
  const auto model = mmhp::ModelSpec::make(mmhp::RateMatrix::symmetric(1, 0.0),
                                           mmhp::HawkesParams::make(vec({5.0}), vec({0.0}), vec({1.0})));
  const auto chain = mmhp::fixed_chain({}, {0}, 100.0);
  const auto m = moments(300, [&](std::size_t seed) {
    return static_cast<double>(mmhp::simulate_events_thinning(model, chain, 100.0, seed).size());
  });
  EXPECT_NEAR(m.mean, 500.0, 3.0 * m.se);
}

TEST(Thinning, EventsSortedAndDeterministic) {
  const auto model = testing_models::two_state_model();
  const auto chain = mmhp::fixed_chain({20.0}, {0, 1}, 40.0);
  const auto e = mmhp::simulate_events_thinning(model, chain, 40.0, 11);
  EXPECT_NO_THROW(e.validate());
  EXPECT_EQ(e.times, mmhp::simulate_events_thinning(model, chain, 40.0, 11).times);
  EXPECT_LE(e.times.back(), 40.0);
}

TEST(Thinning, PowerIntensityRate) {
  // beta = 0 and zeta = 0.5 gives a Poisson process of rate sqrt(alpha).
  const auto model = mmhp::ModelSpec::make(
      mmhp::RateMatrix::symmetric(1, 0.0),
      mmhp::HawkesParams::make(vec({16.0}), vec({0.0}), vec({1.0}), vec({0.5})));
  const auto chain = mmhp::fixed_chain({}, {0}, 200.0);
  const auto m = moments(200, [&](std::size_t seed) {
    return static_cast<double>(mmhp::simulate_events_thinning(model, chain, 200.0, seed).size());
  });
  EXPECT_NEAR(m.mean, 800.0, 3.0 * m.se);
}

TEST(Branching, OffspringMeanIsBranchingRatio) {
  mmhp::Rng rng(17);
  const auto m = moments(100000, [&](std::size_t) {
    return static_cast<double>(mmhp::draw_offspring_delays(1.0, 10.0 / 7.0, rng).size());
  });
  EXPECT_NEAR(m.mean, 0.7, 4.0 * m.se);
}

TEST(Branching, Errors) {
  const auto power = mmhp::ModelSpec::make(
      mmhp::RateMatrix::symmetric(1, 0.0),
      mmhp::HawkesParams::make(vec({1.0}), vec({0.5}), vec({1.0}), vec({0.9})));
  const auto chain = mmhp::fixed_chain({}, {0}, 10.0);
  try {
    (void)mmhp::simulate_events_branching(power, chain, 10.0, 1);
    FAIL();
  } catch (const mmhp::Error& e) {
    EXPECT_EQ(e.code(), mmhp::ErrorCode::unsupported);
  }
  const auto explosive = mmhp::ModelSpec::make(
      mmhp::RateMatrix::symmetric(1, 0.0), mmhp::HawkesParams::make(vec({1.0}), vec({2.0}), vec({1.0})));
  try {
    (void)mmhp::simulate_events_branching(explosive, chain, 10.0, 1);
    FAIL();
  } catch (const mmhp::Error& e) {
    EXPECT_EQ(e.code(), mmhp::ErrorCode::non_stationary);
  }
}

TEST(Branching, StatsAddUp) {
  const auto model = testing_models::two_state_model();
  const auto chain = mmhp::fixed_chain({}, {0}, 50.0);
  mmhp::BranchingStats stats;
  const auto e = mmhp::simulate_events_branching(model, chain, 50.0, 4, &stats);
  EXPECT_EQ(e.size(), stats.immigrants + stats.offspring);
  EXPECT_NO_THROW(e.validate());
}

TEST(BinCounts, RightClosedBins) {
  mmhp::EventTimes e{{0.05, 0.1, 0.15, 0.151, 0.3}};
  const auto c = mmhp::bin_counts(e, 0.0, 0.1, 3);
  EXPECT_EQ(c.counts, (std::vector<double>{2.0, 2.0, 1.0}));
  EXPECT_NEAR(c.horizon(), 0.3, 1e-15);
}
