#include <gtest/gtest.h>

#include <cmath>

#include "mmhp/error.hpp"
#include "mmhp/estimate.hpp"
#include "mmhp/smoother.hpp"
#include "models.hpp"
#include "oracle.hpp"

using mmhp::Vector;
using testing_models::vec;

TEST(ParamVector, RoundTrip) {
  const auto p = testing_models::two_state_params();
  const auto packed = mmhp::ParamVector::encode(p, false);
  EXPECT_EQ(packed.x.size(), 6);
  const auto back = packed.decode(p);
  EXPECT_NEAR(back.gamma[0], 10.0 / 7.0, 1e-14);
  EXPECT_EQ(mmhp::ParamVector::encode(p, true).x.size(), 8);
}

TEST(LoglikComplete, OneStateMatchesDirectLikelihood) {
  const auto p = mmhp::HawkesParams::make(vec({6.0}), vec({1.0}), vec({10.0 / 7.0}));
  std::vector<double> events{0.1, 0.15, 0.4, 0.41, 0.9};
  const auto chain = mmhp::fixed_chain({}, {0}, 1.0);
  EXPECT_NEAR(mmhp::loglik_complete(p, chain, mmhp::EventTimes{events}, 1.0),
              oracle::hawkes_loglik(6.0, 1.0, 10.0 / 7.0, events, 0.0, 1.0), 1e-12);
}

TEST(LoglikComplete, NoEventsIsMinusCompensator) {
  const auto p = testing_models::two_state_params();
  const auto chain = mmhp::fixed_chain({0.4}, {0, 1}, 1.0);
  EXPECT_NEAR(mmhp::loglik_complete(p, chain, {}, 1.0), -(6.0 * 0.4 + 18.0 * 0.6), 1e-12);
}

TEST(LoglikComplete, PowerIntensityUsesQuadrature) {
  // beta = 0: intensity alpha^zeta is constant, so the value is exact.
  const auto p = mmhp::HawkesParams::make(vec({4.0}), vec({0.0}), vec({1.0}), vec({0.5}));
  const auto chain = mmhp::fixed_chain({}, {0}, 2.0);
  EXPECT_NEAR(mmhp::loglik_complete(p, chain, mmhp::EventTimes{{0.5, 1.0}}, 2.0), 2.0 * std::log(2.0) - 4.0,
              1e-10);
}

TEST(LoglikComplete, PowerIntensityAgainstFineQuadrature) {
  const auto p = mmhp::HawkesParams::make(vec({1.0, 0.5}), vec({1.0, 1.7}), vec({1.0, 0.5}), vec({0.9, 0.7}));
  const auto chain = mmhp::fixed_chain({1.3}, {1, 0}, 3.0);
  const std::vector<double> events{0.2, 0.9, 1.0, 2.2};
  // Reference: midpoint rule on 1e-5 substeps with the kernel decayed exactly.
  double reference = 0.0;
  mmhp::IntensityState k = mmhp::IntensityState::initial(p);
  double t = 0.0;
  std::size_t next = 0;
  const double h = 1e-5;
  while (t < 3.0 - 1e-12) {
    const double end = std::min(3.0, next < events.size() ? std::min(events[next], t + h) : t + h);
    const auto i = static_cast<Eigen::Index>(chain.state_at(0.5 * (t + end)));
    const auto mid = mmhp::intensity_decay(k, p, 0.5 * (end - t));
    reference -= std::pow(mid.k[i], p.zeta[i]) * (end - t);
    k = mmhp::intensity_decay(k, p, end - t);
    t = end;
    if (next < events.size() && std::abs(t - events[next]) < 1e-12) {
      const auto j = static_cast<Eigen::Index>(chain.state_before(t));
      reference += p.zeta[j] * std::log(k.k[j]);
      k = mmhp::intensity_jump(k, p);
      ++next;
    }
  }
  EXPECT_NEAR(mmhp::loglik_complete(p, chain, mmhp::EventTimes{events}, 3.0) / reference, 1.0, 1e-6);
}

TEST(LoglikPartial, MatchesHandComputation) {
  const auto p = mmhp::HawkesParams::make(vec({2.0, 5.0}), vec({0.0, 0.0}), vec({1.0, 1.0}));
  const mmhp::CountSeries counts{0.0, 0.5, {1.0, 3.0}};
  mmhp::PosteriorPath r;
  r.times = {0.5, 1.0};
  r.probs = {vec({1.0, 0.0}), vec({0.25, 0.75})};
  const double expected = (std::log(2.0) - 1.0) + 0.25 * (3.0 * std::log(2.0) - 1.0) +
                          0.75 * (3.0 * std::log(5.0) - 2.5);
  EXPECT_NEAR(mmhp::loglik_partial_discrete(p, r, counts), expected, 1e-14);
  r.times = {0.5, 1.1};
  EXPECT_THROW((void)mmhp::loglik_partial_discrete(p, r, counts), mmhp::Error);
}

TEST(NelderMead, Quadratic) {
  const auto result = mmhp::nelder_mead_maximize(
      [](const Vector& x) { return -(x[0] - 1.0) * (x[0] - 1.0) - 10.0 * (x[1] + 2.0) * (x[1] + 2.0); },
      vec({0.0, 0.0}), {1e-10, 5000, 0.5});
  EXPECT_TRUE(result.converged);
  EXPECT_NEAR(result.x[0], 1.0, 1e-6);
  EXPECT_NEAR(result.x[1], -2.0, 1e-6);
}

TEST(NelderMead, Rosenbrock) {
  const auto result = mmhp::nelder_mead_maximize(
      [](const Vector& x) {
        return -(100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2));
      },
      vec({-1.2, 1.0}), {1e-10, 20000, 0.5});
  EXPECT_NEAR(result.x[0], 1.0, 1e-4);
  EXPECT_NEAR(result.x[1], 1.0, 1e-4);
}

TEST(NelderMead, NonFiniteEverywhereFails) {
  try {
    (void)mmhp::nelder_mead_maximize([](const Vector&) { return std::nan(""); }, vec({0.0}));
    FAIL();
  } catch (const mmhp::Error& e) {
    EXPECT_EQ(e.code(), mmhp::ErrorCode::optimizer_failure);
  }
}

TEST(NelderMead, IterationCap) {
  const auto result = mmhp::nelder_mead_maximize(
      [](const Vector& x) { return -x.squaredNorm(); }, vec({5.0, 5.0, 5.0}), {1e-14, 10, 0.1});
  EXPECT_FALSE(result.converged);
  EXPECT_LE(result.iterations, 10u);
}

TEST(Clustering, Indicators) {
  const mmhp::CountSeries counts{0.0, 1.0, std::vector<double>(10, 1.0)};
  const auto r = mmhp::initial_clustering(counts, {3.0, 7.0}, {0, 1, 0}, 2);
  ASSERT_EQ(r.size(), 11u);
  EXPECT_EQ(r.probs[3][0], 1.0);   // bin 3 ends at t=3, still first segment
  EXPECT_EQ(r.probs[4][1], 1.0);   // bin 4 covers ]3, 4]
  EXPECT_EQ(r.probs[8][0], 1.0);
  EXPECT_THROW((void)mmhp::initial_clustering(counts, {3.0}, {0, 2}, 2), mmhp::Error);
  EXPECT_THROW((void)mmhp::initial_clustering(counts, {3.0}, {0}, 2), mmhp::Error);
}

TEST(RateMatrixEm, FixedPoint) {
  mmhp::Matrix m(3, 3);
  m << -0.7, 0.2, 0.1, 0.3, -0.5, 0.4, 0.4, 0.3, -0.5;
  const mmhp::RateMatrix a(m);
  mmhp::PosteriorPath r;
  for (int k = 0; k <= 20; ++k) {
    r.times.push_back(0.1 * k);
    r.probs.push_back(mmhp::normalize_probability(vec({1.0 + k, 2.0, 1.0 + 0.5 * k})));
  }
  const auto step = mmhp::em_rate_matrix_step(a, r);
  EXPECT_LT((step.estimate.matrix() - m).norm() / m.norm(), 1e-12);
  EXPECT_NEAR(step.stats.occupation.sum(), 2.0, 1e-12);
}

TEST(RateMatrixEm, ZeroOccupationIsDegenerate) {
  mmhp::PosteriorPath r;
  r.times = {0.0, 1.0};
  r.probs = {vec({1.0, 0.0}), vec({1.0, 0.0})};
  try {
    (void)mmhp::em_rate_matrix_step(mmhp::RateMatrix::symmetric(2, 0.1), r);
    FAIL();
  } catch (const mmhp::Error& e) {
    EXPECT_EQ(e.code(), mmhp::ErrorCode::degenerate_posterior);
  }
}

TEST(Argmax, SwitchCount) {
  EXPECT_EQ(mmhp::count_switches({0, 0, 1, 1, 0}), 2u);
  EXPECT_EQ(mmhp::count_switches({}), 0u);
}

TEST(Tune, FrozenChainAndMonotoneReport) {
  const auto model = testing_models::two_state_model();
  const auto chain = mmhp::fixed_chain({30.0, 60.0}, {1, 0, 1}, 90.0);
  const auto events = mmhp::simulate_events_thinning(model, chain, 90.0, 5);
  const auto counts = mmhp::bin_counts(events, 0.0, 0.1, 900);
  const auto rows = mmhp::tune_epsilon({0.0, 0.01, 1.0}, counts, model);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].switches, 0u);
  EXPECT_LE(rows[1].switches, rows[2].switches);
  EXPECT_EQ(rows[1].regimes, rows[1].switches + 1);
}

TEST(Em, SingleIterationImprovesOnClustering) {
  const auto truth = testing_models::two_state_model();
  const auto chain = mmhp::fixed_chain({50.0}, {0, 1}, 100.0);
  const auto events = mmhp::simulate_events_thinning(truth, chain, 100.0, 21);
  const auto counts = mmhp::bin_counts(events, 0.0, 0.1, 1000);
  const auto r0 = mmhp::initial_clustering(counts, {50.0}, {0, 1}, 2);
  const auto start = mmhp::ModelSpec::make(
      truth.rate_matrix, mmhp::HawkesParams::make(vec({10.0, 10.0}), vec({0.5, 0.5}), vec({1.0, 1.0})));
  mmhp::EmOptions options;
  options.iterations = 1;
  const auto result = mmhp::em_calibrate(start, counts, r0, options);
  ASSERT_EQ(result.iterations.size(), 1u);
  const auto& fit = result.iterations[0];
  EXPECT_GT(fit.loglik, mmhp::loglik_partial_discrete(start.params, r0, counts));
  EXPECT_LT(fit.params.alpha[0], fit.params.alpha[1]);
  EXPECT_TRUE(std::isfinite(fit.log_evidence));
}
