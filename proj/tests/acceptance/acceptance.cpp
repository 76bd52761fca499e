// Acceptance checks. One line per criterion: "AC<k> PASS|FAIL <detail>".
// Exit status counts failed criteria not named with --allow-fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mmhp/cli.hpp"
#include "mmhp/estimate.hpp"
#include "mmhp/filter.hpp"
#include "mmhp/io.hpp"
#include "mmhp/robust.hpp"
#include "mmhp/simulate.hpp"
#include "mmhp/smoother.hpp"
#include "models.hpp"
#include "oracle.hpp"

namespace {

using mmhp::Vector;
using testing_models::vec;

const std::filesystem::path kData = MMHP_DATA_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer, pattern, args...);
  return buffer;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Short path shared by the oracle checks: two states, switch at t = 5.
struct ShortPath {
  mmhp::ModelSpec model = testing_models::two_state_model();
  oracle::TwoState two = testing_models::two_state_oracle();
  mmhp::EventTimes events;
  double horizon = 10.0;
  double h = 1e-3;
  std::size_t bins = 10000;
  oracle::ForwardBackward fb;
  // The h = 1e-3 oracle freezes lambda at bin starts, an O(h) error that the
  // event-time filter does not share; event-time checks also use a refined grid.
  double h_fine = 2e-5;
  oracle::ForwardBackward fb_fine;

  ShortPath() {
    const auto chain = mmhp::fixed_chain({5.0}, {1, 0}, horizon);
    events = mmhp::simulate_events_thinning(model, chain, horizon, 101);
    fb = oracle::forward_backward(two, {model.q0[0], model.q0[1]}, events.times, horizon, h);
    fb_fine = oracle::forward_backward(two, {model.q0[0], model.q0[1]}, events.times, horizon, h_fine);
  }
};

// Largest |p - oracle| over the oracle grid points present in `path`,
// skipping points where an event sits on that instant.
double sup_error(const mmhp::PosteriorPath& path, const std::vector<oracle::Vec2>& reference, double h,
                 const mmhp::EventTimes& events) {
  double worst = 0.0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double t = path.times[i];
    const auto j = static_cast<std::size_t>(std::llround(t / h));
    if (std::abs(static_cast<double>(j) * h - t) > 1e-9) continue;
    if (std::binary_search(events.times.begin(), events.times.end(), t)) continue;
    worst = std::max(worst, std::abs(path.probs[i][0] - reference[j][0]));
  }
  return worst;
}

Outcome ac1(const ShortPath& s) {
  const auto start = std::chrono::steady_clock::now();
  const auto counts = mmhp::bin_counts(s.events, 0.0, s.h, s.bins);
  const auto discrete = mmhp::filter_counts(s.model, counts);
  mmhp::FilterOptions options;
  options.max_substep = s.h_fine;
  const auto continuous =
      mmhp::filter_events(s.model, s.events, s.horizon, mmhp::uniform_grid(0.0, s.horizon, 0.01), options);
  const double e_counts = sup_error(discrete.path, s.fb.filtered, s.h, mmhp::EventTimes{});
  const double e_events_coarse = sup_error(continuous.path, s.fb.filtered, s.h, s.events);
  const double e_events = sup_error(continuous.path, s.fb_fine.filtered, s.h_fine, s.events);
  const double elapsed = seconds_since(start);
  return {e_counts < 1e-3 && e_events < 1e-3 && elapsed < 10.0,
          fmt("sup error (< 1e-3): counts vs h=1e-3 oracle %.3g; events vs h=2e-5 oracle %.3g (vs h=1e-3 "
              "oracle %.3g); %zu events, %.2fs",
              e_counts, e_events, e_events_coarse, s.events.size(), elapsed)};
}

Outcome ac2(const ShortPath& s) {
  const auto start = std::chrono::steady_clock::now();
  const auto counts = mmhp::bin_counts(s.events, 0.0, s.h, s.bins);
  const auto discrete = mmhp::smooth_counts(s.model, counts);
  mmhp::FilterOptions options;
  options.max_substep = s.h_fine;
  const auto continuous =
      mmhp::smooth_events(s.model, s.events, s.horizon, mmhp::uniform_grid(0.0, s.horizon, 0.01), options);
  const double e_counts = sup_error(discrete.smoothed, s.fb.smoothed, s.h, mmhp::EventTimes{});
  const double e_events_coarse = sup_error(continuous.smoothed, s.fb.smoothed, s.h, s.events);
  const double e_events = sup_error(continuous.smoothed, s.fb_fine.smoothed, s.h_fine, s.events);
  const double elapsed = seconds_since(start);
  return {e_counts < 1e-3 && e_events < 1e-3 && elapsed < 10.0,
          fmt("sup error (< 1e-3): counts vs h=1e-3 oracle %.3g; events vs h=2e-5 oracle %.3g (vs h=1e-3 "
              "oracle %.3g); %.2fs",
              e_counts, e_events, e_events_coarse, elapsed)};
}

Outcome ac3(const ShortPath& s) {
  const auto counts = mmhp::bin_counts(s.events, 0.0, s.h, s.bins);
  const auto forward = mmhp::filter_counts(s.model, counts);
  std::vector<double> logs;
  mmhp::SmoothOptions options;
  options.log_inner_product = &logs;
  (void)mmhp::smooth_counts_backward(s.model, counts, forward.record, options);
  const auto [lo, hi] = std::minmax_element(logs.begin(), logs.end());
  const double drift = *hi - *lo;
  return {drift < 1e-6 && forward.record.steps.size() == 10000,
          fmt("log<v,q> drift %.3g over %zu steps (< 1e-6)", drift, forward.record.steps.size())};
}

Outcome ac4() {
  const auto start = std::chrono::steady_clock::now();
  const auto model = testing_models::two_state_model();
  const double horizon = 1000.0;
  double worst = 0.0;
  std::string detail;
  for (std::size_t state = 0; state < 2; ++state) {
    const auto chain = mmhp::fixed_chain({}, {state}, horizon);
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      total += static_cast<double>(mmhp::simulate_events_thinning(model, chain, horizon, 1000 * state + seed).size());
    }
    const double rate = total / (100.0 * horizon);
    worst = std::max(worst, std::abs(rate / 20.0 - 1.0));
    detail += fmt("state %zu rate %.3f; ", state + 1, rate);
  }
  const double elapsed = seconds_since(start);
  return {worst < 0.05 && elapsed < 60.0, detail + fmt("max rel dev %.3g (< 0.05), %.1fs", worst, elapsed)};
}

Outcome ac5() {
  const auto model = testing_models::two_state_model();
  const auto chain = mmhp::fixed_chain({}, {0}, 100.0);
  auto stats = [&](auto&& sampler) {
    double sum = 0.0, sum2 = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const auto n = static_cast<double>(sampler(seed).size());
      sum += n;
      sum2 += n * n;
    }
    const double mean = sum / 100.0;
    return std::pair{mean, std::sqrt((sum2 / 100.0 - mean * mean) * 100.0 / 99.0 / 100.0)};
  };
  const auto [m_thin, se_thin] =
      stats([&](std::uint64_t seed) { return mmhp::simulate_events_thinning(model, chain, 100.0, seed); });
  const auto [m_branch, se_branch] = stats(
      [&](std::uint64_t seed) { return mmhp::simulate_events_branching(model, chain, 100.0, 500 + seed); });
  const double se = std::hypot(se_thin, se_branch);
  const double z = std::abs(m_thin - m_branch) / se;
  return {z < 3.0, fmt("thinning %.1f vs branching %.1f events, |diff|/se = %.2f (< 3)", m_thin, m_branch, z)};
}

Outcome ac6() {
  std::map<std::string, std::string> values{{"command", "em-demo"}, {"states", "3"},
                                            {"alpha", "1,2,3"},      {"epsilon", "0.1"},
                                            {"trials", "50"},        {"seed", "6"}};
  const auto config = mmhp::parse_config(values);
  std::ostringstream out, err;
  const auto result = mmhp::run_subcommand(config, out, err);
  double worst = 0.0;
  for (const auto& row : result.table.rows) worst = std::max(worst, row[1]);
  return {result.exit_code == 0 && result.table.rows.size() == 50 && worst < 1e-10,
          fmt("max ||A1 - A0||/||A0|| = %.3g over %zu random (A, r) pairs (< 1e-10)", worst,
              result.table.rows.size())};
}

Outcome ac7() {
  const auto start = std::chrono::steady_clock::now();
  const auto counts = mmhp::read_counts_csv(kData / "two_state_counts.csv");
  const auto truth = testing_models::two_state_model();
  const auto r0 = mmhp::initial_clustering(counts, {50, 200, 250, 300, 400, 650, 950}, {0, 1, 0, 1, 0, 1, 0, 1}, 2);
  const auto start_model = mmhp::ModelSpec::make(
      truth.rate_matrix, mmhp::HawkesParams::make(vec({10.0, 10.0}), vec({0.5, 0.5}), vec({1.0, 1.0})));
  const auto result = mmhp::em_calibrate(start_model, counts, r0, {});
  const auto& last = result.iterations.back().params;

  // Partial log-likelihood at successive iterates, each under its own E-step weights.
  std::vector<double> partial;
  for (const auto& it : result.iterations) {
    auto model = truth;
    model.params = it.params;
    partial.push_back(mmhp::loglik_partial_discrete(it.params, mmhp::smooth_counts(model, counts).smoothed, counts));
  }
  double worst_drop = 0.0;
  for (std::size_t k = 1; k < partial.size(); ++k) worst_drop = std::max(worst_drop, partial[k - 1] - partial[k]);

  const bool alpha_ok = std::abs(last.alpha[0] / 7.6 - 1.0) <= 0.5 && std::abs(last.alpha[1] / 19.5 - 1.0) <= 0.5;
  const bool beta_ok = last.beta[0] >= 0.6 && last.beta[0] <= 1.0;
  const bool gamma_ok = last.gamma[0] >= 1.0 && last.gamma[0] <= 2.0;
  const double elapsed = seconds_since(start);
  return {alpha_ok && beta_ok && gamma_ok && worst_drop <= 1e-3 && elapsed < 300.0,
          fmt("alpha=(%.3f, %.3f)%s beta1=%.4f%s gamma1=%.4f%s max loglik drop %.2g%s, %.1fs", last.alpha[0],
              last.alpha[1], alpha_ok ? "" : " [out]", last.beta[0], beta_ok ? "" : " [out of 0.6..1.0]",
              last.gamma[0], gamma_ok ? "" : " [out]", worst_drop, worst_drop <= 1e-3 ? "" : " [>1e-3]", elapsed)};
}

double argmax_error(const mmhp::PosteriorPath& path, const mmhp::ChainPath& chain) {
  const auto states = mmhp::argmax_path(path);
  std::size_t wrong = 0;
  for (std::size_t k = 1; k < path.size(); ++k) {
    // Bin k covers ]t_{k-1}, t_k]; compare with the chain at its midpoint.
    wrong += states[k] != chain.state_at(0.5 * (path.times[k - 1] + path.times[k])) ? 1 : 0;
  }
  return static_cast<double>(wrong) / static_cast<double>(path.size() - 1);
}

Outcome ac8() {
  const auto model = testing_models::two_state_model();
  std::size_t smoother_wins = 0;
  double filter_mean = 0.0, smoother_mean = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto chain = mmhp::simulate_chain(model.rate_matrix, model.q0, 1000.0, 7000 + seed);
    const auto events = mmhp::simulate_events_thinning(model, chain, 1000.0, 7000 + seed);
    const auto result = mmhp::smooth_counts(model, mmhp::bin_counts(events, 0.0, 0.1, 10000));
    const double ef = argmax_error(result.filtered, chain);
    const double es = argmax_error(result.smoothed, chain);
    smoother_wins += es <= ef ? 1 : 0;
    filter_mean += ef / 100.0;
    smoother_mean += es / 100.0;
  }
  return {smoother_wins >= 80, fmt("smoother error <= filter error on %zu/100 seeds (>= 80); mean error filter %.3f "
                                   "smoother %.3f",
                                   smoother_wins, filter_mean, smoother_mean)};
}

Outcome ac9() {
  const auto model = testing_models::two_state_model();
  // Equivalence on [0, 2] with the shared substep.
  const auto chain = mmhp::fixed_chain({}, {0}, 2.0);
  const auto events = mmhp::simulate_events_thinning(model, chain, 2.0, 909);
  mmhp::RobustOptions ropts;
  ropts.substep = 1e-3;
  const auto run = mmhp::robust_filter_events(model, events, 2.0, ropts);
  mmhp::FilterOptions fopts;
  fopts.max_substep = 1e-3;
  const auto filtered = mmhp::filter_events(model, events, 2.0, {}, fopts);
  std::map<double, Vector> robust_log_q;
  for (const auto& sample : run.samples) robust_log_q[sample.t] = sample.log_q;
  double worst = 0.0;
  std::size_t compared = 0;
  for (const auto& step : filtered.record.steps) {
    if (!step.output) continue;
    const auto it = robust_log_q.find(step.t_end());
    if (it == robust_log_q.end()) continue;
    ++compared;
    const Vector log_q = step.p_after.array().log().matrix() + Vector::Constant(2, step.log_evidence_after);
    for (int i = 0; i < 2; ++i) worst = std::max(worst, std::abs(std::expm1(it->second[i] - log_q[i])));
  }

  // Instability: no events, so the intensities stay at (6, 18).
  mmhp::RobustOptions long_opts;
  long_opts.substep = 1e-2;
  long_opts.sample_every = 1.0;
  const auto unstable = mmhp::robust_filter_events(model, {}, 50.0, long_opts);
  double slope = 0.0;
  if (unstable.samples.size() > 2) {
    const auto& a = unstable.samples[1];
    const auto& b = unstable.samples.back();
    slope = (b.condition_log - a.condition_log) / (b.t - a.t);
  }
  const bool fired = unstable.overflowed && unstable.last_stable_time < 50.0;
  const bool slope_ok = std::abs(slope / 12.0 - 1.0) <= 0.2;
  return {worst < 1e-6 && compared > events.size() / 2 && fired && slope_ok,
          fmt("max rel diff %.3g over %zu points (< 1e-6); overflow %s at t=%.2f, condition_log slope %.3f (12 +- 20%%)",
              worst, compared, fired ? "fired" : "did not fire", unstable.last_stable_time, slope)};
}

Outcome ac10() {
  const auto params = mmhp::HawkesParams::make(vec({1.0014241, 0.5222101}), vec({1.0416288, 1.7255265}),
                                               vec({0.9996515, 0.5095281}), vec({0.8987939, 0.6821643}));
  const auto model = mmhp::ModelSpec::make(mmhp::RateMatrix::symmetric(2, 1e-7), params);
  const double horizon = 20000.0, regime_start = 12000.0, regime_end = 12500.0;
  const auto chain = mmhp::fixed_chain({regime_start, regime_end}, {0, 1, 0}, horizon);
  const auto events = mmhp::simulate_events_thinning(model, chain, horizon, 2010);
  const auto counts = mmhp::bin_counts(events, 0.0, 1.0, 20000);
  const auto result = mmhp::smooth_counts(model, counts);
  const auto states = mmhp::argmax_path(result.smoothed);

  std::size_t both = 0, flagged = 0, truth = 0, longest_false = 0, run = 0;
  for (std::size_t b = 0; b < counts.size(); ++b) {
    const bool in_regime = static_cast<double>(b) >= regime_start && static_cast<double>(b) < regime_end;
    const bool flag = states[b + 1] == 1;
    both += in_regime && flag ? 1 : 0;
    flagged += flag ? 1 : 0;
    truth += in_regime ? 1 : 0;
    run = flag && !in_regime ? run + 1 : 0;
    longest_false = std::max(longest_false, run);
  }
  const double jaccard = static_cast<double>(both) / static_cast<double>(flagged + truth - both);
  return {jaccard >= 0.5 && longest_false <= 50,
          fmt("Jaccard %.3f (>= 0.5), longest false regime %zu bins (<= 50), %zu events", jaccard, longest_false,
              events.size())};
}

Outcome ac11(const ShortPath& s) {
  mmhp::FilterOptions options;
  const auto grid = mmhp::uniform_grid(0.0, s.horizon, 0.1);
  auto run = [&](double h) {
    options.max_substep = h;
    return mmhp::filter_events(s.model, s.events, s.horizon, grid, options).path;
  };
  const double h = 0.02;
  const auto coarse = run(h);
  const auto fine = run(h / 2.0);
  const auto reference = run(h / 20.0);
  auto error = [&](const mmhp::PosteriorPath& p) {
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) worst = std::max(worst, std::abs(p.probs[i][0] - reference.probs[i][0]));
    return worst;
  };
  const double e1 = error(coarse), e2 = error(fine);
  return {e1 / e2 >= 1.5, fmt("error h=%.3g: %.3g, h=%.3g: %.3g, ratio %.2f (>= 1.5)", h, e1, h / 2.0, e2, e1 / e2)};
}

}  // namespace

int main(int argc, char** argv) {
  // --allow-fail <ID>: still reported as FAIL, excluded from the exit status.
  std::vector<std::string> allowed;
  for (int i = 1; i + 1 < argc; i += 2) {
    if (std::string(argv[i]) == "--allow-fail") allowed.emplace_back(argv[i + 1]);
  }
  const ShortPath short_path;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
      {"AC1 filter vs fine-grid HMM oracle", [&] { return ac1(short_path); }},
      {"AC2 smoother vs forward-backward oracle", [&] { return ac2(short_path); }},
      {"AC3 conservation of log<v,q>", [&] { return ac3(short_path); }},
      {"AC4 long-run rate 20", ac4},
      {"AC5 thinning vs branching", ac5},
      {"AC6 rate-matrix EM fixed point", ac6},
      {"AC7 calibration pattern", ac7},
      {"AC8 smoother beats filter", ac8},
      {"AC9 robust equivalence and instability", ac9},
      {"AC10 synthetic regime detection", ac10},
      {"AC11 self-convergence", [&] { return ac11(short_path); }},
  };
  int failures = 0;
  int blocking = 0;
  for (const auto& [name, check] : checks) {
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const std::string id = name.substr(0, name.find(' '));
    const bool tolerated = std::find(allowed.begin(), allowed.end(), id) != allowed.end();
    if (!outcome.pass) {
      ++failures;
      blocking += tolerated ? 0 : 1;
    }
    std::printf("%s %s: %s%s\n", outcome.pass ? "PASS" : "FAIL", name.c_str(), outcome.detail.c_str(),
                !outcome.pass && tolerated ? " [known failure]" : "");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed (%d not in the known-failure list)\n", failures, checks.size(), blocking);
  return blocking;
}
