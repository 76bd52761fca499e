#include "mmhp/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <utility>

#include "mmhp/error.hpp"

namespace mmhp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30U)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27U)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31U);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : engine_(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL))) {}

double Rng::uniform() {
  return (static_cast<double>(engine_() >> 11U) + 0.5) * 0x1.0p-53;
}

double Rng::exponential(double rate) { return -std::log(uniform()) / rate; }

std::size_t Rng::categorical(const Vector& weights) {
  const double total = weights.sum();
  double target = uniform() * total;
  std::size_t last_positive = 0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = static_cast<std::size_t>(i);
    if (target < weights[i]) return last_positive;
    target -= weights[i];
  }
  return last_positive;
}

std::size_t ChainPath::state_at(double t) const {
  const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  return states[static_cast<std::size_t>(it - jump_times.begin())];
}

std::size_t ChainPath::state_before(double t) const {
  const auto it = std::lower_bound(jump_times.begin(), jump_times.end(), t);
  return states[static_cast<std::size_t>(it - jump_times.begin())];
}

void ChainPath::validate() const {
  if (states.size() != jump_times.size() + 1) {
    fail(ErrorCode::invalid_input, "chain path needs one more state than jump times");
  }
  for (std::size_t k = 0; k < jump_times.size(); ++k) {
    if (!(jump_times[k] > (k == 0 ? 0.0 : jump_times[k - 1]))) {
      fail(ErrorCode::invalid_input, "chain jump times must be strictly increasing and positive");
    }
    if (states[k] == states[k + 1]) {
      fail(ErrorCode::invalid_input, "consecutive chain states must differ");
    }
  }
}

void EventTimes::validate() const {
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!std::isfinite(times[k]) || !(times[k] > (k == 0 ? 0.0 : times[k - 1]))) {
      fail(ErrorCode::invalid_input,
           "event times must be positive and strictly increasing (event " + std::to_string(k + 1) + ")");
    }
  }
}

void CountSeries::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt) || !std::isfinite(t0)) {
    fail(ErrorCode::invalid_input, "count series needs a positive bin width");
  }
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (!(counts[i] >= 0.0) || !std::isfinite(counts[i])) {
      fail(ErrorCode::invalid_input, "count " + std::to_string(i + 1) + " is negative or non-finite");
    }
  }
}

ChainPath simulate_chain(const RateMatrix& a, std::size_t x0, double horizon, std::uint64_t seed) {
  if (x0 >= a.size()) fail(ErrorCode::invalid_input, "initial state out of range");
  if (!(horizon >= 0.0)) fail(ErrorCode::invalid_input, "horizon must be nonnegative");
  Rng rng(seed, 0);
  ChainPath path;
  path.horizon = horizon;
  path.states.push_back(x0);
  std::size_t state = x0;
  double t = 0.0;
  for (;;) {
    const double rate = a.exit_rate(state);
    if (rate <= 0.0) break;  // absorbing
    t += rng.exponential(rate);
    if (t >= horizon) break;
    Vector weights = a.matrix().col(static_cast<Eigen::Index>(state));
    weights[static_cast<Eigen::Index>(state)] = 0.0;
    state = rng.categorical(weights);
    path.jump_times.push_back(t);
    path.states.push_back(state);
  }
  return path;
}

ChainPath simulate_chain(const RateMatrix& a, const Vector& q0, double horizon, std::uint64_t seed) {
  if (static_cast<std::size_t>(q0.size()) != a.size()) {
    fail(ErrorCode::invalid_input, "initial law has the wrong dimension");
  }
  // Stream id past any segment stream so the initial draw is independent.
  Rng rng(seed, ~std::uint64_t{0});
  return simulate_chain(a, rng.categorical(q0), horizon, seed);
}

ChainPath fixed_chain(std::vector<double> jump_times, std::vector<std::size_t> states,
                      double horizon) {
  ChainPath path{std::move(jump_times), std::move(states), horizon};
  path.validate();
  if (!path.jump_times.empty() && path.jump_times.back() >= horizon) {
    fail(ErrorCode::invalid_input, "chain jump beyond the horizon");
  }
  return path;
}

EventTimes simulate_events_thinning(const ModelSpec& model, const ChainPath& chain, double horizon,
                                    std::uint64_t seed) {
  const auto& params = model.params;
  EventTimes events;
  IntensityState kernel = IntensityState::initial(params);
  for (std::size_t seg = 0; seg < chain.num_segments(); ++seg) {
    const double start = chain.segment_start(seg);
    const double end = std::min(chain.segment_end(seg), horizon);
    if (start >= end) break;
    const auto state = static_cast<Eigen::Index>(chain.states[seg]);
    Rng rng(seed, seg + 1);
    double t = start;
    for (;;) {
      const double bound = intensity_eval(kernel, params)[state];
      const double candidate = t + rng.exponential(bound);
      if (candidate > end) {
        kernel = intensity_decay(kernel, params, end - t);
        break;
      }
      kernel = intensity_decay(kernel, params, candidate - t);
      t = candidate;
      const double rate = intensity_eval(kernel, params)[state];
      if (rng.uniform() * bound <= rate) {
        events.times.push_back(t);
        kernel = intensity_jump(kernel, params);
      }
    }
  }
  return events;
}

std::vector<double> draw_offspring_delays(double beta, double gamma, Rng& rng) {
  std::vector<double> delays;
  if (beta <= 0.0) return delays;
  const double total = beta / gamma;
  double mass = 0.0;
  for (;;) {
    mass += rng.exponential(1.0);
    if (mass >= total) break;
    delays.push_back(-std::log1p(-mass / total) / gamma);
  }
  return delays;
}

EventTimes simulate_events_branching(const ModelSpec& model, const ChainPath& chain, double horizon,
                                     std::uint64_t seed, BranchingStats* stats) {
  const auto& params = model.params;
  if (!params.linear()) {
    fail(ErrorCode::unsupported, "branching sampler requires zeta = 1");
  }
  EventTimes events;
  BranchingStats counted;
  for (std::size_t seg = 0; seg < chain.num_segments(); ++seg) {
    const double start = chain.segment_start(seg);
    const double end = std::min(chain.segment_end(seg), horizon);
    if (start >= end) break;
    const auto state = static_cast<Eigen::Index>(chain.states[seg]);
    const double alpha = params.alpha[state];
    const double beta = params.beta[state];
    const double gamma = params.gamma[state];
    if (beta > 0.0 && !(beta < gamma)) {
      fail(ErrorCode::non_stationary, "branching sampler requires beta < gamma");
    }
    Rng rng(seed, seg + 1);
    std::vector<double> segment_events;
    for (double t = start + rng.exponential(alpha); t < end; t += rng.exponential(alpha)) {
      segment_events.push_back(t);
    }
    counted.immigrants += segment_events.size();
    std::deque<double> parents(segment_events.begin(), segment_events.end());
    while (!parents.empty()) {
      const double parent = parents.front();
      parents.pop_front();
      for (double delay : draw_offspring_delays(beta, gamma, rng)) {
        const double child = parent + delay;
        if (child >= end) continue;
        segment_events.push_back(child);
        parents.push_back(child);
        ++counted.offspring;
      }
    }
    std::sort(segment_events.begin(), segment_events.end());
    events.times.insert(events.times.end(), segment_events.begin(), segment_events.end());
  }
  if (stats != nullptr) *stats = counted;
  return events;
}

CountSeries bin_counts(const EventTimes& events, double t0, double dt, std::size_t n_bins) {
  if (!(dt > 0.0)) fail(ErrorCode::invalid_input, "bin width must be positive");
  CountSeries series{t0, dt, std::vector<double>(n_bins, 0.0)};
  for (double t : events.times) {
    const double index = std::ceil((t - t0) / dt) - 1.0;
    if (index >= 0.0 && index < static_cast<double>(n_bins)) {
      series.counts[static_cast<std::size_t>(index)] += 1.0;
    }
  }
  return series;
}

}  // namespace mmhp
