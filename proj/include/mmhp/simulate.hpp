#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "mmhp/model.hpp"

namespace mmhp {

/// Seeded generator with platform-independent uniform and exponential draws
/// (std distributions are implementation-defined, so they are not used).
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Uniform on the open interval (0, 1).
  double uniform();
  double exponential(double rate);
  /// Index drawn with probability proportional to weights.
  std::size_t categorical(const Vector& weights);

 private:
  std::mt19937_64 engine_;
};

/// Piecewise-constant right-continuous path: states[0] holds on
/// [0, jump_times[0]), states[k] on [jump_times[k-1], jump_times[k]).
struct ChainPath {
  std::vector<double> jump_times;
  std::vector<std::size_t> states;
  double horizon = 0.0;

  [[nodiscard]] std::size_t state_at(double t) const;
  /// State just before t (the one driving the intensity at an event at t).
  [[nodiscard]] std::size_t state_before(double t) const;
  [[nodiscard]] std::size_t num_segments() const noexcept { return states.size(); }
  [[nodiscard]] double segment_start(std::size_t k) const { return k == 0 ? 0.0 : jump_times[k - 1]; }
  [[nodiscard]] double segment_end(std::size_t k) const {
    return k < jump_times.size() ? jump_times[k] : horizon;
  }
  void validate() const;
};

/// Strictly increasing event times in ]0, T].
struct EventTimes {
  std::vector<double> times;

  [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
  void validate() const;
};

/// Counts on the bins ]t0 + i dt, t0 + (i+1) dt]. Counts may be real-valued
/// after rescaling.
struct CountSeries {
  double t0 = 0.0;
  double dt = 1.0;
  std::vector<double> counts;

  [[nodiscard]] std::size_t size() const noexcept { return counts.size(); }
  [[nodiscard]] double bin_end(std::size_t i) const { return t0 + static_cast<double>(i + 1) * dt; }
  [[nodiscard]] double horizon() const { return bin_end(counts.size() - 1); }
  void validate() const;
};

[[nodiscard]] ChainPath simulate_chain(const RateMatrix& a, std::size_t x0, double horizon,
                                       std::uint64_t seed);
/// Initial state drawn from the law q0.
[[nodiscard]] ChainPath simulate_chain(const RateMatrix& a, const Vector& q0, double horizon,
                                       std::uint64_t seed);

/// Chain path that switches at the given times through the given states.
[[nodiscard]] ChainPath fixed_chain(std::vector<double> jump_times, std::vector<std::size_t> states,
                                    double horizon);

/// Ogata thinning. Within a chain segment the intensity of the active state
/// is non-increasing between events (the kernel relaxes down towards alpha
/// and t -> t^zeta is increasing), so the current intensity is a valid
/// dominating rate. The kernel of every state is carried across chain jumps.
[[nodiscard]] EventTimes simulate_events_thinning(const ModelSpec& model, const ChainPath& chain,
                                                  double horizon, std::uint64_t seed);

struct BranchingStats {
  std::size_t immigrants = 0;
  std::size_t offspring = 0;
};

/// Cluster sampler: per chain segment, rate-alpha immigrants each spawning
/// offspring from rate beta e^{-gamma u}. Offspring beyond the segment end are
/// dropped and no excitation crosses segment boundaries (edge effects ignored).
[[nodiscard]] EventTimes simulate_events_branching(const ModelSpec& model, const ChainPath& chain,
                                                   double horizon, std::uint64_t seed,
                                                   BranchingStats* stats = nullptr);

/// Delays of the direct offspring of one event: points of an inhomogeneous
/// Poisson process with rate beta e^{-gamma u} on ]0, inf[. Requires gamma > 0.
[[nodiscard]] std::vector<double> draw_offspring_delays(double beta, double gamma, Rng& rng);

[[nodiscard]] CountSeries bin_counts(const EventTimes& events, double t0, double dt,
                                     std::size_t n_bins);

}  // namespace mmhp
