#pragma once

#include <cstddef>
#include <vector>

#include "mmhp/model.hpp"
#include "mmhp/simulate.hpp"

namespace mmhp {

/// Normalized filter. The unnormalized density is q_t = exp(log_evidence) * p.
struct FilterState {
  double t = 0.0;
  Vector p;
  double log_evidence = 0.0;
  IntensityState kernel;
};

struct PosteriorPath {
  std::vector<double> times;
  std::vector<Vector> probs;
  double log_evidence = 0.0;

  [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
};

enum class StepKind { interval, jump, bin };

/// One forward computation step, with everything the backward pass needs.
struct ForwardStep {
  StepKind kind = StepKind::interval;
  double t_start = 0.0;
  double dt = 0.0;      // zero for jumps
  double count = 0.0;   // bins only
  Vector lambda;        // intensity at step start (left limit for jumps)
  Vector p_after;
  double log_evidence_after = 0.0;
  bool output = false;  // posterior at the step end is part of the output path

  [[nodiscard]] double t_end() const noexcept { return t_start + dt; }
};

struct ForwardRecord {
  double t0 = 0.0;
  Vector p0;
  std::vector<ForwardStep> steps;
};

struct FilterOptions {
  /// Longest exponential-integrator substep; <= 0 selects min(0.1, 1 / max gamma).
  double max_substep = 0.0;
  /// Keep the +I and -dt scalar terms of the reference-measure recursion.
  /// They cancel under normalization; dropping them only shifts log_evidence.
  bool reference_terms = true;
};

struct FilterResult {
  PosteriorPath path;
  ForwardRecord record;
};

[[nodiscard]] double default_max_substep(const HawkesParams& params);

[[nodiscard]] FilterState filter_init(const ModelSpec& model);

/// Advances over an event-free interval of length dt in substeps of at most
/// max_substep, freezing the intensity at each substep start.
[[nodiscard]] FilterState filter_step_interval(const ModelSpec& model, const FilterState& s,
                                               double dt, double max_substep,
                                               ForwardRecord* record = nullptr,
                                               bool reference_terms = true);

/// Applies an observed event at s.t: p <- normalize(diag(lambda(t-)) p), then
/// the kernel jumps.
[[nodiscard]] FilterState filter_step_jump(const ModelSpec& model, const FilterState& s,
                                           ForwardRecord* record = nullptr);

/// One bin of width dt holding `count` events, as a single combined exponential
/// exp((A - diag(lambda) + I) dt + count * diag(log lambda)).
[[nodiscard]] FilterState filter_step_bin(const ModelSpec& model, const FilterState& s, double dt,
                                          double count, ForwardRecord* record = nullptr,
                                          bool reference_terms = true);

/// Continuous-observation filter. The path starts at t = 0 and holds the
/// posterior at every grid time in ]0, horizon], every event time (after the
/// event), and the horizon.
[[nodiscard]] FilterResult filter_events(const ModelSpec& model, const EventTimes& events,
                                         double horizon, const std::vector<double>& output_grid,
                                         const FilterOptions& options = {});

/// Discrete-count filter; the path holds t0 and every bin end.
[[nodiscard]] FilterResult filter_counts(const ModelSpec& model, const CountSeries& counts,
                                         const FilterOptions& options = {});

/// exp(A s) p.
[[nodiscard]] Vector predict(const Vector& p, const RateMatrix& a, double s);

/// t0, t0 + step, ... up to and including the last point <= t1 (+ roundoff).
[[nodiscard]] std::vector<double> uniform_grid(double t0, double t1, double step);

}  // namespace mmhp
