#pragma once

#include <cstddef>
#include <vector>

#include "mmhp/filter.hpp"

namespace mmhp {

/// Backward vector v_t, kept normalized to sum 1. log_scale accumulates the
/// discarded normalizers so that v_t = exp(log_scale) * w.
struct SmootherState {
  double t = 0.0;
  Vector w;
  double log_scale = 0.0;
};

[[nodiscard]] SmootherState smoother_init(std::size_t n, double horizon = 0.0);

/// w <- normalize(exp((A^T - diag(lambda) + I) dt) w).
[[nodiscard]] SmootherState smoother_step_interval_backward(const SmootherState& s,
                                                            const RateMatrix& a, double dt,
                                                            const Vector& lambda_at_start,
                                                            bool reference_terms = true);

/// w <- normalize(diag(lambda) w), lambda taken at the event's left limit.
[[nodiscard]] SmootherState smoother_step_jump_backward(const SmootherState& s,
                                                        const Vector& lambda_at_jump);

/// w <- normalize(exp((A^T - diag(lambda) + I) dt + count diag(log lambda)) w).
[[nodiscard]] SmootherState smoother_step_bin_backward(const SmootherState& s, const RateMatrix& a,
                                                       double dt, double count,
                                                       const Vector& lambda_at_start,
                                                       bool reference_terms = true);

/// normalize(filter_p .* w).
[[nodiscard]] Vector smooth_combine(const Vector& filter_p, const Vector& w);

struct SmoothOptions {
  bool reference_terms = true;
  /// If set, receives log<v_t, q_t> of the unnormalized recursions, running
  /// backwards in time: one entry per forward step end, then one for the
  /// initial time. Constant up to roundoff.
  std::vector<double>* log_inner_product = nullptr;
};

/// Replays a forward record in reverse and returns the smoothed path at the
/// same times as the filter's output path.
[[nodiscard]] PosteriorPath smooth_backward(const ModelSpec& model, const ForwardRecord& forward,
                                            const SmoothOptions& options = {});

/// Backward sweep for the discrete-count filter; checks that the record was
/// produced from these counts.
[[nodiscard]] PosteriorPath smooth_counts_backward(const ModelSpec& model, const CountSeries& counts,
                                                   const ForwardRecord& forward,
                                                   const SmoothOptions& options = {});

struct FilterSmootherResult {
  PosteriorPath filtered;
  PosteriorPath smoothed;
};

[[nodiscard]] FilterSmootherResult smooth_events(const ModelSpec& model, const EventTimes& events,
                                                 double horizon,
                                                 const std::vector<double>& output_grid,
                                                 const FilterOptions& options = {});
[[nodiscard]] FilterSmootherResult smooth_counts(const ModelSpec& model, const CountSeries& counts,
                                                 const FilterOptions& options = {});

}  // namespace mmhp
