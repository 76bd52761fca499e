#include "mmhp/filter.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mmhp/error.hpp"

namespace mmhp {

namespace {

Matrix interval_generator(const ModelSpec& model, const Vector& lambda, bool reference_terms) {
  Matrix g = model.rate_matrix.matrix();
  g.diagonal() -= lambda;
  if (reference_terms) g.diagonal().array() += 1.0;
  return g;
}

void check_positive(const Vector& lambda) {
  if (!((lambda.array() > 0.0).all())) {
    fail(ErrorCode::invalid_state, "intensity must be positive in every state");
  }
}

}  // namespace

double default_max_substep(const HawkesParams& params) {
  const double max_gamma = params.gamma.maxCoeff();
  return max_gamma > 0.0 ? std::min(0.1, 1.0 / max_gamma) : 0.1;
}

FilterState filter_init(const ModelSpec& model) {
  model.validate();
  return {0.0, model.q0, 0.0, IntensityState::initial(model.params)};
}

FilterState filter_step_interval(const ModelSpec& model, const FilterState& s, double dt,
                                 double max_substep, ForwardRecord* record, bool reference_terms) {
  if (!(dt > 0.0)) fail(ErrorCode::invalid_input, "filter_step_interval: dt must be positive");
  if (!(max_substep > 0.0)) fail(ErrorCode::invalid_input, "max_substep must be positive");
  const auto substeps = static_cast<std::size_t>(std::ceil(dt / max_substep - 1e-9));
  const double h = dt / static_cast<double>(std::max<std::size_t>(substeps, 1));
  FilterState out = s;
  for (std::size_t k = 0; k < std::max<std::size_t>(substeps, 1); ++k) {
    const Vector lambda = intensity_eval(out.kernel, model.params);
    const Vector q = mat_exp(interval_generator(model, lambda, reference_terms) * h) * out.p;
    double log_sum = 0.0;
    out.p = normalize_probability(q, log_sum);
    out.log_evidence += log_sum;
    out.kernel = intensity_decay(out.kernel, model.params, h);
    const double t_start = out.t;
    out.t = s.t + static_cast<double>(k + 1) * h;
    if (record != nullptr) {
      record->steps.push_back(
          {StepKind::interval, t_start, out.t - t_start, 0.0, lambda, out.p, out.log_evidence, false});
    }
  }
  out.t = s.t + dt;
  return out;
}

FilterState filter_step_jump(const ModelSpec& model, const FilterState& s, ForwardRecord* record) {
  const Vector lambda = intensity_eval(s.kernel, model.params);
  check_positive(lambda);
  FilterState out = s;
  double log_sum = 0.0;
  out.p = normalize_probability(lambda.cwiseProduct(s.p), log_sum);
  out.log_evidence += log_sum;
  out.kernel = intensity_jump(s.kernel, model.params);
  if (record != nullptr) {
    record->steps.push_back({StepKind::jump, s.t, 0.0, 1.0, lambda, out.p, out.log_evidence, false});
  }
  return out;
}

FilterState filter_step_bin(const ModelSpec& model, const FilterState& s, double dt, double count,
                            ForwardRecord* record, bool reference_terms) {
  if (!(dt > 0.0)) fail(ErrorCode::invalid_input, "filter_step_bin: dt must be positive");
  if (!(count >= 0.0)) fail(ErrorCode::invalid_input, "filter_step_bin: negative count");
  const Vector lambda = intensity_eval(s.kernel, model.params);
  check_positive(lambda);
  Matrix exponent = interval_generator(model, lambda, reference_terms) * dt;
  if (count > 0.0) exponent.diagonal() += count * lambda.array().log().matrix();
  FilterState out = s;
  double log_sum = 0.0;
  out.p = normalize_probability(mat_exp(exponent) * s.p, log_sum);
  out.log_evidence += log_sum;
  // The kernel update uses the bin's counts only after the exponent is formed.
  out.kernel = intensity_discrete_update(s.kernel, model.params, dt, count);
  out.t = s.t + dt;
  if (record != nullptr) {
    record->steps.push_back(
        {StepKind::bin, s.t, dt, count, lambda, out.p, out.log_evidence, true});
  }
  return out;
}

FilterResult filter_events(const ModelSpec& model, const EventTimes& events, double horizon,
                           const std::vector<double>& output_grid, const FilterOptions& options) {
  events.validate();
  if (!(horizon >= 0.0)) fail(ErrorCode::invalid_input, "horizon must be nonnegative");
  if (!events.times.empty() && events.times.back() > horizon) {
    fail(ErrorCode::invalid_input, "event after the horizon");
  }
  const double max_substep =
      options.max_substep > 0.0 ? options.max_substep : default_max_substep(model.params);

  // Stops are (time, is_event); grid points coinciding with an event merge into it.
  struct Stop {
    double t;
    bool event;
  };
  std::vector<Stop> stops;
  stops.reserve(events.size() + output_grid.size() + 1);
  for (double t : events.times) stops.push_back({t, true});
  for (double t : output_grid) {
    if (t > 0.0 && t <= horizon) stops.push_back({t, false});
  }
  stops.push_back({horizon, false});
  std::stable_sort(stops.begin(), stops.end(), [](const Stop& a, const Stop& b) {
    return a.t < b.t || (a.t == b.t && a.event && !b.event);
  });

  FilterResult result;
  FilterState state = filter_init(model);
  result.record.t0 = state.t;
  result.record.p0 = state.p;
  result.path.times.push_back(state.t);
  result.path.probs.push_back(state.p);

  stops.erase(std::unique(stops.begin(), stops.end(),
                          [](const Stop& a, const Stop& b) { return a.t == b.t; }),
              stops.end());

  for (const Stop& stop : stops) {
    if (stop.t > state.t) {
      state = filter_step_interval(model, state, stop.t - state.t, max_substep, &result.record,
                                   options.reference_terms);
      state.t = stop.t;
    }
    if (stop.event) state = filter_step_jump(model, state, &result.record);
    if (result.record.steps.empty() || result.record.steps.back().output) continue;
    result.record.steps.back().output = true;
    result.path.times.push_back(stop.t);
    result.path.probs.push_back(state.p);
  }
  result.path.log_evidence = state.log_evidence;
  return result;
}

FilterResult filter_counts(const ModelSpec& model, const CountSeries& counts,
                           const FilterOptions& options) {
  counts.validate();
  FilterResult result;
  FilterState state = filter_init(model);
  state.t = counts.t0;
  state.kernel.t = counts.t0;
  result.record.t0 = state.t;
  result.record.p0 = state.p;
  result.path.times.push_back(state.t);
  result.path.probs.push_back(state.p);
  result.path.times.reserve(counts.size() + 1);
  result.path.probs.reserve(counts.size() + 1);
  result.record.steps.reserve(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    state = filter_step_bin(model, state, counts.dt, counts.counts[i], &result.record,
                            options.reference_terms);
    state.t = counts.bin_end(i);
    result.path.times.push_back(state.t);
    result.path.probs.push_back(state.p);
  }
  result.path.log_evidence = state.log_evidence;
  return result;
}

Vector predict(const Vector& p, const RateMatrix& a, double s) {
  if (!(s >= 0.0)) fail(ErrorCode::invalid_input, "predict: horizon must be nonnegative");
  if (static_cast<std::size_t>(p.size()) != a.size()) {
    fail(ErrorCode::invalid_input, "predict: dimension mismatch");
  }
  if (s == 0.0) return p;
  return normalize_probability(mat_exp(a.matrix() * s) * p);
}

std::vector<double> uniform_grid(double t0, double t1, double step) {
  if (!(step > 0.0)) fail(ErrorCode::invalid_input, "grid step must be positive");
  std::vector<double> grid;
  const auto n = static_cast<std::size_t>(std::floor((t1 - t0) / step + 1e-9));
  grid.reserve(n + 1);
  for (std::size_t i = 0; i <= n; ++i) grid.push_back(t0 + static_cast<double>(i) * step);
  return grid;
}

}  // namespace mmhp
