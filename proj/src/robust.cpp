#include "mmhp/robust.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mmhp {

namespace {

Vector log_gamma_at(const GammaProcess& g, const Vector& lambda, double u) {
  return g.log_gamma - (lambda.array() - 1.0).matrix() * u;
}

[[noreturn]] void overflow(const GammaProcess& g, double worst_log, double overflow_log) {
  std::ostringstream msg;
  msg << "robust recursion overflow at t=" << g.t << ": coefficient exp(" << worst_log
      << ") exceeds exp(" << overflow_log << "), condition_log=" << g.condition_log();
  throw InstabilityError(msg.str(), g.condition_log(), g.t);
}

// Entry (i, j) is a(i, j) exp(log_gamma_j - log_gamma_i) when forward, and
// a(j, i) exp(log_gamma_i - log_gamma_j) (Gamma A^T Gamma^{-1}) when backward.
Matrix conjugated(const Matrix& a, const Vector& lg, bool backward, double overflow_log,
                  double& worst_log) {
  const auto n = a.rows();
  Matrix c = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double rate = backward ? a(j, i) : a(i, j);
      if (rate == 0.0) continue;
      if (i == j) {
        c(i, j) = rate;
        continue;
      }
      const double log_entry = std::log(std::abs(rate)) + (backward ? lg[i] - lg[j] : lg[j] - lg[i]);
      worst_log = std::max(worst_log, log_entry);
      if (log_entry > overflow_log) return c;
      c(i, j) = rate * std::exp(backward ? lg[i] - lg[j] : lg[j] - lg[i]);
    }
  }
  return c;
}

template <typename Rhs>
Vector rk4(const Vector& x, double h, Rhs&& rhs) {
  const Vector k1 = rhs(0.0, x);
  const Vector k2 = rhs(0.5 * h, x + 0.5 * h * k1);
  const Vector k3 = rhs(0.5 * h, x + 0.5 * h * k2);
  const Vector k4 = rhs(h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

RobustState step(const RobustState& s, const GammaProcess& g, const RateMatrix& a,
                 const Vector& lambda, double dt, double overflow_log, bool backward) {
  if (!(dt > 0.0)) fail(ErrorCode::invalid_input, "robust step needs dt > 0");
  // Coefficients are monotone in time within a step; checking both ends suffices.
  double worst_log = -std::numeric_limits<double>::infinity();
  for (double u : {0.0, dt}) {
    (void)conjugated(a.matrix(), log_gamma_at(g, lambda, u), backward, overflow_log, worst_log);
  }
  if (worst_log > overflow_log) overflow(g, worst_log, overflow_log);

  auto coefficient = [&](double u) {
    double ignored = -std::numeric_limits<double>::infinity();
    return conjugated(a.matrix(), log_gamma_at(g, lambda, u), backward, overflow_log, ignored);
  };
  RobustState out = s;
  if (!backward) {
    out.qbar = rk4(s.qbar, dt, [&](double u, const Vector& x) { return Vector(coefficient(u) * x); });
    out.t = g.t + dt;
  } else {
    // Integrate in reversed time tau = dt - u, where dvbar/dtau = +C(u) vbar.
    out.vbar = rk4(s.vbar, dt,
                   [&](double tau, const Vector& x) { return Vector(coefficient(dt - tau) * x); });
    out.t = g.t;
  }
  out.condition_log = gamma_update(g, dt, lambda).condition_log();
  return out;
}

}  // namespace

GammaProcess gamma_update(const GammaProcess& g, double dt, const Vector& lambda_at_start) {
  if (!((lambda_at_start.array() > 0.0).all())) {
    fail(ErrorCode::invalid_state, "gamma_update: intensity must be positive");
  }
  return {g.t + dt, log_gamma_at(g, lambda_at_start, dt)};
}

GammaProcess gamma_jump(const GammaProcess& g, const Vector& lambda_at_jump) {
  if (!((lambda_at_jump.array() > 0.0).all())) {
    fail(ErrorCode::invalid_state, "gamma_jump: intensity must be positive");
  }
  return {g.t, g.log_gamma + lambda_at_jump.array().log().matrix()};
}

RobustState robust_filter_step(const RobustState& s, const GammaProcess& g, const RateMatrix& a,
                               const Vector& lambda_at_start, double dt, double overflow_log) {
  return step(s, g, a, lambda_at_start, dt, overflow_log, false);
}

RobustState robust_smoother_step(const RobustState& s, const GammaProcess& g, const RateMatrix& a,
                                 const Vector& lambda_at_start, double dt, double overflow_log) {
  return step(s, g, a, lambda_at_start, dt, overflow_log, true);
}

namespace {

struct RobustForwardStep {
  GammaProcess g_start;
  Vector lambda;
  double dt;
  Vector qbar_after;
  std::vector<std::size_t> samples;
};

RobustSample make_sample(const RobustState& s, const GammaProcess& g) {
  RobustSample sample;
  sample.t = g.t;
  sample.condition_log = g.condition_log();
  sample.max_abs_qbar = s.qbar.cwiseAbs().maxCoeff();
  sample.log_q = g.log_gamma + s.qbar.array().log().matrix();
  return sample;
}

// Shared forward sweep; returns false on overflow when `tolerate_overflow`.
RobustRun run_forward(const ModelSpec& model, const EventTimes& events, double horizon,
                      const RobustOptions& options, bool tolerate_overflow,
                      std::vector<RobustForwardStep>* steps, RobustState& state,
                      GammaProcess& gamma) {
  model.validate();
  events.validate();
  if (!(options.substep > 0.0) || !(options.sample_every > 0.0)) {
    fail(ErrorCode::invalid_input, "robust options need positive substep and sampling interval");
  }
  if (!events.times.empty() && events.times.back() > horizon) {
    fail(ErrorCode::invalid_input, "event after the horizon");
  }
  RobustRun run;
  const auto n = model.size();
  IntensityState kernel = IntensityState::initial(model.params);
  gamma = GammaProcess::identity(n);
  state = {0.0, model.q0, Vector::Ones(static_cast<Eigen::Index>(n)), 0.0};
  run.samples.push_back(make_sample(state, gamma));
  double next_sample = options.sample_every;

  std::vector<double> stops = events.times;
  stops.push_back(horizon);
  for (std::size_t k = 0; k < stops.size(); ++k) {
    const double stop = stops[k];
    const bool is_event = k + 1 < stops.size();
    const double length = stop - gamma.t;
    if (length > 0.0) {
      const auto m = static_cast<std::size_t>(std::max(1.0, std::ceil(length / options.substep - 1e-9)));
      const double h = length / static_cast<double>(m);
      for (std::size_t j = 0; j < m; ++j) {
        const Vector lambda = intensity_eval(kernel, model.params);
        try {
          state = robust_filter_step(state, gamma, model.rate_matrix, lambda, h, options.overflow_log);
        } catch (const InstabilityError& e) {
          if (!tolerate_overflow) throw;
          run.overflowed = true;
          run.last_stable_time = e.last_stable_time();
          run.overflow_condition_log = e.condition_log();
          return run;
        }
        const GammaProcess g_start = gamma;
        gamma = gamma_update(gamma, h, lambda);
        kernel = intensity_decay(kernel, model.params, h);
        if (j + 1 == m) gamma.t = stop;
        state.t = gamma.t;
        std::vector<std::size_t> sample_index;
        if (gamma.t >= next_sample - 1e-12 || (j + 1 == m && !is_event)) {
          run.samples.push_back(make_sample(state, gamma));
          sample_index.push_back(run.samples.size() - 1);
          while (next_sample <= gamma.t + 1e-12) next_sample += options.sample_every;
        }
        if (steps != nullptr) steps->push_back({g_start, lambda, h, state.qbar, sample_index});
      }
    }
    if (is_event) {
      gamma = gamma_jump(gamma, intensity_eval(kernel, model.params));
      kernel = intensity_jump(kernel, model.params);
      run.samples.push_back(make_sample(state, gamma));
      // qbar is continuous across the event, so the sample pairs with the last step.
      if (steps != nullptr && !steps->empty()) steps->back().samples.push_back(run.samples.size() - 1);
    }
  }
  run.last_stable_time = gamma.t;
  return run;
}

}  // namespace

RobustRun robust_filter_events(const ModelSpec& model, const EventTimes& events, double horizon,
                               const RobustOptions& options) {
  RobustState state;
  GammaProcess gamma;
  return run_forward(model, events, horizon, options, true, nullptr, state, gamma);
}

RobustRun robust_smooth_events(const ModelSpec& model, const EventTimes& events, double horizon,
                               const RobustOptions& options) {
  RobustState state;
  GammaProcess gamma;
  std::vector<RobustForwardStep> steps;
  RobustRun run = run_forward(model, events, horizon, options, false, &steps, state, gamma);

  // Terminal condition vbar_T = Gamma_T 1.
  state.vbar = gamma.log_gamma.array().exp().matrix();
  for (std::size_t k = steps.size(); k-- > 0;) {
    const RobustForwardStep& s = steps[k];
    for (std::size_t index : s.samples) run.samples[index].inner_product = s.qbar_after.dot(state.vbar);
    state = robust_smoother_step(state, s.g_start, model.rate_matrix, s.lambda, s.dt,
                                 options.overflow_log);
  }
  run.samples.front().inner_product = model.q0.dot(state.vbar);
  return run;
}

}  // namespace mmhp
