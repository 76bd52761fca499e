#include "mmhp/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mmhp/error.hpp"

namespace mmhp {

namespace {

SmootherState rescaled(const SmootherState& s, const Vector& w, double dt) {
  double log_sum = 0.0;
  SmootherState out{s.t - dt, normalize_probability(w, log_sum), s.log_scale};
  out.log_scale += log_sum;
  return out;
}

Matrix backward_generator(const RateMatrix& a, const Vector& lambda, bool reference_terms) {
  Matrix g = a.matrix().transpose();
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

SmootherState smoother_init(std::size_t n, double horizon) {
  if (n == 0) fail(ErrorCode::invalid_input, "smoother_init: no states");
  return {horizon, uniform_distribution(n), std::log(static_cast<double>(n))};
}

SmootherState smoother_step_interval_backward(const SmootherState& s, const RateMatrix& a, double dt,
                                              const Vector& lambda_at_start, bool reference_terms) {
  if (!(dt > 0.0)) fail(ErrorCode::invalid_input, "backward interval step needs dt > 0");
  return rescaled(s, mat_exp(backward_generator(a, lambda_at_start, reference_terms) * dt) * s.w, dt);
}

SmootherState smoother_step_jump_backward(const SmootherState& s, const Vector& lambda_at_jump) {
  check_positive(lambda_at_jump);
  return rescaled(s, lambda_at_jump.cwiseProduct(s.w), 0.0);
}

SmootherState smoother_step_bin_backward(const SmootherState& s, const RateMatrix& a, double dt,
                                         double count, const Vector& lambda_at_start,
                                         bool reference_terms) {
  if (!(dt > 0.0)) fail(ErrorCode::invalid_input, "backward bin step needs dt > 0");
  check_positive(lambda_at_start);
  Matrix exponent = backward_generator(a, lambda_at_start, reference_terms) * dt;
  if (count > 0.0) exponent.diagonal() += count * lambda_at_start.array().log().matrix();
  return rescaled(s, mat_exp(exponent) * s.w, dt);
}

Vector smooth_combine(const Vector& filter_p, const Vector& w) {
  if (filter_p.size() != w.size()) {
    fail(ErrorCode::invalid_input, "smooth_combine: dimension mismatch");
  }
  const Vector product = filter_p.cwiseProduct(w);
  if (!(product.sum() > 0.0)) {
    fail(ErrorCode::degenerate_posterior, "smooth_combine: filter and backward vectors have no overlap");
  }
  return normalize_probability(product);
}

PosteriorPath smooth_backward(const ModelSpec& model, const ForwardRecord& forward,
                              const SmoothOptions& options) {
  const auto n = model.size();
  const auto& steps = forward.steps;
  if (static_cast<std::size_t>(forward.p0.size()) != n) {
    fail(ErrorCode::invalid_input, "forward record does not match the model dimension");
  }
  const double horizon = steps.empty() ? forward.t0 : steps.back().t_end();
  SmootherState state = smoother_init(n, horizon);

  std::vector<double> times;
  std::vector<Vector> probs;
  auto log_inner = [&](const Vector& p, double log_evidence) {
    return std::log(p.dot(state.w)) + log_evidence + state.log_scale;
  };
  if (options.log_inner_product != nullptr) options.log_inner_product->clear();

  for (std::size_t k = steps.size(); k-- > 0;) {
    const ForwardStep& step = steps[k];
    if (static_cast<std::size_t>(step.lambda.size()) != n) {
      fail(ErrorCode::invalid_input, "forward record step has the wrong dimension");
    }
    if (step.output) {
      times.push_back(step.t_end());
      probs.push_back(smooth_combine(step.p_after, state.w));
    }
    if (options.log_inner_product != nullptr) {
      options.log_inner_product->push_back(log_inner(step.p_after, step.log_evidence_after));
    }
    switch (step.kind) {
      case StepKind::interval:
        state = smoother_step_interval_backward(state, model.rate_matrix, step.dt, step.lambda,
                                                options.reference_terms);
        break;
      case StepKind::jump:
        state = smoother_step_jump_backward(state, step.lambda);
        break;
      case StepKind::bin:
        state = smoother_step_bin_backward(state, model.rate_matrix, step.dt, step.count,
                                           step.lambda, options.reference_terms);
        break;
    }
  }
  times.push_back(forward.t0);
  probs.push_back(smooth_combine(forward.p0, state.w));
  if (options.log_inner_product != nullptr) {
    options.log_inner_product->push_back(log_inner(forward.p0, 0.0));
  }

  std::reverse(times.begin(), times.end());
  std::reverse(probs.begin(), probs.end());
  PosteriorPath path{std::move(times), std::move(probs), 0.0};
  if (!steps.empty()) path.log_evidence = steps.back().log_evidence_after;
  return path;
}

PosteriorPath smooth_counts_backward(const ModelSpec& model, const CountSeries& counts,
                                     const ForwardRecord& forward, const SmoothOptions& options) {
  if (forward.steps.size() != counts.size()) {
    fail(ErrorCode::invalid_input, "forward record has " + std::to_string(forward.steps.size()) +
                                       " steps for " + std::to_string(counts.size()) + " bins");
  }
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const ForwardStep& step = forward.steps[i];
    if (step.kind != StepKind::bin || step.count != counts.counts[i] ||
        std::abs(step.dt - counts.dt) > 1e-12 * counts.dt) {
      fail(ErrorCode::invalid_input,
           "forward record does not match the counts at bin " + std::to_string(i + 1));
    }
  }
  return smooth_backward(model, forward, options);
}

FilterSmootherResult smooth_events(const ModelSpec& model, const EventTimes& events, double horizon,
                                   const std::vector<double>& output_grid,
                                   const FilterOptions& options) {
  FilterResult forward = filter_events(model, events, horizon, output_grid, options);
  SmoothOptions smooth_options;
  smooth_options.reference_terms = options.reference_terms;
  PosteriorPath smoothed = smooth_backward(model, forward.record, smooth_options);
  return {std::move(forward.path), std::move(smoothed)};
}

FilterSmootherResult smooth_counts(const ModelSpec& model, const CountSeries& counts,
                                   const FilterOptions& options) {
  FilterResult forward = filter_counts(model, counts, options);
  SmoothOptions smooth_options;
  smooth_options.reference_terms = options.reference_terms;
  PosteriorPath smoothed = smooth_counts_backward(model, counts, forward.record, smooth_options);
  return {std::move(forward.path), std::move(smoothed)};
}

}  // namespace mmhp
