#pragma once

#include <cstddef>
#include <vector>

#include "mmhp/model.hpp"
#include "mmhp/error.hpp"
#include "mmhp/simulate.hpp"

namespace mmhp {

/// Diagonal gauge process Gamma_t = exp(-int (Lambda - I) ds) * prod Lambda^{dY},
/// stored as the logs of its diagonal.
struct GammaProcess {
  double t = 0.0;
  Vector log_gamma;

  [[nodiscard]] static GammaProcess identity(std::size_t n, double t0 = 0.0) {
    return {t0, Vector::Zero(static_cast<Eigen::Index>(n))};
  }
  /// max_i log gamma_i - min_i log gamma_i.
  [[nodiscard]] double condition_log() const {
    return log_gamma.maxCoeff() - log_gamma.minCoeff();
  }
};

struct RobustState {
  double t = 0.0;
  Vector qbar;
  Vector vbar;
  double condition_log = 0.0;
};

inline constexpr double kDefaultOverflowLog = 300.0;

/// Thrown when a coefficient of the gauge-transformed system exceeds
/// exp(overflow_log).
class InstabilityError : public Error {
 public:
  InstabilityError(const std::string& message, double condition_log, double last_stable_time)
      : Error(ErrorCode::instability, message),
        condition_log_(condition_log),
        last_stable_time_(last_stable_time) {}

  [[nodiscard]] double condition_log() const noexcept { return condition_log_; }
  [[nodiscard]] double last_stable_time() const noexcept { return last_stable_time_; }

 private:
  double condition_log_;
  double last_stable_time_;
};

/// log gamma_i -= (lambda_i - 1) dt.
[[nodiscard]] GammaProcess gamma_update(const GammaProcess& g, double dt,
                                        const Vector& lambda_at_start);
/// log gamma_i += log lambda_i for an event with left-limit intensity lambda.
[[nodiscard]] GammaProcess gamma_jump(const GammaProcess& g, const Vector& lambda_at_jump);

/// One classical Runge-Kutta step of dqbar/dt = Gamma^{-1} A Gamma qbar over
/// [g.t, g.t + dt], with Gamma evolving under the intensity frozen at the step
/// start. Throws InstabilityError when a coefficient overflows.
[[nodiscard]] RobustState robust_filter_step(const RobustState& s, const GammaProcess& g,
                                             const RateMatrix& a, const Vector& lambda_at_start,
                                             double dt, double overflow_log = kDefaultOverflowLog);

/// Backward step of dvbar/dt = -Gamma A^T Gamma^{-1} vbar from g.t + dt down to
/// g.t, where g is Gamma at the earlier end of the step.
[[nodiscard]] RobustState robust_smoother_step(const RobustState& s, const GammaProcess& g,
                                               const RateMatrix& a, const Vector& lambda_at_start,
                                               double dt, double overflow_log = kDefaultOverflowLog);

struct RobustSample {
  double t = 0.0;
  double condition_log = 0.0;
  double max_abs_qbar = 0.0;
  /// log of the unnormalized filter Gamma qbar, componentwise.
  Vector log_q;
  /// <qbar, vbar>; filled by robust_smooth_events only.
  double inner_product = 0.0;
};

struct RobustRun {
  std::vector<RobustSample> samples;
  bool overflowed = false;
  double last_stable_time = 0.0;
  double overflow_condition_log = 0.0;
};

struct RobustOptions {
  double substep = 1e-3;
  double overflow_log = kDefaultOverflowLog;
  /// Record a sample every this many time units (and at every event).
  double sample_every = 0.1;
};

/// Runs the gauge-transformed filter along an event path, stopping at the
/// first overflow instead of throwing.
[[nodiscard]] RobustRun robust_filter_events(const ModelSpec& model, const EventTimes& events,
                                             double horizon, const RobustOptions& options = {});

/// Forward and backward gauge-transformed passes; samples carry <qbar, vbar>.
/// Throws InstabilityError on overflow.
[[nodiscard]] RobustRun robust_smooth_events(const ModelSpec& model, const EventTimes& events,
                                             double horizon, const RobustOptions& options = {});

}  // namespace mmhp
