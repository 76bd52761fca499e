#pragma once

#include <cstddef>

#include "mmhp/linalg.hpp"

namespace mmhp {

/// Generator of the hidden chain in column convention: entry (i, j) is the
/// rate of jumping from state j to state i, so every column sums to zero.
class RateMatrix {
 public:
  static constexpr double kColumnSumTol = 1e-10;

  RateMatrix() = default;
  /// Validates and stores a generator. Throws invalid_input on failure.
  explicit RateMatrix(Matrix entries);

  /// epsilon * [[-1, 1], [1, -1]] generalized to n states (each state jumps
  /// to every other state at rate epsilon).
  [[nodiscard]] static RateMatrix symmetric(std::size_t n, double epsilon);

  [[nodiscard]] std::size_t size() const noexcept {
    return static_cast<std::size_t>(entries_.rows());
  }
  [[nodiscard]] const Matrix& matrix() const noexcept { return entries_; }
  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const {
    return entries_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  /// Total rate of leaving state j.
  [[nodiscard]] double exit_rate(std::size_t j) const { return -(*this)(j, j); }

 private:
  Matrix entries_;
};

/// Per-state coefficients of the intensity (alpha + beta * kernel)^zeta.
struct HawkesParams {
  Vector alpha;
  Vector beta;
  Vector gamma;
  Vector zeta;

  /// zeta defaults to all ones.
  [[nodiscard]] static HawkesParams make(Vector alpha, Vector beta, Vector gamma);
  [[nodiscard]] static HawkesParams make(Vector alpha, Vector beta, Vector gamma, Vector zeta);

  [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(alpha.size()); }
  [[nodiscard]] bool linear() const noexcept { return (zeta.array() == 1.0).all(); }
  void validate() const;
};

/// Kernel values k_i(t) = alpha_i + beta_i * sum over past events of exp(-gamma_i (t - s)).
/// Left-continuous: an event at t is not included in k(t).
struct IntensityState {
  double t = 0.0;
  Vector k;

  [[nodiscard]] static IntensityState initial(const HawkesParams& params, double t0 = 0.0) {
    return {t0, params.alpha};
  }
};

struct ModelSpec {
  RateMatrix rate_matrix;
  HawkesParams params;
  Vector q0;

  /// q0 defaults to the stationary distribution of the chain.
  [[nodiscard]] static ModelSpec make(RateMatrix a, HawkesParams params);
  [[nodiscard]] static ModelSpec make(RateMatrix a, HawkesParams params, Vector q0);

  [[nodiscard]] std::size_t size() const noexcept { return params.size(); }
  void validate() const;
};

[[nodiscard]] IntensityState intensity_decay(const IntensityState& s, const HawkesParams& params,
                                             double dt);
[[nodiscard]] IntensityState intensity_jump(const IntensityState& s, const HawkesParams& params);
[[nodiscard]] Vector intensity_eval(const IntensityState& s, const HawkesParams& params);

/// Bin update assuming the bin's events are spread uniformly over the bin:
/// k <- alpha + e^{-gamma dt}(k - alpha) + beta * count * (1 - e^{-gamma dt}) / (gamma dt).
[[nodiscard]] IntensityState intensity_discrete_update(const IntensityState& s,
                                                       const HawkesParams& params, double dt,
                                                       double count);

/// (1 - e^{-x}) / x with its limit 1 for x below 1e-12.
[[nodiscard]] double uniform_spread_factor(double x) noexcept;

[[nodiscard]] Vector long_run_rate(const HawkesParams& params);

[[nodiscard]] Vector stationary_distribution(const RateMatrix& a);

/// Uniform vector 1/n.
[[nodiscard]] Vector uniform_distribution(std::size_t n);

}  // namespace mmhp
