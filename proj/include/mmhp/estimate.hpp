#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "mmhp/filter.hpp"
#include "mmhp/model.hpp"
#include "mmhp/simulate.hpp"

namespace mmhp {

/// Unconstrained packing of (alpha, beta, gamma[, zeta]) per state through a
/// componentwise log. Zero entries are packed at log(kParamFloor).
struct ParamVector {
  static constexpr double kParamFloor = 1e-12;

  Vector x;
  bool with_zeta = false;

  [[nodiscard]] static ParamVector encode(const HawkesParams& params, bool with_zeta);
  /// zeta comes from `base` unless it is packed.
  [[nodiscard]] HawkesParams decode(const HawkesParams& base) const;
};

/// Expected occupation times K and transition counts J. J follows the
/// convention J(i, j) = transitions from i to j with J(i, i) = -sum_{j != i} J(i, j).
struct OccupationStats {
  Vector occupation;
  Matrix transitions;
};

/// sum over events of log lambda(t-, X_{t-}) minus the integrated intensity
/// along the chain path. Exact for zeta = 1, composite Simpson with steps of
/// at most 1e-2 otherwise.
[[nodiscard]] double loglik_complete(const HawkesParams& params, const ChainPath& chain,
                                     const EventTimes& events, double horizon);

/// sum_i < r_i, count_i log lambda_{i-1} - lambda_{i-1} dt >, with the kernel
/// driven by the observed counts under `params`. rhat holds either one
/// vector per bin (at bin ends) or a leading extra vector at t0.
[[nodiscard]] double loglik_partial_discrete(const HawkesParams& params, const PosteriorPath& rhat,
                                             const CountSeries& counts);

struct NelderMeadOptions {
  double tol = 1e-8;  // simplex diameter (max-norm distance to the best vertex)
  std::size_t max_iter = 2000;
  double initial_step = 0.1;
};

struct NelderMeadResult {
  Vector x;
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Standard Nelder-Mead on -objective (reflection 1, expansion 2, contraction
/// 0.5, shrink 0.5). Non-finite objective values rank as worst.
[[nodiscard]] NelderMeadResult nelder_mead_maximize(const std::function<double(const Vector&)>& objective,
                                                    const Vector& x0,
                                                    const NelderMeadOptions& options = {});

/// Hard 0/1 posterior on the count grid (t0 plus every bin end), switching at
/// the bin edges nearest to the changepoints.
[[nodiscard]] PosteriorPath initial_clustering(const CountSeries& counts,
                                               const std::vector<double>& changepoints,
                                               const std::vector<std::size_t>& labels,
                                               std::size_t n_states);

enum class EmWeighting { smoothed, filtered };

struct EmOptions {
  std::size_t iterations = 4;
  EmWeighting weighting = EmWeighting::smoothed;
  bool estimate_zeta = false;
  NelderMeadOptions optimizer{1e-7, 20000, 0.1};
};

struct EmIteration {
  HawkesParams params;
  /// M-step objective: the partial likelihood maximized in this iteration.
  double loglik = 0.0;
  /// Log-evidence of the discrete filter under the new parameters.
  double log_evidence = 0.0;
  std::size_t optimizer_iterations = 0;
  bool converged = false;
};

struct EmResult {
  std::vector<EmIteration> iterations;
  PosteriorPath posterior;  // E-step weights under the last iterate
};

/// Alternates maximization of the partial likelihood over the observation
/// parameters with filter/smoother passes. The rate matrix and q0 of model0
/// stay fixed. Without r0 the first weights come from the E-step under model0.
[[nodiscard]] EmResult em_calibrate(const ModelSpec& model0, const CountSeries& counts,
                                    const std::optional<PosteriorPath>& r0,
                                    const EmOptions& options = {});

struct RateMatrixEmStep {
  OccupationStats stats;
  RateMatrix estimate;
};

/// One EM update of the rate matrix from posterior weights on a uniform grid
/// (trapezoid rule). Returns the input matrix up to roundoff.
[[nodiscard]] RateMatrixEmStep em_rate_matrix_step(const RateMatrix& a_hat, const PosteriorPath& rhat);

struct TuneRow {
  double epsilon = 0.0;
  std::size_t switches = 0;
  std::size_t regimes = 0;
  double mean_dwell = 0.0;
  double min_dwell = 0.0;
  double max_dwell = 0.0;
  double log_evidence = 0.0;
};

/// Filter/smoother sweep over A(eps) = eps * symmetric generator, counting
/// argmax switches of the smoothed path.
[[nodiscard]] std::vector<TuneRow> tune_epsilon(const std::vector<double>& epsilons,
                                                const CountSeries& counts,
                                                const ModelSpec& model_base);

[[nodiscard]] std::vector<std::size_t> argmax_path(const PosteriorPath& path);
[[nodiscard]] std::size_t count_switches(const std::vector<std::size_t>& states);

}  // namespace mmhp
