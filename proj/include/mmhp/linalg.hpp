#pragma once

#include <Eigen/Dense>

namespace mmhp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultExpTol = 1e-12;

/// Matrix exponential by scaling and squaring with a degree-13 Pade
/// approximant. The scaling keeps the 1-norm of the scaled matrix below the
/// threshold where the approximant's backward error is under double
/// precision roundoff, which satisfies any tol in (0, 1e-6].
[[nodiscard]] Matrix mat_exp(const Matrix& m, double tol = kDefaultExpTol);

[[nodiscard]] Vector mat_vec(const Matrix& m, const Vector& x);

/// Divides x by its sum. Entries below zero but above -1e-12 are clamped.
/// Throws degenerate_posterior if the sum is not positive and finite.
[[nodiscard]] Vector normalize_probability(const Vector& x);

/// Same as normalize_probability but also returns log of the pre-normalization sum.
[[nodiscard]] Vector normalize_probability(const Vector& x, double& log_sum);

[[nodiscard]] bool all_finite(const Matrix& m) noexcept;

}  // namespace mmhp
