#include "mmhp/linalg.hpp"

#include <array>
#include <cmath>
#include <string>

#include "mmhp/error.hpp"

namespace mmhp {

namespace {

// Higham (2005) coefficients for the [13/13] Pade approximant.
constexpr std::array<double, 14> kPade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0,  129060195264000.0,   10559470521600.0,
    670442572800.0,      33522128640.0,       1323241920.0,
    40840800.0,          960960.0,            16380.0,
    182.0,               1.0};
constexpr double kTheta13 = 5.371920351148152;

}  // namespace

bool all_finite(const Matrix& m) noexcept { return m.allFinite(); }

Matrix mat_exp(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) {
    fail(ErrorCode::invalid_input, "mat_exp: matrix is not square");
  }
  if (!(tol > 0.0 && tol <= 1e-6)) {
    fail(ErrorCode::invalid_input, "mat_exp: tol must lie in (0, 1e-6]");
  }
  if (!m.allFinite()) {
    fail(ErrorCode::invalid_input, "mat_exp: non-finite entry");
  }
  const auto n = m.rows();
  if (n == 0) return m;

  const double norm = m.cwiseAbs().colwise().sum().maxCoeff();
  if (norm == 0.0) return Matrix::Identity(n, n);
  int squarings = 0;
  if (norm > kTheta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / kTheta13)));
  }
  const Matrix a = m / std::ldexp(1.0, squarings);

  const Matrix id = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  const auto& b = kPade13;

  const Matrix u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 +
                         b[5] * a4 + b[3] * a2 + b[1] * id;
  const Matrix u = a * u_inner;
  const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 +
                   b[4] * a4 + b[2] * a2 + b[0] * id;

  Matrix r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) r = r * r;
  return r;
}

Vector mat_vec(const Matrix& m, const Vector& x) {
  if (m.cols() != x.size()) {
    fail(ErrorCode::invalid_input,
         "mat_vec: dimension mismatch (" + std::to_string(m.cols()) + " columns vs " +
             std::to_string(x.size()) + " entries)");
  }
  return m * x;
}

Vector normalize_probability(const Vector& x, double& log_sum) {
  Vector out = x;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (out[i] < 0.0 && out[i] >= -1e-12) out[i] = 0.0;
  }
  const double total = out.sum();
  if (!(total > 0.0) || !std::isfinite(total) || (out.array() < 0.0).any()) {
    fail(ErrorCode::degenerate_posterior, "cannot normalize vector: sum is not positive");
  }
  log_sum = std::log(total);
  return out / total;
}

Vector normalize_probability(const Vector& x) {
  double ignored = 0.0;
  return normalize_probability(x, ignored);
}

}  // namespace mmhp
