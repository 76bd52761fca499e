#include "mmhp/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mmhp/error.hpp"

namespace mmhp {

namespace {

bool strongly_connected(const Matrix& a) {
  const auto n = a.rows();
  // Reachability along positive off-diagonal rates, forwards and backwards from state 0.
  auto reaches_all = [&](bool transpose) {
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::vector<Eigen::Index> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      const auto j = stack.back();
      stack.pop_back();
      for (Eigen::Index i = 0; i < n; ++i) {
        const double rate = transpose ? a(j, i) : a(i, j);
        if (i != j && rate > 0.0 && !seen[static_cast<std::size_t>(i)]) {
          seen[static_cast<std::size_t>(i)] = true;
          stack.push_back(i);
        }
      }
    }
    for (bool s : seen) {
      if (!s) return false;
    }
    return true;
  };
  return reaches_all(false) && reaches_all(true);
}

}  // namespace

RateMatrix::RateMatrix(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() == 0 || entries_.rows() != entries_.cols()) {
    fail(ErrorCode::invalid_input, "rate matrix must be square and non-empty");
  }
  if (!entries_.allFinite()) {
    fail(ErrorCode::invalid_input, "rate matrix has non-finite entries");
  }
  const auto n = entries_.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    double column_sum = 0.0;
    double scale = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i != j && entries_(i, j) < 0.0) {
        fail(ErrorCode::invalid_input, "rate matrix entry (" + std::to_string(i) + "," +
                                           std::to_string(j) + ") is a negative off-diagonal rate");
      }
      column_sum += entries_(i, j);
      scale = std::max(scale, std::abs(entries_(i, j)));
    }
    if (std::abs(column_sum) > kColumnSumTol * std::max(1.0, scale)) {
      fail(ErrorCode::invalid_input,
           "rate matrix column " + std::to_string(j) +
               " does not sum to zero (column convention: entry (i,j) is the rate from j to i)");
    }
  }
}

RateMatrix RateMatrix::symmetric(std::size_t n, double epsilon) {
  if (n == 0 || !(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    fail(ErrorCode::invalid_input, "symmetric rate matrix needs n >= 1 and epsilon >= 0");
  }
  const auto size = static_cast<Eigen::Index>(n);
  Matrix m = Matrix::Constant(size, size, epsilon);
  m.diagonal().setConstant(-epsilon * static_cast<double>(n - 1));
  return RateMatrix(std::move(m));
}

HawkesParams HawkesParams::make(Vector alpha, Vector beta, Vector gamma) {
  Vector zeta = Vector::Ones(alpha.size());
  return make(std::move(alpha), std::move(beta), std::move(gamma), std::move(zeta));
}

HawkesParams HawkesParams::make(Vector alpha, Vector beta, Vector gamma, Vector zeta) {
  HawkesParams p{std::move(alpha), std::move(beta), std::move(gamma), std::move(zeta)};
  p.validate();
  return p;
}

void HawkesParams::validate() const {
  const auto n = alpha.size();
  if (n == 0) fail(ErrorCode::invalid_input, "parameters need at least one state");
  if (beta.size() != n || gamma.size() != n || zeta.size() != n) {
    fail(ErrorCode::invalid_input, "alpha, beta, gamma and zeta must have the same length");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto state = std::to_string(i + 1);
    if (!(alpha[i] > 0.0) || !std::isfinite(alpha[i])) {
      fail(ErrorCode::invalid_input, "alpha_" + state + " must be positive and finite");
    }
    if (!(beta[i] >= 0.0) || !std::isfinite(beta[i])) {
      fail(ErrorCode::invalid_input, "beta_" + state + " must be nonnegative and finite");
    }
    if (!(gamma[i] >= 0.0) || !std::isfinite(gamma[i])) {
      fail(ErrorCode::invalid_input, "gamma_" + state + " must be nonnegative and finite");
    }
    if (!(zeta[i] > 0.0) || !std::isfinite(zeta[i])) {
      fail(ErrorCode::invalid_input, "zeta_" + state + " must be positive and finite");
    }
  }
}

ModelSpec ModelSpec::make(RateMatrix a, HawkesParams params) {
  Vector q0;
  try {
    q0 = stationary_distribution(a);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ambiguity) throw;
    q0 = uniform_distribution(a.size());
  }
  return make(std::move(a), std::move(params), std::move(q0));
}

ModelSpec ModelSpec::make(RateMatrix a, HawkesParams params, Vector q0) {
  ModelSpec spec{std::move(a), std::move(params), std::move(q0)};
  spec.validate();
  return spec;
}

void ModelSpec::validate() const {
  params.validate();
  const auto n = static_cast<Eigen::Index>(params.size());
  if (static_cast<Eigen::Index>(rate_matrix.size()) != n || q0.size() != n) {
    fail(ErrorCode::invalid_input, "rate matrix, parameters and q0 disagree on the number of states");
  }
  if ((q0.array() < 0.0).any() || !q0.allFinite() || std::abs(q0.sum() - 1.0) > 1e-9) {
    fail(ErrorCode::invalid_input, "q0 must be a probability vector");
  }
}

IntensityState intensity_decay(const IntensityState& s, const HawkesParams& params, double dt) {
  if (!(dt >= 0.0)) fail(ErrorCode::invalid_input, "intensity_decay: negative time step");
  IntensityState out{s.t + dt, s.k};
  for (Eigen::Index i = 0; i < out.k.size(); ++i) {
    out.k[i] = params.alpha[i] + std::exp(-params.gamma[i] * dt) * (s.k[i] - params.alpha[i]);
  }
  return out;
}

IntensityState intensity_jump(const IntensityState& s, const HawkesParams& params) {
  return {s.t, s.k + params.beta};
}

Vector intensity_eval(const IntensityState& s, const HawkesParams& params) {
  Vector lambda(s.k.size());
  for (Eigen::Index i = 0; i < s.k.size(); ++i) {
    if (!(s.k[i] > 0.0)) {
      fail(ErrorCode::invalid_state, "intensity kernel must be positive");
    }
    lambda[i] = params.zeta[i] == 1.0 ? s.k[i] : std::pow(s.k[i], params.zeta[i]);
  }
  return lambda;
}

double uniform_spread_factor(double x) noexcept {
  if (x < 1e-12) return 1.0;
  return -std::expm1(-x) / x;
}

IntensityState intensity_discrete_update(const IntensityState& s, const HawkesParams& params,
                                         double dt, double count) {
  if (!(dt > 0.0)) fail(ErrorCode::invalid_input, "intensity_discrete_update: dt must be positive");
  IntensityState out{s.t + dt, s.k};
  for (Eigen::Index i = 0; i < out.k.size(); ++i) {
    const double x = params.gamma[i] * dt;
    out.k[i] = params.alpha[i] + std::exp(-x) * (s.k[i] - params.alpha[i]) +
               params.beta[i] * uniform_spread_factor(x) * count;
  }
  return out;
}

Vector long_run_rate(const HawkesParams& params) {
  if (!params.linear()) {
    fail(ErrorCode::unsupported, "long_run_rate: only defined for zeta = 1");
  }
  Vector rate(params.alpha.size());
  for (Eigen::Index i = 0; i < rate.size(); ++i) {
    if (!(params.beta[i] < params.gamma[i])) {
      fail(ErrorCode::non_stationary,
           "long_run_rate: state " + std::to_string(i + 1) + " has beta >= gamma");
    }
    rate[i] = params.alpha[i] / (1.0 - params.beta[i] / params.gamma[i]);
  }
  return rate;
}

Vector stationary_distribution(const RateMatrix& a) {
  const auto n = static_cast<Eigen::Index>(a.size());
  if (n == 1) return Vector::Ones(1);
  if (!strongly_connected(a.matrix())) {
    fail(ErrorCode::ambiguity, "stationary_distribution: chain is reducible");
  }
  // Replace one balance equation with the normalization constraint.
  Matrix system = a.matrix();
  system.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs[n - 1] = 1.0;
  Vector pi = system.fullPivLu().solve(rhs);
  pi = pi.cwiseMax(0.0);
  return pi / pi.sum();
}

Vector uniform_distribution(std::size_t n) {
  const auto size = static_cast<Eigen::Index>(n);
  return Vector::Constant(size, 1.0 / static_cast<double>(n));
}

}  // namespace mmhp
