#include "mmhp/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mmhp/error.hpp"
#include "mmhp/smoother.hpp"

namespace mmhp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Integral of (alpha + excess e^{-gamma s})^zeta over [0, h].
double integrated_intensity(double alpha, double excess, double gamma, double zeta, double h) {
  if (h <= 0.0) return 0.0;
  if (zeta == 1.0) {
    const double decay = gamma > 0.0 ? -std::expm1(-gamma * h) / gamma : h;
    return alpha * h + excess * decay;
  }
  auto rate = [&](double s) { return std::pow(alpha + excess * std::exp(-gamma * s), zeta); };
  auto panels = static_cast<std::size_t>(std::ceil(h / 1e-2));
  panels += panels % 2;
  const double w = h / static_cast<double>(panels);
  double sum = rate(0.0) + rate(h);
  for (std::size_t j = 1; j < panels; ++j) {
    sum += (j % 2 == 1 ? 4.0 : 2.0) * rate(static_cast<double>(j) * w);
  }
  return sum * w / 3.0;
}

}  // namespace

ParamVector ParamVector::encode(const HawkesParams& params, bool with_zeta) {
  const auto n = static_cast<Eigen::Index>(params.size());
  ParamVector packed{Vector(n * (with_zeta ? 4 : 3)), with_zeta};
  auto put = [&](Eigen::Index block, const Vector& v) {
    for (Eigen::Index i = 0; i < n; ++i) {
      packed.x[block * n + i] = std::log(std::max(v[i], kParamFloor));
    }
  };
  put(0, params.alpha);
  put(1, params.beta);
  put(2, params.gamma);
  if (with_zeta) put(3, params.zeta);
  return packed;
}

HawkesParams ParamVector::decode(const HawkesParams& base) const {
  const auto n = static_cast<Eigen::Index>(base.size());
  if (x.size() != n * (with_zeta ? 4 : 3)) {
    fail(ErrorCode::invalid_input, "packed parameter vector has the wrong length");
  }
  HawkesParams out = base;
  out.alpha = x.segment(0, n).array().exp();
  out.beta = x.segment(n, n).array().exp();
  out.gamma = x.segment(2 * n, n).array().exp();
  if (with_zeta) out.zeta = x.segment(3 * n, n).array().exp();
  return out;
}

double loglik_complete(const HawkesParams& params, const ChainPath& chain, const EventTimes& events,
                       double horizon) {
  params.validate();
  chain.validate();
  events.validate();
  if (!events.times.empty() && events.times.back() > horizon) {
    fail(ErrorCode::invalid_input, "event after the horizon");
  }
  IntensityState kernel = IntensityState::initial(params);
  double value = 0.0;
  double t = 0.0;
  std::size_t segment = 0;

  // Integrates from t to `until`, crossing chain jumps.
  auto advance = [&](double until) {
    while (t < until) {
      while (segment + 1 < chain.num_segments() && chain.segment_end(segment) <= t) ++segment;
      const double piece_end =
          segment + 1 < chain.num_segments() ? std::min(until, chain.segment_end(segment)) : until;
      const auto i = static_cast<Eigen::Index>(chain.states[segment]);
      const double h = piece_end - t;
      value -= integrated_intensity(params.alpha[i], kernel.k[i] - params.alpha[i], params.gamma[i],
                                    params.zeta[i], h);
      kernel = intensity_decay(kernel, params, h);
      t = piece_end;
    }
  };

  for (double tau : events.times) {
    advance(tau);
    const auto i = static_cast<Eigen::Index>(chain.state_before(tau));
    const double k = kernel.k[i];
    if (!(k > 0.0)) return kNegInf;
    value += params.zeta[i] * std::log(k);
    kernel = intensity_jump(kernel, params);
  }
  advance(horizon);
  return value;
}

double loglik_partial_discrete(const HawkesParams& params, const PosteriorPath& rhat,
                               const CountSeries& counts) {
  counts.validate();
  const std::size_t n_bins = counts.size();
  std::size_t offset = 0;
  if (rhat.size() == n_bins + 1) {
    offset = 1;
  } else if (rhat.size() != n_bins) {
    fail(ErrorCode::invalid_input, "posterior path has " + std::to_string(rhat.size()) +
                                       " points for " + std::to_string(n_bins) + " bins");
  }
  const double tol = 1e-6 * counts.dt;
  for (std::size_t i = 0; i < n_bins; ++i) {
    if (std::abs(rhat.times[i + offset] - counts.bin_end(i)) > tol) {
      fail(ErrorCode::invalid_input,
           "posterior time grid does not match the count grid at bin " + std::to_string(i + 1));
    }
  }
  const auto n = static_cast<Eigen::Index>(params.size());
  IntensityState kernel = IntensityState::initial(params, counts.t0);
  double value = 0.0;
  Vector terms(n);
  for (std::size_t i = 0; i < n_bins; ++i) {
    const Vector lambda = intensity_eval(kernel, params);
    const double count = counts.counts[i];
    for (Eigen::Index s = 0; s < n; ++s) {
      terms[s] = (count > 0.0 ? count * std::log(lambda[s]) : 0.0) - lambda[s] * counts.dt;
    }
    const Vector& weights = rhat.probs[i + offset];
    if (weights.size() != n) fail(ErrorCode::invalid_input, "posterior dimension mismatch");
    value += weights.dot(terms);
    kernel = intensity_discrete_update(kernel, params, counts.dt, count);
  }
  return value;
}

NelderMeadResult nelder_mead_maximize(const std::function<double(const Vector&)>& objective,
                                      const Vector& x0, const NelderMeadOptions& options) {
  const auto dim = x0.size();
  if (dim == 0) fail(ErrorCode::invalid_input, "nelder_mead_maximize: empty start vector");
  auto cost = [&](const Vector& x) {
    const double v = objective(x);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
  };

  const auto vertices = static_cast<std::size_t>(dim) + 1;
  std::vector<Vector> x(vertices, x0);
  std::vector<double> f(vertices);
  for (Eigen::Index i = 0; i < dim; ++i) x[static_cast<std::size_t>(i) + 1][i] += options.initial_step;
  for (std::size_t v = 0; v < vertices; ++v) f[v] = cost(x[v]);
  if (std::none_of(f.begin(), f.end(), [](double v) { return std::isfinite(v); })) {
    fail(ErrorCode::optimizer_failure, "objective is non-finite at every initial vertex");
  }

  std::vector<std::size_t> order(vertices);
  NelderMeadResult result;
  for (;;) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
    {
      std::vector<Vector> sx(vertices);
      std::vector<double> sf(vertices);
      for (std::size_t v = 0; v < vertices; ++v) {
        sx[v] = x[order[v]];
        sf[v] = f[order[v]];
      }
      x.swap(sx);
      f.swap(sf);
    }
    double diameter = 0.0;
    for (std::size_t v = 1; v < vertices; ++v) {
      diameter = std::max(diameter, (x[v] - x[0]).cwiseAbs().maxCoeff());
    }
    if (diameter < options.tol) {
      result.converged = true;
      break;
    }
    if (result.iterations >= options.max_iter) break;
    ++result.iterations;

    const std::size_t worst = vertices - 1;
    Vector centroid = Vector::Zero(dim);
    for (std::size_t v = 0; v < worst; ++v) centroid += x[v];
    centroid /= static_cast<double>(worst);

    const Vector reflected = centroid + (centroid - x[worst]);
    const double f_reflected = cost(reflected);
    if (f_reflected < f[0]) {
      const Vector expanded = centroid + 2.0 * (centroid - x[worst]);
      const double f_expanded = cost(expanded);
      if (f_expanded < f_reflected) {
        x[worst] = expanded;
        f[worst] = f_expanded;
      } else {
        x[worst] = reflected;
        f[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < f[worst - 1]) {
      x[worst] = reflected;
      f[worst] = f_reflected;
      continue;
    }
    bool shrink = false;
    if (f_reflected < f[worst]) {
      const Vector contracted = centroid + 0.5 * (reflected - centroid);
      const double f_contracted = cost(contracted);
      if (f_contracted <= f_reflected) {
        x[worst] = contracted;
        f[worst] = f_contracted;
      } else {
        shrink = true;
      }
    } else {
      const Vector contracted = centroid + 0.5 * (x[worst] - centroid);
      const double f_contracted = cost(contracted);
      if (f_contracted < f[worst]) {
        x[worst] = contracted;
        f[worst] = f_contracted;
      } else {
        shrink = true;
      }
    }
    if (shrink) {
      for (std::size_t v = 1; v < vertices; ++v) {
        x[v] = x[0] + 0.5 * (x[v] - x[0]);
        f[v] = cost(x[v]);
      }
    }
  }
  result.x = x[0];
  result.value = -f[0];
  return result;
}

PosteriorPath initial_clustering(const CountSeries& counts, const std::vector<double>& changepoints,
                                 const std::vector<std::size_t>& labels, std::size_t n_states) {
  counts.validate();
  if (labels.size() != changepoints.size() + 1) {
    fail(ErrorCode::invalid_input, "clustering needs exactly one more label than changepoints");
  }
  for (std::size_t k = 1; k < changepoints.size(); ++k) {
    if (!(changepoints[k] > changepoints[k - 1])) {
      fail(ErrorCode::invalid_input, "changepoints must be increasing");
    }
  }
  for (std::size_t label : labels) {
    if (label >= n_states) fail(ErrorCode::invalid_input, "clustering label out of range");
  }
  // Bin index at which each new segment starts (nearest bin edge).
  std::vector<double> first_bin;
  first_bin.reserve(changepoints.size());
  for (double c : changepoints) first_bin.push_back(std::round((c - counts.t0) / counts.dt));

  PosteriorPath path;
  const std::size_t n_bins = counts.size();
  path.times.reserve(n_bins + 1);
  path.probs.reserve(n_bins + 1);
  auto label_of_bin = [&](std::size_t bin) {
    const auto segment = static_cast<std::size_t>(
        std::upper_bound(first_bin.begin(), first_bin.end(), static_cast<double>(bin)) - first_bin.begin());
    return labels[segment];
  };
  auto indicator = [&](std::size_t label) {
    Vector e = Vector::Zero(static_cast<Eigen::Index>(n_states));
    e[static_cast<Eigen::Index>(label)] = 1.0;
    return e;
  };
  path.times.push_back(counts.t0);
  path.probs.push_back(indicator(label_of_bin(0)));
  for (std::size_t i = 0; i < n_bins; ++i) {
    path.times.push_back(counts.bin_end(i));
    path.probs.push_back(indicator(label_of_bin(i)));
  }
  return path;
}

EmResult em_calibrate(const ModelSpec& model0, const CountSeries& counts,
                      const std::optional<PosteriorPath>& r0, const EmOptions& options) {
  model0.validate();
  counts.validate();
  if (options.iterations == 0) fail(ErrorCode::invalid_input, "em_calibrate: iterations must be positive");

  ModelSpec model = model0;
  auto e_step = [&](const ModelSpec& m, double* log_evidence) {
    FilterSmootherResult fs = smooth_counts(m, counts);
    if (log_evidence != nullptr) *log_evidence = fs.filtered.log_evidence;
    return options.weighting == EmWeighting::smoothed ? fs.smoothed : fs.filtered;
  };

  EmResult result;
  PosteriorPath weights = r0 ? *r0 : e_step(model, nullptr);
  for (std::size_t it = 1; it <= options.iterations; ++it) {
    const HawkesParams base = model.params;
    auto objective = [&](const Vector& x) {
      const ParamVector packed{x, options.estimate_zeta};
      return loglik_partial_discrete(packed.decode(base), weights, counts);
    };
    NelderMeadResult nm;
    try {
      nm = nelder_mead_maximize(objective, ParamVector::encode(base, options.estimate_zeta).x,
                                options.optimizer);
    } catch (const Error& e) {
      fail(ErrorCode::optimizer_failure,
           "EM iteration " + std::to_string(it) + " aborted: " + std::string(e.what()));
    }
    EmIteration record;
    record.params = ParamVector{nm.x, options.estimate_zeta}.decode(base);
    record.loglik = nm.value;
    record.optimizer_iterations = nm.iterations;
    record.converged = nm.converged;
    model.params = record.params;
    weights = e_step(model, &record.log_evidence);
    result.iterations.push_back(std::move(record));
  }
  result.posterior = std::move(weights);
  return result;
}

RateMatrixEmStep em_rate_matrix_step(const RateMatrix& a_hat, const PosteriorPath& rhat) {
  const auto n = static_cast<Eigen::Index>(a_hat.size());
  if (rhat.size() < 2) fail(ErrorCode::invalid_input, "posterior path needs at least two points");
  const double step = rhat.times[1] - rhat.times[0];
  if (!(step > 0.0)) fail(ErrorCode::invalid_input, "posterior grid must be increasing");
  Vector occupation = Vector::Zero(n);
  for (std::size_t k = 0; k + 1 < rhat.size(); ++k) {
    const double h = rhat.times[k + 1] - rhat.times[k];
    if (std::abs(h - step) > 1e-9 * std::max(1.0, step)) {
      fail(ErrorCode::invalid_input, "posterior grid is not uniform");
    }
    if (rhat.probs[k].size() != n || rhat.probs[k + 1].size() != n) {
      fail(ErrorCode::invalid_input, "posterior dimension mismatch");
    }
    occupation += 0.5 * h * (rhat.probs[k] + rhat.probs[k + 1]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(occupation[i] > 0.0)) {
      fail(ErrorCode::degenerate_posterior,
           "state " + std::to_string(i + 1) + " has zero expected occupation");
    }
  }
  const Matrix transitions = occupation.asDiagonal() * a_hat.matrix().transpose();
  Matrix estimate = transitions.transpose() * occupation.cwiseInverse().asDiagonal();
  return {{occupation, transitions}, RateMatrix(std::move(estimate))};
}

std::vector<std::size_t> argmax_path(const PosteriorPath& path) {
  std::vector<std::size_t> states;
  states.reserve(path.size());
  for (const Vector& p : path.probs) {
    Eigen::Index best = 0;
    p.maxCoeff(&best);
    states.push_back(static_cast<std::size_t>(best));
  }
  return states;
}

std::size_t count_switches(const std::vector<std::size_t>& states) {
  std::size_t switches = 0;
  for (std::size_t k = 1; k < states.size(); ++k) switches += states[k] != states[k - 1] ? 1 : 0;
  return switches;
}

std::vector<TuneRow> tune_epsilon(const std::vector<double>& epsilons, const CountSeries& counts,
                                  const ModelSpec& model_base) {
  std::vector<TuneRow> rows;
  for (double epsilon : epsilons) {
    ModelSpec model = model_base;
    model.rate_matrix = RateMatrix::symmetric(model_base.size(), epsilon);
    const FilterSmootherResult fs = smooth_counts(model, counts);
    const std::vector<std::size_t> states = argmax_path(fs.smoothed);

    TuneRow row;
    row.epsilon = epsilon;
    row.switches = count_switches(states);
    row.log_evidence = fs.filtered.log_evidence;
    std::vector<double> dwell;
    double run_start = fs.smoothed.times.front();
    for (std::size_t k = 1; k <= states.size(); ++k) {
      if (k == states.size() || states[k] != states[k - 1]) {
        const double run_end = k == states.size() ? fs.smoothed.times.back() : fs.smoothed.times[k];
        dwell.push_back(run_end - run_start);
        run_start = run_end;
      }
    }
    row.regimes = dwell.size();
    row.mean_dwell = std::accumulate(dwell.begin(), dwell.end(), 0.0) / static_cast<double>(dwell.size());
    row.min_dwell = *std::min_element(dwell.begin(), dwell.end());
    row.max_dwell = *std::max_element(dwell.begin(), dwell.end());
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mmhp
