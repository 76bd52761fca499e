#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <vector>

#include "mmhp/error.hpp"
#include "mmhp/estimate.hpp"
#include "mmhp/filter.hpp"
#include "mmhp/model.hpp"
#include "mmhp/robust.hpp"
#include "mmhp/simulate.hpp"
#include "mmhp/smoother.hpp"

namespace py = pybind11;

namespace {

mmhp::ModelSpec make_model(const mmhp::Matrix& rate_matrix, const mmhp::Vector& alpha,
                           const mmhp::Vector& beta, const mmhp::Vector& gamma,
                           const std::optional<mmhp::Vector>& zeta,
                           const std::optional<mmhp::Vector>& q0) {
  auto params = zeta ? mmhp::HawkesParams::make(alpha, beta, gamma, *zeta)
                     : mmhp::HawkesParams::make(alpha, beta, gamma);
  mmhp::RateMatrix a(rate_matrix);
  return q0 ? mmhp::ModelSpec::make(std::move(a), std::move(params), *q0)
            : mmhp::ModelSpec::make(std::move(a), std::move(params));
}

// Rows are grid points, columns are states.
mmhp::Matrix stack(const mmhp::PosteriorPath& path) {
  const auto rows = static_cast<Eigen::Index>(path.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : path.probs.front().size();
  mmhp::Matrix out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) out.row(r) = path.probs[static_cast<std::size_t>(r)].transpose();
  return out;
}

mmhp::PosteriorPath unstack(const std::vector<double>& times, const mmhp::Matrix& probs) {
  if (static_cast<Eigen::Index>(times.size()) != probs.rows()) {
    throw mmhp::Error(mmhp::ErrorCode::invalid_input, "times and probs must have the same number of rows");
  }
  mmhp::PosteriorPath path;
  path.times = times;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) path.probs.emplace_back(probs.row(r).transpose());
  return path;
}

mmhp::CountSeries make_counts(const std::vector<double>& counts, double bin_width, double t0) {
  mmhp::CountSeries series{t0, bin_width, counts};
  series.validate();
  return series;
}

mmhp::FilterOptions filter_options(std::optional<double> max_substep) {
  mmhp::FilterOptions options;
  if (max_substep) options.max_substep = *max_substep;
  return options;
}

py::dict posterior_dict(const mmhp::PosteriorPath& path) {
  py::dict d;
  d["t"] = path.times;
  d["p"] = stack(path);
  d["log_evidence"] = path.log_evidence;
  return d;
}

py::dict params_dict(const mmhp::HawkesParams& p) {
  py::dict d;
  d["alpha"] = p.alpha;
  d["beta"] = p.beta;
  d["gamma"] = p.gamma;
  d["zeta"] = p.zeta;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Markov-modulated Hawkes process: simulation, filtering, smoothing, calibration.";

  // Later registrations are tried first.
  const auto& base = py::register_exception<mmhp::Error>(m, "MmhpError", PyExc_ValueError);
  py::register_exception<mmhp::InstabilityError>(m, "InstabilityError", base.ptr());

  py::class_<mmhp::ModelSpec>(m, "Model")
      .def(py::init(&make_model), py::arg("rate_matrix"), py::arg("alpha"), py::arg("beta"),
           py::arg("gamma"), py::arg("zeta") = py::none(), py::arg("q0") = py::none(),
           "Column convention: rate_matrix[i, j] is the rate from state j to state i.")
      .def_static(
          "symmetric",
          [](double epsilon, const mmhp::Vector& alpha, const mmhp::Vector& beta, const mmhp::Vector& gamma,
             const std::optional<mmhp::Vector>& zeta, const std::optional<mmhp::Vector>& q0) {
            const auto a = mmhp::RateMatrix::symmetric(static_cast<std::size_t>(alpha.size()), epsilon);
            return make_model(a.matrix(), alpha, beta, gamma, zeta, q0);
          },
          py::arg("epsilon"), py::arg("alpha"), py::arg("beta"), py::arg("gamma"), py::arg("zeta") = py::none(),
          py::arg("q0") = py::none())
      .def_property_readonly("n_states", &mmhp::ModelSpec::size)
      .def_property_readonly("rate_matrix", [](const mmhp::ModelSpec& s) { return s.rate_matrix.matrix(); })
      .def_property_readonly("q0", [](const mmhp::ModelSpec& s) { return s.q0; })
      .def_property_readonly("params", [](const mmhp::ModelSpec& s) { return params_dict(s.params); })
      .def_property_readonly("long_run_rate", [](const mmhp::ModelSpec& s) { return mmhp::long_run_rate(s.params); });

  m.def(
      "simulate",
      [](const mmhp::ModelSpec& model, double horizon, std::uint64_t seed, std::optional<std::size_t> initial_state,
         const std::string& sampler) {
        const auto chain = initial_state
                               ? mmhp::simulate_chain(model.rate_matrix, *initial_state, horizon, seed)
                               : mmhp::simulate_chain(model.rate_matrix, model.q0, horizon, seed);
        mmhp::EventTimes events;
        if (sampler == "thinning") {
          events = mmhp::simulate_events_thinning(model, chain, horizon, seed);
        } else if (sampler == "branching") {
          events = mmhp::simulate_events_branching(model, chain, horizon, seed);
        } else {
          throw mmhp::Error(mmhp::ErrorCode::invalid_input, "sampler must be 'thinning' or 'branching'");
        }
        py::dict d;
        d["events"] = events.times;
        d["jump_times"] = chain.jump_times;
        d["states"] = chain.states;
        return d;
      },
      py::arg("model"), py::arg("horizon"), py::arg("seed"), py::arg("initial_state") = py::none(),
      py::arg("sampler") = "thinning", "Simulate a chain path (0-based states) and event times on [0, horizon].");

  m.def("bin_counts",
        [](const std::vector<double>& events, double bin_width, std::size_t n_bins) {
          mmhp::EventTimes e{events};
          e.validate();
          return mmhp::bin_counts(e, 0.0, bin_width, n_bins).counts;
        },
        py::arg("events"), py::arg("bin_width"), py::arg("n_bins"));

  m.def(
      "filter_events",
      [](const mmhp::ModelSpec& model, const std::vector<double>& events, double horizon,
         const std::vector<double>& grid, std::optional<double> max_substep) {
        mmhp::EventTimes e{events};
        e.validate();
        return posterior_dict(mmhp::filter_events(model, e, horizon, grid, filter_options(max_substep)).path);
      },
      py::arg("model"), py::arg("events"), py::arg("horizon"), py::arg("grid"), py::arg("max_substep") = py::none());

  m.def(
      "filter_counts",
      [](const mmhp::ModelSpec& model, const std::vector<double>& counts, double bin_width, double t0) {
        return posterior_dict(mmhp::filter_counts(model, make_counts(counts, bin_width, t0)).path);
      },
      py::arg("model"), py::arg("counts"), py::arg("bin_width"), py::arg("t0") = 0.0);

  m.def(
      "smooth_events",
      [](const mmhp::ModelSpec& model, const std::vector<double>& events, double horizon,
         const std::vector<double>& grid, std::optional<double> max_substep) {
        mmhp::EventTimes e{events};
        e.validate();
        const auto r = mmhp::smooth_events(model, e, horizon, grid, filter_options(max_substep));
        py::dict d = posterior_dict(r.filtered);
        d["p_smooth"] = stack(r.smoothed);
        return d;
      },
      py::arg("model"), py::arg("events"), py::arg("horizon"), py::arg("grid"), py::arg("max_substep") = py::none());

  m.def(
      "smooth_counts",
      [](const mmhp::ModelSpec& model, const std::vector<double>& counts, double bin_width, double t0) {
        const auto r = mmhp::smooth_counts(model, make_counts(counts, bin_width, t0));
        py::dict d = posterior_dict(r.filtered);
        d["p_smooth"] = stack(r.smoothed);
        return d;
      },
      py::arg("model"), py::arg("counts"), py::arg("bin_width"), py::arg("t0") = 0.0);

  m.def("predict", [](const mmhp::Vector& p, const mmhp::Matrix& rate_matrix, double s) {
    return mmhp::predict(p, mmhp::RateMatrix(rate_matrix), s);
  }, py::arg("p"), py::arg("rate_matrix"), py::arg("s"));

  m.def(
      "calibrate",
      [](const mmhp::ModelSpec& model, const std::vector<double>& counts, double bin_width,
         const std::optional<std::vector<double>>& changepoints, const std::optional<std::vector<std::size_t>>& labels,
         std::size_t iterations, const std::string& weighting, bool estimate_zeta) {
        const auto series = make_counts(counts, bin_width, 0.0);
        std::optional<mmhp::PosteriorPath> r0;
        if (changepoints && labels) {
          r0 = mmhp::initial_clustering(series, *changepoints, *labels, model.size());
        } else if (changepoints || labels) {
          throw mmhp::Error(mmhp::ErrorCode::invalid_input, "changepoints and labels go together");
        }
        mmhp::EmOptions options;
        options.iterations = iterations;
        options.estimate_zeta = estimate_zeta;
        if (weighting == "smoothed") {
          options.weighting = mmhp::EmWeighting::smoothed;
        } else if (weighting == "filtered") {
          options.weighting = mmhp::EmWeighting::filtered;
        } else {
          throw mmhp::Error(mmhp::ErrorCode::invalid_input, "weighting must be 'smoothed' or 'filtered'");
        }
        const auto result = mmhp::em_calibrate(model, series, r0, options);
        py::list rows;
        for (const auto& it : result.iterations) {
          py::dict d = params_dict(it.params);
          d["loglik"] = it.loglik;
          d["log_evidence"] = it.log_evidence;
          d["converged"] = it.converged;
          rows.append(d);
        }
        return rows;
      },
      py::arg("model"), py::arg("counts"), py::arg("bin_width"), py::arg("changepoints") = py::none(),
      py::arg("labels") = py::none(), py::arg("iterations") = 4, py::arg("weighting") = "smoothed",
      py::arg("estimate_zeta") = false, "EM calibration of (alpha, beta, gamma[, zeta]) on binned counts.");

  m.def(
      "em_rate_matrix_step",
      [](const mmhp::Matrix& rate_matrix, const std::vector<double>& times, const mmhp::Matrix& probs) {
        return mmhp::em_rate_matrix_step(mmhp::RateMatrix(rate_matrix), unstack(times, probs)).estimate.matrix();
      },
      py::arg("rate_matrix"), py::arg("times"), py::arg("probs"));

  m.def(
      "robust_filter_events",
      [](const mmhp::ModelSpec& model, const std::vector<double>& events, double horizon, double substep) {
        mmhp::EventTimes e{events};
        e.validate();
        mmhp::RobustOptions options;
        options.substep = substep;
        const auto run = mmhp::robust_filter_events(model, e, horizon, options);
        std::vector<double> t;
        std::vector<double> condition;
        for (const auto& s : run.samples) {
          t.push_back(s.t);
          condition.push_back(s.condition_log);
        }
        py::dict d;
        d["t"] = t;
        d["condition_log"] = condition;
        d["overflowed"] = run.overflowed;
        d["last_stable_time"] = run.last_stable_time;
        return d;
      },
      py::arg("model"), py::arg("events"), py::arg("horizon"), py::arg("substep") = 1e-3);
}
