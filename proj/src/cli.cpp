#include "mmhp/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mmhp/error.hpp"
#include "mmhp/estimate.hpp"
#include "mmhp/filter.hpp"
#include "mmhp/robust.hpp"
#include "mmhp/smoother.hpp"

namespace mmhp {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double to_real(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(value)) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    fail(ErrorCode::invalid_input, "config key '" + key + "': '" + text + "' is not a number");
  }
}

std::size_t to_count(const std::string& key, const std::string& text) {
  const double value = to_real(key, text);
  if (value < 0.0 || value != std::floor(value)) {
    fail(ErrorCode::invalid_input, "config key '" + key + "' must be a nonnegative integer");
  }
  return static_cast<std::size_t>(value);
}

std::vector<double> to_reals(const std::string& key, const std::string& text) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    item = trim(item);
    if (!item.empty()) values.push_back(to_real(key, item));
  }
  return values;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  fail(ErrorCode::invalid_input, "config key '" + key + "' must be true or false");
}

Vector to_vector(const std::vector<double>& values) {
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// Writes the main table either to config.out or the provided stream.
void emit(const RunConfig& config, const ResultTable& table, std::ostream& out) {
  if (config.out.empty()) {
    table.write_csv(out);
    return;
  }
  std::ofstream file(config.out);
  if (!file) fail(ErrorCode::invalid_input, "cannot write '" + config.out + "'");
  table.write_csv(file);
}

template <typename Writer>
void write_file(const std::string& path, Writer&& writer) {
  std::ofstream file(path);
  if (!file) fail(ErrorCode::invalid_input, "cannot write '" + path + "'");
  writer(file);
}

void require_input(const RunConfig& config) {
  if (config.input.empty()) {
    fail(ErrorCode::invalid_input, "'" + config.command + "' needs an input file (input = PATH)");
  }
}

EventTimes load_events(const RunConfig& config) {
  require_input(config);
  return read_events_csv(std::filesystem::path(config.input));
}

double events_horizon(const RunConfig& config, const EventTimes& events) {
  if (config.horizon > 0.0) return config.horizon;
  return events.times.empty() ? 0.0 : events.times.back();
}

// Counts from the input file; event input is binned at bin_width.
CountSeries load_counts(const RunConfig& config) {
  require_input(config);
  if (config.mode == "counts") {
    return read_counts_csv(std::filesystem::path(config.input), config.rescale, config.bin_width);
  }
  const EventTimes events = load_events(config);
  if (!config.bin_width) fail(ErrorCode::invalid_input, "binning event input needs bin_width");
  const double horizon = events_horizon(config, events);
  const auto n_bins = static_cast<std::size_t>(std::ceil(horizon / *config.bin_width - 1e-9));
  CountSeries counts = bin_counts(events, 0.0, *config.bin_width, n_bins);
  for (double& c : counts.counts) c /= config.rescale;
  return counts;
}

FilterOptions filter_options(const RunConfig& config) {
  FilterOptions options;
  options.max_substep = config.max_substep;
  return options;
}

std::vector<double> output_grid(const RunConfig& config, double horizon) {
  if (config.output_step > 0.0) return uniform_grid(0.0, horizon, config.output_step);
  return {};
}

// Keeps the rows at multiples of `step` (bin edges are already on a grid).
PosteriorPath thin_path(const PosteriorPath& path, double step) {
  PosteriorPath out;
  out.log_evidence = path.log_evidence;
  for (std::size_t k = 0; k < path.size(); ++k) {
    const double ratio = path.times[k] / step;
    if (std::abs(ratio - std::round(ratio)) <= 1e-9 * std::max(1.0, std::abs(ratio))) {
      out.times.push_back(path.times[k]);
      out.probs.push_back(path.probs[k]);
    }
  }
  return out;
}

FilterSmootherResult run_filter_smoother(const RunConfig& config, const ModelSpec& model) {
  if (config.mode == "events") {
    const EventTimes events = load_events(config);
    const double horizon = events_horizon(config, events);
    return smooth_events(model, events, horizon, output_grid(config, horizon), filter_options(config));
  }
  auto result = smooth_counts(model, load_counts(config), filter_options(config));
  if (config.output_step > 0.0) {
    result.filtered = thin_path(result.filtered, config.output_step);
    result.smoothed = thin_path(result.smoothed, config.output_step);
  }
  return result;
}

ResultTable run_simulate(const RunConfig& config, const ModelSpec& model, std::ostream& err) {
  if (!(config.horizon > 0.0)) fail(ErrorCode::invalid_input, "simulate needs horizon > 0");
  if (config.initial_state > model.size()) fail(ErrorCode::invalid_input, "initial_state out of range");
  auto simulate_once = [&](std::uint64_t seed) {
    const ChainPath chain =
        !config.chain_input.empty()
            ? read_chain_csv(std::filesystem::path(config.chain_input), config.horizon)
        : config.initial_state > 0
            ? simulate_chain(model.rate_matrix, config.initial_state - 1, config.horizon, seed)
            : simulate_chain(model.rate_matrix, model.q0, config.horizon, seed);
    EventTimes events;
    if (config.sampler == "thinning") {
      events = simulate_events_thinning(model, chain, config.horizon, seed);
    } else if (config.sampler == "branching") {
      events = simulate_events_branching(model, chain, config.horizon, seed);
    } else {
      fail(ErrorCode::invalid_input, "sampler must be thinning or branching");
    }
    return std::pair{chain, events};
  };

  ResultTable table;
  if (config.replications > 1) {
    table.columns = {"replication", "seed", "events", "rate"};
    for (std::size_t r = 0; r < config.replications; ++r) {
      const std::uint64_t seed = config.seed + r;
      const auto [chain, events] = simulate_once(seed);
      table.add_row({static_cast<double>(r + 1), static_cast<double>(seed),
                     static_cast<double>(events.size()),
                     static_cast<double>(events.size()) / config.horizon});
    }
    return table;
  }

  const auto [chain, events] = simulate_once(config.seed);
  table.columns = {"t"};
  for (double t : events.times) table.add_row({t});
  if (!config.chain_out.empty()) {
    write_file(config.chain_out, [&](std::ostream& o) { write_chain_csv(o, chain); });
  }
  if (!config.counts_out.empty()) {
    if (!config.bin_width) fail(ErrorCode::invalid_input, "counts_out needs bin_width");
    const auto n_bins = static_cast<std::size_t>(std::ceil(config.horizon / *config.bin_width - 1e-9));
    const CountSeries counts = bin_counts(events, 0.0, *config.bin_width, n_bins);
    write_file(config.counts_out, [&](std::ostream& o) { write_counts_csv(o, counts); });
  }
  err << "events," << events.size() << "\nchain_jumps," << chain.jump_times.size() << '\n';
  return table;
}

ResultTable run_calibrate(const RunConfig& config, const ModelSpec& model, std::ostream& err) {
  const CountSeries counts = load_counts(config);
  std::optional<PosteriorPath> r0;
  if (!config.labels.empty()) {
    std::vector<std::size_t> labels;
    for (std::size_t label : config.labels) {
      if (label == 0) fail(ErrorCode::invalid_input, "labels are 1-based");
      labels.push_back(label - 1);
    }
    r0 = initial_clustering(counts, config.changepoints, labels, model.size());
  }
  EmOptions options;
  options.iterations = config.iterations;
  options.estimate_zeta = config.estimate_zeta;
  if (config.weighting == "filtered") {
    options.weighting = EmWeighting::filtered;
  } else if (config.weighting != "smoothed") {
    fail(ErrorCode::invalid_input, "weighting must be smoothed or filtered");
  }
  const EmResult result = em_calibrate(model, counts, r0, options);

  const auto n = model.size();
  ResultTable table;
  table.columns.push_back("iter");
  const std::vector<std::string> names = config.estimate_zeta
                                             ? std::vector<std::string>{"alpha", "beta", "gamma", "zeta"}
                                             : std::vector<std::string>{"alpha", "beta", "gamma"};
  for (const auto& name : names) {
    for (std::size_t i = 0; i < n; ++i) table.columns.push_back(name + "_" + std::to_string(i + 1));
  }
  table.columns.push_back("loglik");
  table.columns.push_back("log_evidence");
  for (std::size_t it = 0; it < result.iterations.size(); ++it) {
    const EmIteration& iteration = result.iterations[it];
    std::vector<double> row{static_cast<double>(it + 1)};
    for (const Vector* v : {&iteration.params.alpha, &iteration.params.beta, &iteration.params.gamma,
                            &iteration.params.zeta}) {
      if (v == &iteration.params.zeta && !config.estimate_zeta) continue;
      for (Eigen::Index i = 0; i < v->size(); ++i) row.push_back((*v)[i]);
    }
    row.push_back(iteration.loglik);
    row.push_back(iteration.log_evidence);
    table.add_row(std::move(row));
    if (!iteration.converged) {
      err << "warning: optimizer hit max_iter in iteration " << it + 1 << '\n';
    }
  }
  return table;
}

ResultTable run_em_demo(const RunConfig& config, const ModelSpec& model, std::ostream& err) {
  ResultTable table;
  table.columns = {"trial", "relative_change"};
  double worst = 0.0;
  auto record = [&](std::size_t trial, const RateMatrix& a, const PosteriorPath& rhat) {
    const RateMatrixEmStep step = em_rate_matrix_step(a, rhat);
    const double change = (step.estimate.matrix() - a.matrix()).norm() / a.matrix().norm();
    worst = std::max(worst, change);
    table.add_row({static_cast<double>(trial), change});
  };
  if (!config.input.empty()) {
    const FilterSmootherResult fs = run_filter_smoother(config, model);
    record(1, model.rate_matrix, fs.smoothed);
  } else {
    // Random generators and random posterior paths on [0, 1] with 101 points.
    Rng rng(config.seed, 7);
    if (config.states == 0) fail(ErrorCode::invalid_input, "states must be positive");
    const auto n = static_cast<Eigen::Index>(config.states);
    for (std::size_t trial = 1; trial <= config.trials; ++trial) {
      Matrix m(n, n);
      for (Eigen::Index j = 0; j < n; ++j) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (i == j) continue;
          m(i, j) = rng.exponential(1.0);
          total += m(i, j);
        }
        m(j, j) = -total;
      }
      PosteriorPath rhat;
      for (std::size_t k = 0; k <= 100; ++k) {
        Vector p(n);
        for (Eigen::Index i = 0; i < n; ++i) p[i] = rng.exponential(1.0);
        rhat.times.push_back(static_cast<double>(k) * 0.01);
        rhat.probs.push_back(p / p.sum());
      }
      record(trial, n == 1 ? RateMatrix(Matrix::Zero(1, 1)) : RateMatrix(m), rhat);
    }
  }
  err << "max_relative_change," << format_real(worst) << '\n';
  return table;
}

ResultTable run_robust_demo(const RunConfig& config, const ModelSpec& model, std::ostream& err,
                            int& exit_code) {
  EventTimes events;
  double horizon = config.horizon;
  if (!config.input.empty()) {
    events = load_events(config);
    horizon = events_horizon(config, events);
  } else {
    if (!(horizon > 0.0)) fail(ErrorCode::invalid_input, "robust-demo needs input or horizon > 0");
    const std::size_t x0 = config.initial_state > 0 ? config.initial_state - 1 : 0;
    const ChainPath chain = simulate_chain(model.rate_matrix, x0, horizon, config.seed);
    events = simulate_events_thinning(model, chain, horizon, config.seed);
  }
  RobustOptions options;
  options.substep = config.robust_substep;
  options.overflow_log = config.overflow_log;
  if (config.output_step > 0.0) options.sample_every = config.output_step;
  const RobustRun run = robust_filter_events(model, events, horizon, options);
  ResultTable table;
  table.columns = {"t", "condition_log", "max_abs_qbar"};
  for (const RobustSample& s : run.samples) table.add_row({s.t, s.condition_log, s.max_abs_qbar});
  if (run.overflowed) {
    err << "error[instability]: robust recursion overflowed after t=" << format_real(run.last_stable_time)
        << " (condition_log=" << format_real(run.overflow_condition_log) << ")\n";
    exit_code = 2;
  }
  return table;
}

ResultTable run_predict(const RunConfig& config, const ModelSpec& model) {
  const FilterSmootherResult fs = run_filter_smoother(config, model);
  const Vector& last = fs.filtered.probs.back();
  const double step = config.output_step > 0.0 ? config.output_step : config.predict_horizon;
  ResultTable table;
  table.columns = {"s"};
  for (std::size_t i = 0; i < model.size(); ++i) table.columns.push_back("p_" + std::to_string(i + 1));
  for (double s : uniform_grid(0.0, config.predict_horizon, step)) {
    const Vector p = predict(last, model.rate_matrix, s);
    std::vector<double> row{s};
    for (Eigen::Index i = 0; i < p.size(); ++i) row.push_back(p[i]);
    table.add_row(std::move(row));
  }
  return table;
}

ResultTable run_tune(const RunConfig& config, const ModelSpec& model) {
  if (config.epsilons.empty()) fail(ErrorCode::invalid_input, "tune needs epsilons = e1,e2,...");
  ResultTable table;
  table.columns = {"epsilon", "switches", "regimes", "mean_dwell", "min_dwell", "max_dwell", "log_evidence"};
  for (const TuneRow& row : tune_epsilon(config.epsilons, load_counts(config), model)) {
    table.add_row({row.epsilon, static_cast<double>(row.switches), static_cast<double>(row.regimes),
                   row.mean_dwell, row.min_dwell, row.max_dwell, row.log_evidence});
  }
  return table;
}

}  // namespace

KeyValues read_key_values(std::istream& in) {
  KeyValues values;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::invalid_input, "config line " + std::to_string(line_number) + ": expected key = value");
    }
    values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return values;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::invalid_input, "cannot open config '" + path.string() + "'");
  return read_key_values(in);
}

RunConfig parse_config(const KeyValues& values) {
  RunConfig c;
  for (const auto& [key, value] : values) {
    if (key == "command") c.command = value;
    else if (key == "states") c.states = to_count(key, value);
    else if (key == "epsilon") c.epsilon = to_real(key, value);
    else if (key == "rate_matrix") c.rate_matrix = to_reals(key, value);
    else if (key == "alpha") c.alpha = to_reals(key, value);
    else if (key == "beta") c.beta = to_reals(key, value);
    else if (key == "gamma") c.gamma = to_reals(key, value);
    else if (key == "zeta") c.zeta = to_reals(key, value);
    else if (key == "q0") c.q0 = value;
    else if (key == "mode") c.mode = value;
    else if (key == "input") c.input = value;
    else if (key == "out") c.out = value;
    else if (key == "counts_out") c.counts_out = value;
    else if (key == "chain_out") c.chain_out = value;
    else if (key == "chain_input") c.chain_input = value;
    else if (key == "bin_width") c.bin_width = to_real(key, value);
    else if (key == "max_substep") c.max_substep = to_real(key, value);
    else if (key == "seed") c.seed = to_count(key, value);
    else if (key == "horizon") c.horizon = to_real(key, value);
    else if (key == "rescale") c.rescale = to_real(key, value);
    else if (key == "output_step") c.output_step = to_real(key, value);
    else if (key == "initial_state") c.initial_state = to_count(key, value);
    else if (key == "sampler") c.sampler = value;
    else if (key == "replications") c.replications = to_count(key, value);
    else if (key == "changepoints") c.changepoints = to_reals(key, value);
    else if (key == "labels") {
      c.labels.clear();
      for (double v : to_reals(key, value)) c.labels.push_back(to_count(key, format_real(v)));
    }
    else if (key == "iterations") c.iterations = to_count(key, value);
    else if (key == "weighting") c.weighting = value;
    else if (key == "estimate_zeta") c.estimate_zeta = to_bool(key, value);
    else if (key == "epsilons") c.epsilons = to_reals(key, value);
    else if (key == "predict_horizon") c.predict_horizon = to_real(key, value);
    else if (key == "overflow_log") c.overflow_log = to_real(key, value);
    else if (key == "robust_substep") c.robust_substep = to_real(key, value);
    else if (key == "trials") c.trials = to_count(key, value);
    else fail(ErrorCode::invalid_input, "unknown config key '" + key + "'");
  }
  if (!(c.rescale > 0.0)) fail(ErrorCode::invalid_input, "rescale must be positive");
  if (c.mode != "events" && c.mode != "counts") fail(ErrorCode::invalid_input, "mode must be events or counts");
  if (c.bin_width && !(*c.bin_width > 0.0)) fail(ErrorCode::invalid_input, "bin_width must be positive");
  return c;
}

ModelSpec build_model(const RunConfig& config) {
  const std::size_t n = config.alpha.empty() ? config.states : config.alpha.size();
  auto sized = [&](const std::vector<double>& v, const char* name, double fallback) {
    if (v.empty()) {
      if (std::isnan(fallback)) fail(ErrorCode::invalid_input, std::string("config needs ") + name);
      return Vector(Vector::Constant(static_cast<Eigen::Index>(n), fallback));
    }
    if (v.size() != n) fail(ErrorCode::invalid_input, std::string(name) + " has the wrong length");
    return to_vector(v);
  };
  const HawkesParams params = HawkesParams::make(sized(config.alpha, "alpha", std::nan("")),
                                                 sized(config.beta, "beta", 0.0),
                                                 sized(config.gamma, "gamma", 0.0),
                                                 sized(config.zeta, "zeta", 1.0));
  RateMatrix a;
  if (!config.rate_matrix.empty()) {
    if (config.rate_matrix.size() != n * n) fail(ErrorCode::invalid_input, "rate_matrix needs n*n entries");
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = config.rate_matrix[i * n + j];
      }
    }
    a = RateMatrix(std::move(m));
  } else if (config.epsilon) {
    a = RateMatrix::symmetric(n, *config.epsilon);
  } else {
    fail(ErrorCode::invalid_input, "config needs rate_matrix or epsilon");
  }
  if (config.q0 == "stationary") return ModelSpec::make(std::move(a), params);
  if (config.q0 == "uniform") return ModelSpec::make(std::move(a), params, uniform_distribution(n));
  return ModelSpec::make(std::move(a), params, to_vector(to_reals("q0", config.q0)));
}

RunResult run_subcommand(const RunConfig& config, std::ostream& out, std::ostream& err) {
  RunResult result;
  try {
    const std::string& cmd = config.command;
    // The random em-demo only needs the number of states.
    const bool needs_model = cmd != "em-demo" || !config.input.empty();
    const ModelSpec model = needs_model ? build_model(config) : ModelSpec{};
    if (cmd == "simulate") {
      result.table = run_simulate(config, model, err);
    } else if (cmd == "filter" || cmd == "smooth") {
      const FilterSmootherResult fs = run_filter_smoother(config, model);
      result.table = posterior_table(fs.filtered, cmd == "smooth" ? &fs.smoothed : nullptr);
      err << "log_evidence," << format_real(fs.filtered.log_evidence) << '\n';
    } else if (cmd == "calibrate") {
      result.table = run_calibrate(config, model, err);
    } else if (cmd == "em-demo") {
      result.table = run_em_demo(config, model, err);
    } else if (cmd == "robust-demo") {
      result.table = run_robust_demo(config, model, err, result.exit_code);
    } else if (cmd == "predict") {
      result.table = run_predict(config, model);
    } else if (cmd == "tune") {
      result.table = run_tune(config, model);
    } else {
      fail(ErrorCode::invalid_input, "unknown subcommand '" + cmd + "'");
    }
    emit(config, result.table, out);
  } catch (const Error& e) {
    err << "error[" << to_string(e.code()) << "]: " << e.what() << '\n';
    result.exit_code = is_numerical(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << '\n';
    result.exit_code = 1;
  }
  return result;
}

}  // namespace mmhp
