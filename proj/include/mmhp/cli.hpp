#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmhp/io.hpp"
#include "mmhp/model.hpp"

namespace mmhp {

/// Everything a subcommand needs. Built from a flat `key = value` file and
/// command-line overrides; see README for the key list.
struct RunConfig {
  std::string command;

  std::size_t states = 2;
  std::optional<double> epsilon;
  std::vector<double> rate_matrix;  // row-major, column convention
  std::vector<double> alpha, beta, gamma, zeta;
  std::string q0 = "stationary";  // stationary | uniform | comma list

  std::string mode = "counts";  // events | counts
  std::string input;
  std::string out;
  std::string counts_out;
  std::string chain_out;
  std::string chain_input;  // simulate: use this chain instead of drawing one

  std::optional<double> bin_width;
  double max_substep = 0.0;
  std::uint64_t seed = 1;
  double horizon = 0.0;
  double rescale = 1.0;
  double output_step = 0.0;

  std::size_t initial_state = 0;  // 1-based; 0 draws from q0
  std::string sampler = "thinning";
  std::size_t replications = 1;

  std::vector<double> changepoints;
  std::vector<std::size_t> labels;  // 1-based
  std::size_t iterations = 4;
  std::string weighting = "smoothed";
  bool estimate_zeta = false;

  std::vector<double> epsilons;
  double predict_horizon = 1.0;
  double overflow_log = 300.0;
  double robust_substep = 1e-3;
  std::size_t trials = 20;
};

using KeyValues = std::map<std::string, std::string>;

/// Parses `key = value` lines; `#` starts a comment.
[[nodiscard]] KeyValues read_key_values(std::istream& in);
[[nodiscard]] KeyValues read_key_values(const std::filesystem::path& path);

/// Applies the key-value pairs to a default configuration. Unknown keys are errors.
[[nodiscard]] RunConfig parse_config(const KeyValues& values);

[[nodiscard]] ModelSpec build_model(const RunConfig& config);

struct RunResult {
  int exit_code = 0;
  ResultTable table;
};

/// Runs one subcommand. The main table goes to config.out (or `out` when
/// empty); diagnostics and summaries go to `err`. Errors are reported on
/// `err` and mapped to exit code 1 (input) or 2 (numerical diagnostic).
RunResult run_subcommand(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace mmhp
