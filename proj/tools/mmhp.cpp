// Command-line front end: `mmhp <subcommand> [--config PATH] [flags]`.
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mmhp/cli.hpp"
#include "mmhp/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Filters, smoothers and calibration for Markov-modulated self-exciting counts"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::map<std::string, std::string> flags;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "key = value configuration file");
  const std::vector<std::pair<std::string, std::string>> forwarded = {
      {"--seed", "seed"},          {"--out", "out"},
      {"--rescale", "rescale"},    {"--bin-width", "bin_width"},
      {"--max-substep", "max_substep"}, {"--input", "input"},
      {"--horizon", "horizon"},    {"--mode", "mode"},
      {"--counts-out", "counts_out"}, {"--chain-out", "chain_out"},
  };
  for (const auto& [flag, key] : forwarded) {
    app.add_option_function<std::string>(flag, [&flags, key = key](const std::string& v) { flags[key] = v; });
  }
  app.add_option("--set", sets, "override any config key: --set key=value");

  for (const char* name : {"simulate", "filter", "smooth", "calibrate", "em-demo", "robust-demo", "predict", "tune"}) {
    app.add_subcommand(name);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    mmhp::KeyValues values;
    if (!config_path.empty()) values = mmhp::read_key_values(config_path);
    for (const auto& item : sets) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) mmhp::fail(mmhp::ErrorCode::invalid_input, "--set expects key=value");
      values[item.substr(0, eq)] = item.substr(eq + 1);
    }
    for (const auto& [key, value] : flags) values[key] = value;
    values["command"] = app.get_subcommands().front()->get_name();
    const mmhp::RunConfig config = mmhp::parse_config(values);
    return mmhp::run_subcommand(config, std::cout, std::cerr).exit_code;
  } catch (const mmhp::Error& e) {
    std::cerr << "error[" << mmhp::to_string(e.code()) << "]: " << e.what() << '\n';
    return mmhp::is_numerical(e.code()) ? 2 : 1;
  }
}
