#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lqglab/errors.hpp"
#include "lqglab/experiment.hpp"

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kConfig = 2;

lqglab::ExperimentConfig load_checked(const std::string& path, bool quiet_info) {
  const auto config = lqglab::ExperimentConfig::from(lqglab::ConfigFile::load(path));
  const auto diagnostics = lqglab::validate(config);
  for (const auto& d : diagnostics) {
    if (quiet_info && d.level == lqglab::Diagnostic::Level::info) continue;
    std::cerr << lqglab::format_diagnostic(d) << '\n';
  }
  if (lqglab::has_errors(diagnostics)) throw lqglab::ConfigError("configuration rejected: " + path);
  return config;
}

int run(const std::string& path, bool quiet) {
  const auto config = load_checked(path, false);
  const auto report = lqglab::run_experiment(config, quiet ? nullptr : &std::cerr);
  for (const auto& r : report.results) std::cout << lqglab::format_result(r) << '\n';
  std::cout << "run directory: " << report.directory.string() << '\n';
  std::cout << "manifest " << report.manifest_hash << ": " << (report.pass() ? "pass" : "FAIL") << '\n';
  return report.pass() ? kPass : kFail;
}

int validate_only(const std::string& path) {
  load_checked(path, false);
  std::cout << "configuration ok\n";
  return kPass;
}

int list_experiments() {
  for (const auto& e : lqglab::experiment_catalogue()) {
    std::string ids;
    for (const auto& c : e.criteria) ids += (ids.empty() ? "" : ",") + c;
    std::cout << e.name << " [" << ids << "]  " << e.description << '\n';
  }
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lqglab: Monte Carlo experiments on critical LQG, CLE_4 and stable processes"};
  app.require_subcommand(1);

  std::string config_path;
  bool quiet = false;
  auto* run_cmd = app.add_subcommand("run", "run the experiment described by a config file");
  run_cmd->add_option("config", config_path, "config file")->required();
  run_cmd->add_flag("-q,--quiet", quiet, "suppress progress output");
  auto* validate_cmd = app.add_subcommand("validate", "check a config file and print diagnostics");
  validate_cmd->add_option("config", config_path, "config file")->required();
  auto* list_cmd = app.add_subcommand("list-experiments", "list the available experiments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfig;
  }

  try {
    if (*run_cmd) return run(config_path, quiet);
    if (*validate_cmd) return validate_only(config_path);
    if (*list_cmd) return list_experiments();
  } catch (const lqglab::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFail;
  }
  return kConfig;
}
