#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lqglab/criteria.hpp"

namespace lqglab {

/// Flat view of a toml-like text file. Lines are `key = value`; `[section]`
/// prefixes the keys that follow with "section."; `#` starts a comment;
/// strings may be double-quoted; lists are written `[a, b, c]`.
class ConfigFile {
 public:
  static ConfigFile parse(std::string_view text);
  static ConfigFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string text(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key, double fallback) const;
  long integer(const std::string& key, long fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  /// FNV-1a over the sorted, normalised key/value pairs.
  std::uint64_t hash() const;

 private:
  std::map<std::string, std::string> values_;
};

struct ExperimentInfo {
  std::string name;
  std::string description;
  std::vector<std::string> criteria;
};

const std::vector<ExperimentInfo>& experiment_catalogue();

/// Typed configuration. Zero / empty fields select the experiment defaults.
struct ExperimentConfig {
  std::string experiment;
  std::vector<double> gamma;
  double mesh = 0.0;            // h; the disk lattice has radius 1/h cells
  std::size_t samples = 0;      // N
  std::uint64_t seed = 1;
  double delta = 0.0;
  double dt = 0.0;
  double horizon = 0.0;
  std::string output = "runs";
  ConfigFile raw;

  /// Throws ConfigError naming the field on malformed values or an unknown experiment.
  static ExperimentConfig from(const ConfigFile& file);
  std::uint64_t hash() const { return raw.hash(); }
};

struct Diagnostic {
  enum class Level { info, warning, error };
  Level level = Level::info;
  std::string field;
  std::string message;
};

/// Range checks, echoes of derived parameters and accuracy-envelope warnings.
std::vector<Diagnostic> validate(const ExperimentConfig& config);
bool has_errors(const std::vector<Diagnostic>& diagnostics);
std::string format_diagnostic(const Diagnostic& d);

struct RunReport {
  std::string experiment;
  std::string manifest_hash;
  std::filesystem::path directory;
  double wall_seconds = 0.0;
  std::vector<CriterionResult> results;

  /// All gating criteria pass.
  bool pass() const;
};

/// Runs the experiment into <root>/<experiment>-<hash>/, writing outputs,
/// report.json and manifest.json. The root is the config's output directory
/// unless LQGLAB_OUTPUT_ROOT is set.
RunReport run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

std::string hash_hex(std::uint64_t h);

}  // namespace lqglab
