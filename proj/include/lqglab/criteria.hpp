#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace lqglab {

/// Outcome of one acceptance criterion (or of a diagnostic that does not gate).
struct CriterionResult {
  std::string id;
  std::string title;
  bool gating = true;
  bool pass = false;
  double statistic = 0.0;
  double threshold = 0.0;
  std::string detail;
  std::vector<std::pair<std::string, double>> metrics;
  double seconds = 0.0;
};

/// Writes run outputs into a directory, tagging each file with the manifest
/// hash and remembering what was written.
class OutputSink {
 public:
  OutputSink(std::filesystem::path dir, std::string manifest_hash);

  /// CSV stream whose first line is "# manifest=<hash>".
  std::ofstream csv(const std::string& name);
  /// Writes a JSON document; the hash is stored under "manifest".
  void json(const std::string& name, const std::string& body_without_manifest);
  const std::filesystem::path& dir() const { return dir_; }
  const std::string& manifest_hash() const { return hash_; }
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::string hash_;
  std::vector<std::string> files_;
};

/// Per-sample results computed in batches; finished batches are persisted
/// (temp file + rename) so an interrupted run resumes where it stopped.
class Checkpointer {
 public:
  Checkpointer(std::filesystem::path dir, std::uint64_t config_hash);

  using Row = std::vector<double>;
  std::vector<Row> run(const std::string& name, std::size_t count, std::size_t batch,
                       const std::function<Row(std::size_t)>& sample);

 private:
  std::filesystem::path dir_;
  std::uint64_t hash_;
};

/// Shared state of a run: seed root, optional outputs, checkpoints and log.
struct RunContext {
  std::uint64_t seed = 1;
  OutputSink* out = nullptr;
  Checkpointer* checkpoints = nullptr;
  std::ostream* log = nullptr;

  /// Batched evaluation through the checkpointer when one is present.
  std::vector<std::vector<double>> samples(const std::string& name, std::size_t count,
                                           const std::function<std::vector<double>(std::size_t)>& sample) const;
  void note(const std::string& line) const;
};

namespace criteria {

struct LemmaParams {
  int models = 100;
  int max_variables = 5;
  int max_atoms = 4;
  double tolerance = 1e-12;
  double time_limit = 5.0;
};
CriterionResult lemma_exactness(const LemmaParams& p, const RunContext& ctx);

struct LevyParams {
  std::vector<double> betas{1.5, 1.75};
  std::vector<double> lambdas{0.5, 1.0, 2.0};
  std::vector<double> qs{0.5, 1.0, 2.0};
  std::size_t samples = 100000;
  int blocks = 16;
  double delta = 1e-2;
  double dt = 1e-2;
  double horizon = 1000.0;
  double passage_beta = 1.5;
  double tolerance = 0.02;
  double ess_fraction = 0.2;
};
/// Stable marginal law, first passage and the reweighted largest-jump law.
std::vector<CriterionResult> levy_laws(const LevyParams& p, const RunContext& ctx);

struct GffParams {
  int grid = 64;
  std::size_t samples = 20000;
  double sigmas = 3.0;
};
CriterionResult gff_covariance(const GffParams& p, const RunContext& ctx);

struct GmcParams {
  double gamma = 1.5;
  int coarse_radius = 32;
  std::size_t samples = 2000;
  double ks_bound = 0.05;
};
std::vector<CriterionResult> gmc_scaling(const GmcParams& p, const RunContext& ctx);

struct CleParams {
  double kappa = 4.0;
  int coarse_radius = 32;
  std::size_t samples = 2000;
  std::size_t coupled = 200;
  double kappa_thinned = 3.5;
  double ks_bound = 0.05;
  bool finer_diagnostic = true;
};
std::vector<CriterionResult> cle_geometry(const CleParams& p, const RunContext& ctx);

struct MarkedParams {
  double gamma = 1.9;
  int radius = 64;
  int ensembles = 2;
  std::size_t point_draws = 100000;
  std::size_t hitting_draws = 10000;
  int categories = 5;
  double sigmas = 3.0;
};
CriterionResult marked_points(const MarkedParams& p, const RunContext& ctx);

struct SweepParams {
  std::vector<double> gammas{1.85, 1.95, 1.99};
  std::size_t samples = 100000;
  double delta = 0.05;
  double dt = 0.05;
  double horizon = 1000.0;
  int bootstrap = 50;
  double z = 2.576;
};
std::vector<CriterionResult> gamma_sweep(const SweepParams& p, const RunContext& ctx);

struct EndToEndParams {
  double gamma = 2.0;
  int radius = 512;
  int strip_height = 128;
  std::size_t samples = 2000;
  double ks_bound = 0.1;
};
std::vector<CriterionResult> end_to_end(const EndToEndParams& p, const RunContext& ctx);

struct CalibrationParams {
  int repetitions = 20;
  double alpha = 0.01;
  double disk_gamma = 1.9;
  int disk_strip_height = 16;
  std::size_t disks_per_arm = 600;
  std::size_t weighted_samples = 2000;
  std::size_t sequence_samples = 10000;
  double sequence_delta = 0.05;
};
std::vector<CriterionResult> null_power(const CalibrationParams& p, const RunContext& ctx);

}  // namespace criteria

/// One line per criterion: "[PASS] <id> <title>: <detail>" ([FAIL] likewise;
/// lower case for non-gating diagnostics).
std::string format_result(const CriterionResult& r);
/// JSON object; the wall time is left out unless asked for, so reports stay
/// bit-identical across reruns.
std::string result_json(const CriterionResult& r, bool with_time = false);

}  // namespace lqglab
