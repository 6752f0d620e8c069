#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "lqglab/errors.hpp"
#include "lqglab/experiment.hpp"
#include "lqglab/random.hpp"

using namespace lqglab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("lqglab-test-" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct OutputRoot {
  explicit OutputRoot(const fs::path& p) { setenv("LQGLAB_OUTPUT_ROOT", p.c_str(), 1); }
  ~OutputRoot() { unsetenv("LQGLAB_OUTPUT_ROOT"); }
};

std::vector<Diagnostic> diagnose(const std::string& text) { return validate(ExperimentConfig::from(ConfigFile::parse(text))); }

bool mentions(const std::vector<Diagnostic>& ds, Diagnostic::Level level, const std::string& needle) {
  for (const auto& d : ds)
    if (d.level == level && (d.message.find(needle) != std::string::npos || d.field == needle)) return true;
  return false;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int exit_code(const std::string& args) {
  const int status = std::system((std::string(LQGLAB_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config file parsing") {
  const ConfigFile f = ConfigFile::parse(R"(# comment
experiment = "gamma_sweep"   # trailing comment
gamma = [1.85, 1.95, 1.99]
mesh = 1/512
samples = 100000
seed = 0xFFFFFFFFFFFFFFFF

[params]
bootstrap = 50
finer = false
)");
  CHECK(f.text("experiment", "") == "gamma_sweep");
  CHECK(f.numbers("gamma", {}) == std::vector<double>{1.85, 1.95, 1.99});
  CHECK(f.number("mesh", 0.0) == 1.0 / 512);
  CHECK(f.integer("samples", 0) == 100000);
  CHECK(f.integer("params.bootstrap", 0) == 50);
  CHECK(f.flag("params.finer", true) == false);
  CHECK(f.number("missing", 2.5) == 2.5);
  const ExperimentConfig c = ExperimentConfig::from(f);
  CHECK(c.seed == 0xFFFFFFFFFFFFFFFFULL);
  CHECK(c.samples == 100000);

  CHECK_THROWS_AS(ConfigFile::parse("no equals sign"), ConfigError);
  CHECK_THROWS_AS(ConfigFile::parse("gamma = [1, 2").numbers("gamma", {}), ConfigError);
  CHECK_THROWS_AS(ConfigFile::parse("gamma = abc").number("gamma", 0.0), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from(ConfigFile::parse("gamma = 2")), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from(ConfigFile::parse("experiment = \"nope\"")), ConfigError);
  try {
    ExperimentConfig::from(ConfigFile::parse("experiment = \"levy_laws\"\nseed = -3x"));
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("seed") != std::string::npos);
  }
}

TEST_CASE("config hash ignores the output directory and key order") {
  const auto a = ConfigFile::parse("experiment = \"lemma37_exact\"\nsamples = 10\noutput = \"a\"");
  const auto b = ConfigFile::parse("samples = 10\nexperiment = \"lemma37_exact\"\noutput = \"b\"");
  const auto c = ConfigFile::parse("samples = 11\nexperiment = \"lemma37_exact\"");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  CHECK(hash_hex(0x1234).size() == 16);
}

TEST_CASE("validation diagnostics") {
  SUBCASE("gamma above 2 is a named range violation") {
    const auto ds = diagnose("experiment = \"cle_geometry\"\ngamma = 2.1");
    CHECK(has_errors(ds));
    CHECK(mentions(ds, Diagnostic::Level::error, "gamma"));
  }
  SUBCASE("gamma = 2 echoes kappa = 4 and beta = 3/2") {
    const auto ds = diagnose("experiment = \"thm12_endtoend\"\ngamma = 2");
    CHECK_FALSE(has_errors(ds));
    CHECK(mentions(ds, Diagnostic::Level::info, "kappa = gamma^2 = 4,"));
    CHECK(mentions(ds, Diagnostic::Level::info, "= 1.5,"));
  }
  SUBCASE("coarse end-to-end mesh warns") {
    const auto ds = diagnose("experiment = \"thm12_endtoend\"\nmesh = 1/16");
    CHECK_FALSE(has_errors(ds));
    CHECK(mentions(ds, Diagnostic::Level::warning, "mesh"));
  }
  SUBCASE("envelope and range checks") {
    CHECK(mentions(diagnose("experiment = \"levy_laws\"\ndelta = 0.1"), Diagnostic::Level::warning, "delta"));
    CHECK(mentions(diagnose("experiment = \"gamma_sweep\"\ndt = 0.2"), Diagnostic::Level::warning, "dt"));
    CHECK(has_errors(diagnose("experiment = \"levy_laws\"\n[params]\nbetas = [1.5, 2.0]")));
    CHECK(has_errors(diagnose("experiment = \"gff_covariance\"\nmesh = 1/4")));
    CHECK(has_errors(diagnose("experiment = \"weighted_law\"\ngamma = [1.9, 2]")));
    CHECK(has_errors(diagnose("experiment = \"cle_geometry\"\ngamma = 1.5")));
    CHECK_FALSE(has_errors(diagnose("experiment = \"gmc_scaling\"\ngamma = 1.5")));
    CHECK(mentions(diagnose("experiment = \"gff_covariance\""), Diagnostic::Level::info, "estimate"));
  }
}

TEST_CASE("every catalogued experiment has a config that validates") {
  for (const auto& e : experiment_catalogue()) {
    const fs::path p = fs::path(LQGLAB_CONFIG_DIR) / (e.name + ".toml");
    REQUIRE(fs::exists(p));
    const auto config = ExperimentConfig::from(ConfigFile::load(p));
    CHECK(config.experiment == e.name);
    CHECK_FALSE(has_errors(validate(config)));
  }
}

TEST_CASE("runs are reproducible and tagged with the manifest hash") {
  TempDir tmp("determinism");
  const OutputRoot root(tmp.path);
  const auto config = ExperimentConfig::from(ConfigFile::parse("experiment = \"lemma37_exact\"\nsamples = 20\nseed = 5"));
  const RunReport first = run_experiment(config);
  CHECK(first.pass());
  REQUIRE(first.results.size() == 1);
  CHECK(first.results[0].detail.rfind("pass 20/20", 0) == 0);
  CHECK(first.directory == tmp.path / ("lemma37_exact-" + first.manifest_hash));

  std::map<std::string, std::string> before;
  for (const auto& entry : fs::directory_iterator(first.directory))
    if (entry.is_regular_file()) before[entry.path().filename().string()] = slurp(entry.path());
  fs::remove_all(first.directory);
  const RunReport second = run_experiment(config);
  for (const auto& [name, content] : before) {
    const std::string again = slurp(second.directory / name);
    if (name == "manifest.json") {
      auto a = nlohmann::json::parse(content), b = nlohmann::json::parse(again);
      CHECK(a["outputs"] == b["outputs"]);
      CHECK(a["config_hash"] == b["config_hash"]);
    } else {
      CHECK_MESSAGE(fnv1a(content) == fnv1a(again), name);
    }
  }
  CHECK(slurp(second.directory / "lemma37.csv").rfind("# manifest=" + second.manifest_hash + "\n", 0) == 0);
  const auto report = nlohmann::json::parse(slurp(second.directory / "report.json"));
  CHECK(report["manifest"] == second.manifest_hash);
  const auto manifest = nlohmann::json::parse(slurp(second.directory / "manifest.json"));
  CHECK(manifest["seed_root"] == 5);
  CHECK(manifest.contains("wall_seconds"));
  CHECK(manifest["criteria"][0]["pass"] == true);

  CHECK_THROWS_AS(run_experiment(ExperimentConfig::from(ConfigFile::parse("experiment = \"cle_geometry\"\ngamma = 2.5"))),
                  ConfigError);
}

TEST_CASE("checkpointed sampling resumes after an interruption") {
  TempDir tmp("checkpoint");
  auto sample = [](std::size_t k) { return std::vector<double>{static_cast<double>(k), std::sqrt(static_cast<double>(k))}; };
  Checkpointer full(tmp.path / "a", 42);
  const auto expected = full.run("s", 1000, 256, sample);

  Checkpointer ck(tmp.path / "b", 42);
  std::size_t calls = 0;
  CHECK_THROWS(ck.run("s", 1000, 256, [&](std::size_t k) {
    if (k == 600) throw std::runtime_error("interrupted");
    ++calls;
    return sample(k);
  }));
  CHECK(calls == 600);
  calls = 0;
  const auto resumed = ck.run("s", 1000, 256, [&](std::size_t k) {
    ++calls;
    return sample(k);
  });
  CHECK(calls == 1000 - 512);
  CHECK(resumed == expected);

  // A checkpoint from another configuration is ignored.
  Checkpointer other(tmp.path / "b", 43);
  calls = 0;
  other.run("s", 1000, 256, [&](std::size_t k) {
    ++calls;
    return sample(k);
  });
  CHECK(calls == 1000);
}

TEST_CASE("per-sample seeds depend only on root, tag and index") {
  CHECK(derive_seed(1, "x", 5) == derive_seed(1, "x", 5));
  CHECK(derive_seed(1, "x", 5) != derive_seed(2, "x", 5));
  CHECK(derive_seed(1, "x", 5) != derive_seed(1, "y", 5));
  CHECK(derive_seed(1, "x", 5) != derive_seed(1, "x", 6));
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("command line exit codes") {
  TempDir tmp("cli");
  const OutputRoot root(tmp.path);
  const fs::path good = tmp.path / "good.toml", bad = tmp.path / "bad.toml", failing = tmp.path / "failing.toml";
  std::ofstream(good) << "experiment = \"lemma37_exact\"\nsamples = 5\n";
  std::ofstream(bad) << "experiment = \"gmc_scaling\"\ngamma = 2.1\n";
  // Listed away from 2, the distances to the beta = 3/2 law grow instead of shrinking.
  std::ofstream(failing) << "experiment = \"gamma_sweep\"\ngamma = [1.99, 1.85]\nsamples = 2000\n";
  CHECK(exit_code("list-experiments") == 0);
  CHECK(exit_code("validate " + good.string()) == 0);
  CHECK(exit_code("run -q " + good.string()) == 0);
  CHECK(exit_code("validate " + bad.string()) == 2);
  CHECK(exit_code("run " + bad.string()) == 2);
  CHECK(exit_code("run -q " + failing.string()) == 1);
  CHECK(exit_code("run " + (tmp.path / "missing.toml").string()) == 2);
  CHECK(exit_code("frobnicate") == 2);
}
