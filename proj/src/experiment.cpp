#include "lqglab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "lqglab/cle.hpp"
#include "lqglab/errors.hpp"
#include "lqglab/levy.hpp"
#include "lqglab/quantum_disk.hpp"
#include "lqglab/random.hpp"

namespace lqglab {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

/// Drops a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    if (line[k] == '"') quoted = !quoted;
    if (line[k] == '#' && !quoted) return line.substr(0, k);
  }
  return line;
}

double parse_number(const std::string& key, const std::string& raw) {
  const std::string s = unquote(trim(raw));
  // Accept "1/512" for meshes.
  if (const auto slash = s.find('/'); slash != std::string::npos) {
    return parse_number(key, s.substr(0, slash)) / parse_number(key, s.substr(slash + 1));
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || trim(s.substr(used)).size() != 0) {
    throw ConfigError("config field '" + key + "': expected a number, got '" + s + "'");
  }
  return v;
}

}  // namespace

ConfigFile ConfigFile::parse(std::string_view text) {
  ConfigFile cfg;
  std::istringstream in{std::string(text)};
  std::string line, section;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[' && body.back() == ']' && body.find('=') == std::string::npos) {
      section = trim(body.substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(number) + ": empty key");
    cfg.values_[section.empty() ? key : section + "." + key] = trim(body.substr(eq + 1));
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string ConfigFile::text(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : unquote(it->second);
}

double ConfigFile::number(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_number(key, it->second);
}

long ConfigFile::integer(const std::string& key, long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const double v = parse_number(key, it->second);
  if (v != std::floor(v) || std::abs(v) > 9.0e15) {
    throw ConfigError("config field '" + key + "': expected an integer, got '" + it->second + "'");
  }
  return static_cast<long>(v);
}

bool ConfigFile::flag(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string v = unquote(it->second);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config field '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<double> ConfigFile::numbers(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::string s = trim(it->second);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw ConfigError("config field '" + key + "': unterminated list");
    s = s.substr(1, s.size() - 2);
  }
  std::vector<double> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!trim(item).empty()) out.push_back(parse_number(key, item));
  }
  if (out.empty()) throw ConfigError("config field '" + key + "': empty list");
  return out;
}

std::uint64_t ConfigFile::hash() const {
  std::string canonical;
  for (const auto& [k, v] : values_) {
    if (k == "output") continue;  // where results go does not change them
    canonical += k + "=" + unquote(v) + "\n";
  }
  return fnv1a(canonical);
}

std::string hash_hex(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

const std::vector<ExperimentInfo>& experiment_catalogue() {
  static const std::vector<ExperimentInfo> list{
      {"lemma37_exact", "size-biased posterior formula vs brute-force enumeration on random discrete models", {"C1"}},
      {"levy_laws", "stable marginal law, first passage and the reweighted largest-jump law", {"C2", "C3", "C4"}},
      {"gff_covariance", "discrete GFF covariance vs the exact Green function", {"C5"}},
      {"gmc_scaling", "GMC shift covariance and mesh stability of the total mass", {"C6"}},
      {"cle_geometry", "loop-ensemble structure, monotone coupling and origin-loop area stability", {"C7"}},
      {"weighted_law", "marked-point laws: loop index of area-sampled points and first hitting indices", {"C8"}},
      {"gamma_sweep", "rank-1 jump-law distances to the beta = 3/2 law along gamma -> 2", {"C9"}},
      {"thm12_endtoend", "largest CLE_4 loop length on a critical disk vs the stable target", {"C10"}},
      {"conditional_independence", "null and power calibration of the statistical tests", {"C11"}},
  };
  return list;
}

ExperimentConfig ExperimentConfig::from(const ConfigFile& file) {
  ExperimentConfig c;
  c.raw = file;
  c.experiment = file.text("experiment", "");
  if (c.experiment.empty()) throw ConfigError("config field 'experiment': missing");
  const auto& cat = experiment_catalogue();
  if (std::none_of(cat.begin(), cat.end(), [&](const ExperimentInfo& e) { return e.name == c.experiment; })) {
    throw ConfigError("config field 'experiment': unknown experiment '" + c.experiment + "'");
  }
  c.gamma = file.numbers("gamma", {});
  c.mesh = file.number("mesh", 0.0);
  const long n = file.integer("samples", 0);
  if (n < 0) throw ConfigError("config field 'samples': must be positive");
  c.samples = static_cast<std::size_t>(n);
  const std::string seed = file.text("seed", "1");
  try {
    std::size_t used = 0;
    c.seed = std::stoull(seed, &used, 0);
    if (used != seed.size()) throw ConfigError("");
  } catch (const std::exception&) {
    throw ConfigError("config field 'seed': expected an unsigned 64-bit integer, got '" + seed + "'");
  }
  c.delta = file.number("delta", 0.0);
  c.dt = file.number("dt", 0.0);
  c.horizon = file.number("horizon", 0.0);
  c.output = file.text("output", "runs");
  return c;
}

namespace {

using Level = Diagnostic::Level;

std::string num(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

std::vector<Diagnostic> validate(const ExperimentConfig& c) {
  std::vector<Diagnostic> out;
  auto add = [&](Level l, const std::string& field, const std::string& msg) { out.push_back({l, field, msg}); };
  const std::string& e = c.experiment;
  const double gamma_lo = gamma_lower_bound();
  for (double g : c.gamma) {
    if (e == "gmc_scaling") {
      if (!(g > 0.0 && g <= 2.0)) add(Level::error, "gamma", "gamma = " + num(g) + " outside (0, 2]");
      continue;
    }
    if (!(g > gamma_lo && g <= 2.0)) {
      add(Level::error, "gamma", "gamma = " + num(g) + " outside (sqrt(8/3), 2] = (" + num(gamma_lo) + ", 2]");
      continue;
    }
    add(Level::info, "gamma", "gamma = " + num(g) + " -> kappa = gamma^2 = " + num(g * g) + ", beta = 4/gamma^2 + 1/2 = " +
                                  num(beta_of_gamma(g)) + ", central charge " + num(central_charge(g * g)));
  }
  if ((e == "gmc_scaling" || e == "weighted_law" || e == "thm12_endtoend" || e == "cle_geometry" ||
       e == "conditional_independence") &&
      c.gamma.size() > 1) {
    add(Level::error, "gamma", "this experiment takes a single gamma");
  }
  if (e == "levy_laws") {
    for (double b : c.raw.numbers("params.betas", {1.5, 1.75})) {
      if (!(b >= 1.5 && b < 2.0)) add(Level::error, "params.betas", "beta = " + num(b) + " outside [3/2, 2)");
    }
  }
  if (c.mesh != 0.0) {
    if (!(c.mesh > 0.0)) {
      add(Level::error, "mesh", "mesh must be positive");
    } else if (1.0 / c.mesh < 8.0) {
      add(Level::error, "mesh", "mesh " + num(c.mesh) + " leaves fewer than 8 cells per direction");
    } else if (std::abs(1.0 / c.mesh - std::round(1.0 / c.mesh)) > 1e-9) {
      add(Level::error, "mesh", "mesh must be 1/n for an integer n");
    }
  }
  if (e == "thm12_endtoend") {
    const double h = c.mesh > 0.0 ? c.mesh : 1.0 / 512;
    if (h > 1.0 / 128) {
      add(Level::warning, "mesh", "h = 1/" + num(std::round(1.0 / h)) +
                                      " is coarser than the validated envelope h <= 1/128 for the end-to-end comparison");
    }
  }
  if (c.delta != 0.0) {
    if (!(c.delta > 0.0 && c.delta < 1.0)) {
      add(Level::error, "delta", "delta must lie in (0, 1)");
    } else if (e == "levy_laws" && c.delta > 1e-2) {
      add(Level::warning, "delta", "delta = " + num(c.delta) + " above the validated envelope delta <= 0.01");
    } else if (c.delta > 0.05) {
      add(Level::warning, "delta", "delta = " + num(c.delta) + " above the validated envelope delta <= 0.05");
    }
  }
  if (c.dt != 0.0) {
    if (!(c.dt > 0.0)) {
      add(Level::error, "dt", "dt must be positive");
    } else if (c.dt > 0.05) {
      add(Level::warning, "dt", "dt = " + num(c.dt) + " above the validated envelope dt <= 0.05");
    }
  }
  if (c.horizon != 0.0) {
    if (!(c.horizon > 0.0)) {
      add(Level::error, "horizon", "horizon must be positive");
    } else if (c.horizon < 100.0) {
      add(Level::warning, "horizon", "horizon below 100 leaves many passages unresolved");
    }
  }
  if (e == "gamma_sweep") {
    for (double g : c.gamma) {
      if (g == 2.0) add(Level::warning, "gamma", "gamma = 2 is the reference law itself");
    }
  }

  // Rough cost estimates (single core).
  const double n = static_cast<double>(c.samples);
  double seconds = 0.0, megabytes = 50.0;
  if (e == "levy_laws") {
    const double N = n > 0 ? n : 1e5;
    seconds = N * 1e-3;
    megabytes += N * 16 * 8 * 2 / 1e6;
  } else if (e == "gamma_sweep") {
    const double N = n > 0 ? n : 1e5;
    seconds = N * 5e-4 * 5;
    megabytes += N * 7 * 8 * 5 / 1e6;
  } else if (e == "thm12_endtoend") {
    const double R = c.mesh > 0.0 ? 1.0 / c.mesh : 512.0;
    const double N = n > 0 ? n : 2000;
    seconds = N * 1e-6 * R * R * std::log(R);
    megabytes += R * R * 8 * 30 / 1e6;
  } else if (e == "lemma37_exact") {
    seconds = 1.0;
  } else if (e == "gff_covariance") {
    seconds = (n > 0 ? n : 2e4) * 2e-4;
  } else {
    seconds = 60.0;
  }
  add(Level::info, "estimate",
      "roughly " + num(std::round(seconds)) + " s and " + num(std::round(megabytes)) + " MB on one core");
  return out;
}

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
  return std::any_of(diagnostics.begin(), diagnostics.end(), [](const Diagnostic& d) { return d.level == Level::error; });
}

std::string format_diagnostic(const Diagnostic& d) {
  const char* tag = d.level == Level::error ? "error" : d.level == Level::warning ? "warning" : "info";
  return std::string(tag) + " [" + d.field + "] " + d.message;
}

bool RunReport::pass() const {
  return std::all_of(results.begin(), results.end(), [](const CriterionResult& r) { return !r.gating || r.pass; });
}

namespace {

std::vector<CriterionResult> dispatch(const ExperimentConfig& c, const RunContext& ctx) {
  const ConfigFile& f = c.raw;
  const std::string& e = c.experiment;
  auto radius = [&](int fallback) { return c.mesh > 0.0 ? static_cast<int>(std::lround(1.0 / c.mesh)) : fallback; };
  auto count = [&](std::size_t fallback) { return c.samples > 0 ? c.samples : fallback; };
  auto gamma = [&](double fallback) { return c.gamma.empty() ? fallback : c.gamma.front(); };
  if (e == "lemma37_exact") {
    criteria::LemmaParams p;
    p.models = static_cast<int>(count(static_cast<std::size_t>(p.models)));
    p.max_variables = static_cast<int>(f.integer("params.max_variables", p.max_variables));
    p.max_atoms = static_cast<int>(f.integer("params.max_atoms", p.max_atoms));
    return {criteria::lemma_exactness(p, ctx)};
  }
  if (e == "levy_laws") {
    criteria::LevyParams p;
    p.samples = count(p.samples);
    p.betas = f.numbers("params.betas", p.betas);
    p.lambdas = f.numbers("params.lambdas", p.lambdas);
    p.qs = f.numbers("params.qs", p.qs);
    p.blocks = static_cast<int>(f.integer("params.blocks", p.blocks));
    if (c.delta > 0.0) p.delta = c.delta;
    if (c.dt > 0.0) p.dt = c.dt;
    if (c.horizon > 0.0) p.horizon = c.horizon;
    if (!c.gamma.empty()) p.passage_beta = beta_of_gamma(c.gamma.front());
    return criteria::levy_laws(p, ctx);
  }
  if (e == "gff_covariance") {
    criteria::GffParams p;
    p.grid = radius(p.grid);
    p.samples = count(p.samples);
    return {criteria::gff_covariance(p, ctx)};
  }
  if (e == "gmc_scaling") {
    criteria::GmcParams p;
    p.gamma = gamma(p.gamma);
    p.coarse_radius = radius(p.coarse_radius);
    p.samples = count(p.samples);
    return criteria::gmc_scaling(p, ctx);
  }
  if (e == "cle_geometry") {
    criteria::CleParams p;
    p.kappa = gamma(2.0) * gamma(2.0);
    p.coarse_radius = radius(p.coarse_radius);
    p.samples = count(p.samples);
    p.coupled = static_cast<std::size_t>(f.integer("params.coupled", static_cast<long>(p.coupled)));
    p.kappa_thinned = f.number("params.kappa_thinned", p.kappa_thinned);
    p.finer_diagnostic = f.flag("params.finer_diagnostic", p.finer_diagnostic);
    return criteria::cle_geometry(p, ctx);
  }
  if (e == "weighted_law") {
    criteria::MarkedParams p;
    p.gamma = gamma(p.gamma);
    p.radius = radius(p.radius);
    p.point_draws = count(p.point_draws);
    p.hitting_draws = static_cast<std::size_t>(f.integer("params.hitting_draws", static_cast<long>(p.hitting_draws)));
    p.ensembles = static_cast<int>(f.integer("params.ensembles", p.ensembles));
    return {criteria::marked_points(p, ctx)};
  }
  if (e == "gamma_sweep") {
    criteria::SweepParams p;
    if (!c.gamma.empty()) p.gammas = c.gamma;
    p.samples = count(p.samples);
    if (c.delta > 0.0) p.delta = c.delta;
    if (c.dt > 0.0) p.dt = c.dt;
    if (c.horizon > 0.0) p.horizon = c.horizon;
    p.bootstrap = static_cast<int>(f.integer("params.bootstrap", p.bootstrap));
    return criteria::gamma_sweep(p, ctx);
  }
  if (e == "thm12_endtoend") {
    criteria::EndToEndParams p;
    p.gamma = gamma(p.gamma);
    p.radius = radius(p.radius);
    p.strip_height = static_cast<int>(f.integer("params.strip_height", std::max(16, p.radius / 4)));
    p.samples = count(p.samples);
    return criteria::end_to_end(p, ctx);
  }
  criteria::CalibrationParams p;
  p.disk_gamma = gamma(p.disk_gamma);
  p.repetitions = static_cast<int>(f.integer("params.repetitions", p.repetitions));
  if (c.samples > 0) p.disks_per_arm = c.samples;
  p.sequence_samples = static_cast<std::size_t>(f.integer("params.sequence_samples", static_cast<long>(p.sequence_samples)));
  return criteria::null_power(p, ctx);
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config, std::ostream* log) {
  const auto diagnostics = validate(config);
  if (has_errors(diagnostics)) {
    std::string msg = "invalid configuration:";
    for (const auto& d : diagnostics) {
      if (d.level == Level::error) msg += "\n  " + format_diagnostic(d);
    }
    throw ConfigError(msg);
  }
  const char* env = std::getenv("LQGLAB_OUTPUT_ROOT");
  const std::filesystem::path root = env && *env ? std::filesystem::path(env) : std::filesystem::path(config.output);
  const std::string hex = hash_hex(config.hash());

  RunReport report;
  report.experiment = config.experiment;
  report.manifest_hash = hex;
  report.directory = root / (config.experiment + "-" + hex);
  OutputSink sink(report.directory, hex);
  Checkpointer checkpoints(report.directory / "checkpoints", config.hash());
  RunContext ctx;
  ctx.seed = config.seed;
  ctx.out = &sink;
  ctx.checkpoints = &checkpoints;
  ctx.log = log;

  const auto start = std::chrono::steady_clock::now();
  report.results = dispatch(config, ctx);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  nlohmann::ordered_json body = {{"experiment", config.experiment},
                                 {"config_hash", hex},
                                 {"seed_root", config.seed},
                                 {"pass", report.pass()}};
  body["criteria"] = nlohmann::ordered_json::array();
  for (const auto& r : report.results) body["criteria"].push_back(nlohmann::ordered_json::parse(result_json(r)));
  sink.json("report.json", body.dump());

  nlohmann::ordered_json manifest = {{"format_version", 1},
                                     {"experiment", config.experiment},
                                     {"config_hash", hex},
                                     {"manifest", hex},
                                     {"seed_root", config.seed},
                                     {"wall_seconds", report.wall_seconds}};
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config.raw.values()) cfg[k] = v;
  manifest["config"] = cfg;
  manifest["criteria"] = nlohmann::ordered_json::array();
  for (const auto& r : report.results) {
    manifest["criteria"].push_back({{"id", r.id}, {"gating", r.gating}, {"pass", r.pass}, {"seconds", r.seconds}});
  }
  manifest["outputs"] = nlohmann::ordered_json::array();
  for (const auto& name : sink.files()) {
    std::ifstream in(report.directory / name, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    manifest["outputs"].push_back({{"file", name}, {"fnv1a", hash_hex(fnv1a(buf.str()))}});
  }
  std::ofstream out(report.directory / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << '\n';
  return report;
}

}  // namespace lqglab
