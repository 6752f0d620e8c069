#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "lqglab/criteria.hpp"
#include "lqglab/errors.hpp"

namespace lqglab {

OutputSink::OutputSink(std::filesystem::path dir, std::string manifest_hash)
    : dir_(std::move(dir)), hash_(std::move(manifest_hash)) {
  std::filesystem::create_directories(dir_);
}

std::ofstream OutputSink::csv(const std::string& name) {
  std::ofstream out(dir_ / name, std::ios::binary);
  if (!out) throw ConfigError("output: cannot write " + (dir_ / name).string());
  out << "# manifest=" << hash_ << '\n';
  files_.push_back(name);
  return out;
}

void OutputSink::json(const std::string& name, const std::string& body_without_manifest) {
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(body_without_manifest);
  j["manifest"] = hash_;
  std::ofstream out(dir_ / name, std::ios::binary);
  if (!out) throw ConfigError("output: cannot write " + (dir_ / name).string());
  out << j.dump(2) << '\n';
  files_.push_back(name);
}

namespace {

constexpr char kCheckpointMagic[4] = {'L', 'Q', 'G', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
bool get(std::istream& in, T& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v));
}

std::vector<Checkpointer::Row> load_checkpoint(const std::filesystem::path& path, std::uint64_t hash,
                                               std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t stored_hash = 0, stored_count = 0, rows = 0;
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) return {};
  if (!get(in, version) || version != kCheckpointVersion) return {};
  if (!get(in, stored_hash) || stored_hash != hash) return {};
  if (!get(in, stored_count) || stored_count != count) return {};
  if (!get(in, rows) || rows > count) return {};
  std::vector<Checkpointer::Row> out(rows);
  for (auto& row : out) {
    std::uint32_t len = 0;
    if (!get(in, len)) return {};
    row.resize(len);
    if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(len * sizeof(double)))) return {};
  }
  return out;
}

void store_checkpoint(const std::filesystem::path& path, std::uint64_t hash, std::size_t count,
                      const std::vector<Checkpointer::Row>& rows) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("checkpoint: cannot write " + tmp.string());
    out.write(kCheckpointMagic, 4);
    put(out, kCheckpointVersion);
    put(out, hash);
    put(out, static_cast<std::uint64_t>(count));
    put(out, static_cast<std::uint64_t>(rows.size()));
    for (const auto& row : rows) {
      put(out, static_cast<std::uint32_t>(row.size()));
      out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

Checkpointer::Checkpointer(std::filesystem::path dir, std::uint64_t config_hash)
    : dir_(std::move(dir)), hash_(config_hash) {
  std::filesystem::create_directories(dir_);
}

std::vector<Checkpointer::Row> Checkpointer::run(const std::string& name, std::size_t count, std::size_t batch,
                                                 const std::function<Row(std::size_t)>& sample) {
  const std::filesystem::path path = dir_ / (name + ".ckpt");
  std::vector<Row> rows = load_checkpoint(path, hash_, count);
  while (rows.size() < count) {
    const std::size_t end = std::min(count, rows.size() + batch);
    for (std::size_t k = rows.size(); k < end; ++k) rows.push_back(sample(k));
    store_checkpoint(path, hash_, count, rows);
  }
  return rows;
}

std::vector<std::vector<double>> RunContext::samples(const std::string& name, std::size_t count,
                                                     const std::function<std::vector<double>(std::size_t)>& sample) const {
  if (checkpoints) return checkpoints->run(name, count, std::max<std::size_t>(256, count / 40), sample);
  std::vector<std::vector<double>> rows;
  rows.reserve(count);
  for (std::size_t k = 0; k < count; ++k) rows.push_back(sample(k));
  return rows;
}

void RunContext::note(const std::string& line) const {
  if (log) *log << line << std::endl;
}

std::string format_result(const CriterionResult& r) {
  std::ostringstream s;
  if (r.gating) {
    s << (r.pass ? "[PASS] " : "[FAIL] ");
  } else {
    s << (r.pass ? "[pass] " : "[fail] ");
  }
  s << r.id << ' ' << r.title;
  if (!r.gating) s << " (non-gating)";
  s << ": " << r.detail;
  s << " [" << std::fixed << std::setprecision(1) << r.seconds << " s]";
  return s.str();
}

std::string result_json(const CriterionResult& r, bool with_time) {
  nlohmann::ordered_json j = {{"id", r.id},           {"title", r.title},     {"gating", r.gating},
                              {"pass", r.pass},       {"statistic", r.statistic}, {"threshold", r.threshold},
                              {"detail", r.detail}};
  if (with_time) j["seconds"] = r.seconds;
  nlohmann::ordered_json m = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.metrics) m[k] = v;
  j["metrics"] = m;
  return j.dump();
}

}  // namespace lqglab
