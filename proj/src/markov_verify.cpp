#include "lqglab/markov_verify.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "lqglab/stats.hpp"

namespace lqglab {

DiscreteModel DiscreteModel::independent(const Eigen::MatrixXd& marginals, const Eigen::VectorXd& weight) {
  DiscreteModel m;
  m.variables = static_cast<int>(marginals.rows());
  m.alphabet = static_cast<int>(marginals.cols());
  m.weight = weight;
  std::size_t total = 1;
  for (int j = 0; j < m.variables; ++j) total *= static_cast<std::size_t>(m.alphabet);
  m.joint.resize(static_cast<Eigen::Index>(total));
  for (std::size_t c = 0; c < total; ++c) {
    double p = 1.0;
    for (int j = 0; j < m.variables; ++j) p *= marginals(j, m.value(c, j));
    m.joint(static_cast<Eigen::Index>(c)) = p;
  }
  m.validate();
  return m;
}

DiscreteModel DiscreteModel::random(int variables, int alphabet, Rng& rng) {
  DiscreteModel m;
  m.variables = variables;
  m.alphabet = alphabet;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::size_t total = 1;
  for (int j = 0; j < variables; ++j) total *= static_cast<std::size_t>(alphabet);
  m.joint.resize(static_cast<Eigen::Index>(total));
  for (auto& p : m.joint) p = unif(rng) < 0.2 ? 0.0 : unif(rng);
  if (!(m.joint.sum() > 0.0)) m.joint(0) = 1.0;
  m.joint /= m.joint.sum();
  m.weight.resize(alphabet);
  for (auto& w : m.weight) w = 0.1 + 4.9 * unif(rng);
  m.validate();
  return m;
}

void DiscreteModel::validate() const {
  if (variables < 1 || alphabet < 1) throw ConfigError("DiscreteModel: need at least one variable and one atom");
  std::size_t total = 1;
  for (int j = 0; j < variables; ++j) total *= static_cast<std::size_t>(alphabet);
  if (static_cast<std::size_t>(joint.size()) != total || weight.size() != alphabet) {
    throw ConfigError("DiscreteModel: table sizes do not match variables/alphabet");
  }
  if ((joint.array() < 0.0).any() || std::abs(joint.sum() - 1.0) > 1e-12) {
    throw ConfigError("DiscreteModel: joint law must be a probability vector");
  }
  if ((weight.array() < 0.0).any()) throw ConfigError("DiscreteModel: weights must be nonnegative");
}

int DiscreteModel::value(std::size_t config, int j) const {
  for (int i = 0; i < j; ++i) config /= static_cast<std::size_t>(alphabet);
  return static_cast<int>(config % static_cast<std::size_t>(alphabet));
}

namespace {

std::size_t config_with(const DiscreteModel& m, const std::vector<int>& x) {
  std::size_t c = 0, stride = 1;
  for (int j = 0; j < m.variables; ++j) {
    c += static_cast<std::size_t>(x[static_cast<std::size_t>(j)]) * stride;
    stride *= static_cast<std::size_t>(m.alphabet);
  }
  return c;
}

void check_query(const DiscreteModel& m, int k, const std::vector<int>& others) {
  if (k < 0 || k >= m.variables) throw ConfigError("posterior: index k out of range");
  if (static_cast<int>(others.size()) != m.variables) throw ConfigError("posterior: need one value per variable");
  for (int j = 0; j < m.variables; ++j) {
    if (j != k && (others[static_cast<std::size_t>(j)] < 0 || others[static_cast<std::size_t>(j)] >= m.alphabet)) {
      throw ConfigError("posterior: conditioning value outside the alphabet");
    }
  }
}

}  // namespace

Eigen::VectorXd size_biased_posterior(const DiscreteModel& model, int k, const std::vector<int>& others) {
  check_query(model, k, others);
  std::vector<int> x = others;
  Eigen::VectorXd prior(model.alphabet);
  for (int a = 0; a < model.alphabet; ++a) {
    x[static_cast<std::size_t>(k)] = a;
    prior(a) = model.joint(static_cast<Eigen::Index>(config_with(model, x)));
  }
  if (!(prior.sum() > 0.0)) throw DomainError("posterior: conditioning values have probability zero");
  prior /= prior.sum();
  double rest = 0.0;
  for (int j = 0; j < model.variables; ++j) {
    if (j != k) rest += model.weight(others[static_cast<std::size_t>(j)]);
  }
  Eigen::VectorXd rn(model.alphabet);
  for (int a = 0; a < model.alphabet; ++a) {
    const double denom = model.weight(a) + rest;
    rn(a) = denom > 0.0 ? model.weight(a) / denom : 0.0;
  }
  const double normaliser = prior.dot(rn);
  if (!(normaliser > 0.0)) throw DomainError("posterior: the event {J = k} has conditional probability zero");
  return prior.cwiseProduct(rn) / normaliser;
}

Eigen::VectorXd size_biased_posterior_enumerated(const DiscreteModel& model, int k, const std::vector<int>& others) {
  check_query(model, k, others);
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(model.alphabet);
  for (std::size_t c = 0; c < model.configurations(); ++c) {
    const double p = model.joint(static_cast<Eigen::Index>(c));
    if (p == 0.0) continue;
    bool match = true;
    double total_f = 0.0;
    for (int j = 0; j < model.variables; ++j) {
      const int v = model.value(c, j);
      total_f += model.weight(v);
      if (j != k && v != others[static_cast<std::size_t>(j)]) match = false;
    }
    if (!match || total_f == 0.0) continue;
    const int v = model.value(c, k);
    mass(v) += p * model.weight(v) / total_f;  // P[X = c, J = k]
  }
  if (!(mass.sum() > 0.0)) throw DomainError("posterior: the event {J = k} has conditional probability zero");
  return mass / mass.sum();
}

std::string TestReport::json() const {
  nlohmann::json j = {{"test", test},     {"statistic", statistic}, {"threshold", threshold},
                      {"pass", pass},     {"n", n},                 {"seeds", seeds}};
  if (!notes.empty()) j["notes"] = notes;
  return j.dump();
}

TestReport conditional_disk_test(const std::vector<SurfaceObservation>& inner,
                                 const std::vector<SurfaceObservation>& reference, const DiskTestOptions& opts,
                                 Rng& rng) {
  TestReport report;
  report.test = "conditional_disk";
  report.threshold = opts.alpha;
  report.n = inner.size();
  if (inner.empty() || reference.empty()) {
    report.notes.push_back("empty input");
    return report;
  }
  const Eigen::Index dims = inner.front().observables.size();
  double base = std::numeric_limits<double>::infinity();
  for (const auto* set : {&inner, &reference}) {
    for (const auto& s : *set) {
      if (!(s.boundary_length > 0.0)) throw ConfigError("conditional_disk_test: boundary lengths must be positive");
      if (s.observables.size() != dims) throw ConfigError("conditional_disk_test: observable dimension mismatch");
      base = std::min(base, s.boundary_length);
    }
  }
  const double log_ratio = std::log(opts.bin_ratio);
  auto bin_of = [&](double length) { return static_cast<long>(std::floor(std::log(length / base) / log_ratio + 1e-12)); };
  std::map<long, std::pair<std::vector<const SurfaceObservation*>, std::vector<const SurfaceObservation*>>> bins;
  for (const auto& s : inner) bins[bin_of(s.boundary_length)].first.push_back(&s);
  for (const auto& s : reference) bins[bin_of(s.boundary_length)].second.push_back(&s);

  std::vector<double> pvalues;
  for (const auto& [bin, arms] : bins) {
    const auto& [a, b] = arms;
    if (a.size() < opts.min_per_bin || b.size() < opts.min_per_bin) {
      report.notes.push_back("bin " + std::to_string(bin) + " skipped (" + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()) + " samples)");
      continue;
    }
    for (Eigen::Index o = 0; o < dims; ++o) {
      std::vector<double> xa, wa, xb, wb;
      for (const auto* s : a) {
        xa.push_back(s->observables(o));
        wa.push_back(s->weight);
      }
      for (const auto* s : b) {
        xb.push_back(s->observables(o));
        wb.push_back(s->weight);
      }
      const stats::Weighted sa{xa, wa}, sb{xb, wb};
      const double d = stats::ks_distance(sa, sb);
      pvalues.push_back(stats::ks_pvalue(d, sa.effective_size(), sb.effective_size()));
    }
  }

  // Sibling independence: first two surfaces of every group.
  std::map<long, std::vector<const SurfaceObservation*>> groups;
  for (const auto& s : inner) {
    if (s.group >= 0) groups[s.group].push_back(&s);
  }
  std::vector<std::pair<const SurfaceObservation*, const SurfaceObservation*>> pairs;
  for (const auto& [g, members] : groups) {
    if (members.size() >= 2) pairs.emplace_back(members[0], members[1]);
  }
  if (pairs.size() >= 20) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(pairs.size()), dims), y(x.rows(), dims);
    for (std::size_t r = 0; r < pairs.size(); ++r) {
      x.row(static_cast<Eigen::Index>(r)) = pairs[r].first->observables.transpose();
      y.row(static_cast<Eigen::Index>(r)) = pairs[r].second->observables.transpose();
    }
    pvalues.push_back(stats::distance_correlation_pvalue(x, y, opts.permutations, rng));
  } else if (!groups.empty()) {
    report.notes.push_back("fewer than 20 sibling pairs; independence check skipped");
  }

  if (pvalues.empty()) {
    report.notes.push_back("no populated bin");
    return report;
  }
  const double min_p = *std::min_element(pvalues.begin(), pvalues.end());
  report.statistic = std::min(1.0, min_p * static_cast<double>(pvalues.size()));
  report.pass = report.statistic > opts.alpha;
  return report;
}

TestReport weighted_law_test(std::span<const double> sample, std::span<const double> sample_weights,
                             std::span<const double> reference, std::span<const double> reference_weights,
                             double alpha) {
  const stats::Weighted a{sample, sample_weights}, b{reference, reference_weights};
  TestReport report;
  report.test = "weighted_law";
  report.statistic = stats::ks_distance(a, b);
  report.threshold = stats::ks_critical(alpha, a.effective_size(), b.effective_size());
  report.pass = report.statistic <= report.threshold;
  report.n = sample.size();
  return report;
}

SequenceDistance sequence_distance(const WeightedEnsemble& a, const WeightedEnsemble& b, std::size_t ranks) {
  SequenceDistance out;
  out.n_a = a.effective_sample_size();
  out.n_b = b.effective_sample_size();
  auto column = [](const WeightedEnsemble& e, std::size_t r) {
    std::vector<double> v(e.size());
    for (std::size_t k = 0; k < e.size(); ++k) v[k] = r < e.samples[k].size() ? e.samples[k][r] : 0.0;
    return v;
  };
  for (std::size_t r = 0; r < ranks; ++r) {
    const auto va = column(a, r), vb = column(b, r);
    const stats::Weighted sa{va, a.weights}, sb{vb, b.weights};
    out.ks.push_back(stats::ks_distance(sa, sb));
    if (r == 0) out.wasserstein1 = stats::wasserstein1(sa, sb);
  }
  return out;
}

TestReport sequence_test(const WeightedEnsemble& a, const WeightedEnsemble& b, double alpha) {
  const SequenceDistance d = sequence_distance(a, b, 1);
  TestReport report;
  report.test = "sequence_rank1";
  report.statistic = d.ks.front();
  report.threshold = stats::ks_critical(alpha, d.n_a, d.n_b);
  report.pass = report.statistic <= report.threshold;
  report.n = a.size();
  return report;
}

}  // namespace lqglab
