#include <cmath>
#include <numbers>

#include "doctest.h"
#include "json.hpp"
#include "lqglab/errors.hpp"
#include "lqglab/markov_verify.hpp"
#include "lqglab/stats.hpp"

using namespace lqglab;

namespace {

// P[X_k = x | X_j = others_j, j != k] straight from the joint table.
Eigen::VectorXd prior_conditional(const DiscreteModel& m, int k, const std::vector<int>& others) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(m.alphabet);
  for (std::size_t c = 0; c < m.configurations(); ++c) {
    bool match = true;
    for (int j = 0; j < m.variables; ++j) match = match && (j == k || m.value(c, j) == others[static_cast<std::size_t>(j)]);
    if (match) p(m.value(c, k)) += m.joint(static_cast<Eigen::Index>(c));
  }
  return p / p.sum();
}

std::vector<double> exponential_quantiles(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = -std::log1p(-(k + 0.5) / static_cast<double>(n));
  return x;
}

double gamma2_cdf(double x) { return x <= 0.0 ? 0.0 : 1.0 - (1.0 + x) * std::exp(-x); }

WeightedEnsemble passage_ensemble(double beta, std::size_t n, std::uint64_t seed) {
  LevyOptions opts;
  opts.delta = 0.05;
  opts.dt = 0.05;
  std::vector<std::pair<std::vector<double>, double>> samples;
  for (std::size_t k = 0; k < n; ++k) {
    Rng rng = make_rng(seed, "passage", k);
    const LevyPath path = sample_levy_path(beta, opts, rng);
    if (!path.tau) continue;
    auto jumps = jumps_before_tau(path);
    if (jumps.size() > 5) jumps.resize(5);
    samples.emplace_back(std::move(jumps), *path.tau);
  }
  return reweight_by_inverse_tau(samples);
}

}  // namespace

TEST_CASE("size-biased posterior with a constant weight is the prior conditional") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    DiscreteModel m = DiscreteModel::random(3, 3, rng);
    m.weight.setConstant(2.5);
    const std::vector<int> others{1, 0, 2};
    for (int k = 0; k < 3; ++k) {
      const Eigen::VectorXd post = size_biased_posterior(m, k, others);
      CHECK((post - prior_conditional(m, k, others)).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("size-biased posterior agrees with enumeration on 100 random models") {
  Rng rng(37);
  std::uniform_int_distribution<int> vars(1, 5), atoms(1, 4);
  int agreeing = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const DiscreteModel m = DiscreteModel::random(vars(rng), atoms(rng), rng);
    double worst = 0.0;
    for (std::size_t c = 0; c < m.configurations(); ++c) {
      if (!(m.joint(static_cast<Eigen::Index>(c)) > 0.0)) continue;
      std::vector<int> others(static_cast<std::size_t>(m.variables));
      for (int j = 0; j < m.variables; ++j) others[static_cast<std::size_t>(j)] = m.value(c, j);
      for (int k = 0; k < m.variables; ++k) {
        const Eigen::VectorXd a = size_biased_posterior(m, k, others);
        const Eigen::VectorXd b = size_biased_posterior_enumerated(m, k, others);
        worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
      }
    }
    agreeing += worst <= 1e-12;
  }
  CHECK(agreeing == 100);
}

TEST_CASE("independent models and null conditioning events") {
  Eigen::MatrixXd marg(2, 2);
  marg << 0.3, 0.7, 1.0, 0.0;
  const DiscreteModel m = DiscreteModel::independent(marg, Eigen::Vector2d(1.0, 3.0));
  CHECK(m.joint.sum() == doctest::Approx(1.0));
  // X_0 given X_1 = 0 under J = 0: weights f(x) / (f(x) + f(0)) * P(x), renormalised.
  const Eigen::VectorXd post = size_biased_posterior(m, 0, {0, 0});
  const double a = 0.3 * 1.0 / 2.0, b = 0.7 * 3.0 / 4.0;
  CHECK(post(0) == doctest::Approx(a / (a + b)));
  CHECK_THROWS_AS(size_biased_posterior(m, 0, {0, 1}), DomainError);
}

TEST_CASE("stratified exponential reweighting matches the closed form") {
  // Exp(1) size-biased by x is Gamma(2).
  const auto x = exponential_quantiles(1000000);
  const std::vector<double> w(x.begin(), x.end());
  CHECK(stats::ks_distance_to({x, w}, gamma2_cdf) < 1e-3);
}

TEST_CASE("weighted law test: null, planted exponent, unit weights") {
  Rng rng(12);
  std::exponential_distribution<double> expo(1.0);
  std::gamma_distribution<double> gamma2(2.0, 1.0);
  std::vector<double> x(4000), ref(4000), w1(4000), w2(4000);
  for (std::size_t k = 0; k < x.size(); ++k) {
    x[k] = expo(rng);
    ref[k] = gamma2(rng);
    w1[k] = x[k];
    w2[k] = x[k] * x[k];
  }
  CHECK(weighted_law_test(x, w1, ref, {}).pass);
  CHECK_FALSE(weighted_law_test(x, w2, ref, {}).pass);
  const std::vector<double> ones(x.size(), 1.0);
  const TestReport unit = weighted_law_test(x, ones, ref, {});
  CHECK(unit.statistic == doctest::Approx(stats::ks_distance(x, ref)).epsilon(1e-12));
  CHECK(unit.threshold == doctest::Approx(stats::ks_critical(0.01, 4000, 4000)).epsilon(1e-12));
  CHECK_NOTHROW(nlohmann::json::parse(unit.json()));
}

TEST_CASE("conditional disk test on synthetic surfaces") {
  Rng rng(21);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto make = [&](std::size_t n, double shift, bool grouped) {
    std::vector<SurfaceObservation> out;
    for (std::size_t k = 0; k < n; ++k) {
      SurfaceObservation s;
      s.boundary_length = std::exp(u(rng) * std::log(1.69));
      s.observables = Eigen::Vector2d(std::log(s.boundary_length) + normal(rng) + shift, 0.3 * normal(rng));
      s.group = grouped ? static_cast<long>(k / 2) : -1;
      out.push_back(s);
    }
    return out;
  };
  DiskTestOptions opts;
  const auto reference = make(800, 0.0, false);
  const auto null = make(800, 0.0, true);
  const auto shifted = make(800, 0.5, true);
  CHECK(conditional_disk_test(null, reference, opts, rng).pass);
  CHECK_FALSE(conditional_disk_test(shifted, reference, opts, rng).pass);
}

TEST_CASE("sequence distances") {
  const auto a = reweight_by_inverse_tau({{{3.0, 1.0}, 1.0}, {{2.0}, 2.0}, {{5.0, 0.5}, 4.0}});
  const SequenceDistance same = sequence_distance(a, a, 3);
  for (double d : same.ks) CHECK(d == 0.0);
  CHECK(same.wasserstein1 == 0.0);
  const auto ones = reweight_by_inverse_tau({{{1.0}, 1.0}, {{1.0}, 2.0}});
  const auto twos = reweight_by_inverse_tau({{{2.0}, 1.0}, {{2.0}, 3.0}});
  const SequenceDistance apart = sequence_distance(ones, twos, 2);
  CHECK(apart.ks[0] == 1.0);
  CHECK(apart.ks[1] == 0.0);
  CHECK(apart.wasserstein1 == doctest::Approx(1.0));
}

TEST_CASE("sequence test null on seed-disjoint stable ensembles") {
  const auto a = passage_ensemble(1.5, 10000, 1);
  const auto b = passage_ensemble(1.5, 10000, 2);
  const TestReport r = sequence_test(a, b);
  CHECK(r.pass);
  CHECK(r.statistic < r.threshold);
}

TEST_CASE("Prokhorov and Hausdorff distances") {
  for (double d : {0.05, 0.3, 0.8, 2.0}) {
    const double p = prokhorov_distance({Point(0.0, 0.0)}, Eigen::VectorXd::Ones(1), {Point(d, 0.0)}, Eigen::VectorXd::Ones(1));
    CHECK(p == doctest::Approx(std::min(d, 1.0)).epsilon(1e-9));
  }
  // Same two far-apart atoms with masses moved by 0.2.
  const std::vector<Point> xs{Point(-0.9, 0.0), Point(0.9, 0.0)};
  CHECK(prokhorov_distance(xs, Eigen::Vector2d(0.5, 0.5), xs, Eigen::Vector2d(0.7, 0.3)) == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(prokhorov_distance(xs, Eigen::Vector2d(0.5, 0.5), xs, Eigen::Vector2d(0.5, 0.5)) == doctest::Approx(0.0));
  CHECK(hausdorff_distance({Point(0.0, 0.0)}, {Point(1.0, 0.0), Point(0.0, 2.0)}) == doctest::Approx(2.0));
  CHECK(hausdorff_distance({Point(0.0, 0.0), Point(0.5, 0.0)}, {Point(0.5, 0.0), Point(0.0, 0.0)}) == 0.0);
}

TEST_CASE("annulus modulus of a round lattice annulus") {
  const LatticeDomain d = LatticeDomain::disk(32);
  std::vector<char> region(static_cast<std::size_t>(d.cell_count()), 0), hole(region.size(), 0);
  for (int j = 0; j < d.ny; ++j) {
    for (int i = 0; i < d.nx; ++i) {
      if (!d.contains(i, j)) continue;
      const double r = std::abs(d.cell_center(i, j));
      (r < 0.5 ? hole : region)[static_cast<std::size_t>(d.index(i, j))] = 1;
    }
  }
  CHECK(annulus_modulus(d, region, hole) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("annulus distance") {
  Rng rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AnnulusSummary s;
  for (int k = 0; k < 200; ++k) s.atoms.push_back(std::polar(0.9 * std::sqrt(u(rng)), 2.0 * std::numbers::pi * u(rng)));
  s.masses = Eigen::VectorXd::Constant(200, 1.0 / 200);
  for (int k = 0; k < 50; ++k) s.gasket.push_back(std::polar(0.3 + 0.6 * u(rng), 2.0 * std::numbers::pi * u(rng)));
  s.r = 0.4;
  CHECK(annulus_distance(s, s) == doctest::Approx(0.0));
  AnnulusSummary rotated = s;
  const Point rot = std::polar(1.0, -2.0 * std::numbers::pi * 5 / 64);
  for (auto& p : rotated.atoms) p *= rot;
  for (auto& p : rotated.gasket) p *= rot;
  CHECK(annulus_distance(rotated, s) < 1e-9);
  AnnulusSummary moved = s;
  moved.r = 0.5;
  CHECK(annulus_distance(moved, s) == doctest::Approx(0.1));
}
