#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "lqglab/errors.hpp"
#include "lqglab/levy.hpp"
#include "lqglab/numerics.hpp"
#include "lqglab/stats.hpp"

using namespace lqglab;

TEST_CASE("beta of gamma") {
  CHECK(beta_of_gamma(2.0) == 1.5);
  CHECK(beta_of_gamma(std::sqrt(8.0 / 3.0)) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(beta_of_gamma(std::sqrt(3.0)) == doctest::Approx(11.0 / 6.0).epsilon(1e-14));
  CHECK_THROWS_AS(check_beta(2.0), ConfigError);
  CHECK_THROWS_AS(check_beta(1.4), ConfigError);
  CHECK(gamma_of_minus(1.5) == doctest::Approx(4.0 * std::sqrt(std::numbers::pi) / 3.0).epsilon(1e-13));
  CHECK(gamma_of_minus(1.75) == doctest::Approx(std::tgamma(-1.75)).epsilon(1e-13));
}

TEST_CASE("Laplace oracles are consistent") {
  for (double beta : {1.5, 1.75}) {
    for (double q : {0.5, 1.0, 2.0}) {
      // Phi(q) = -log E exp(-q tau) inverts psi(lambda) = Gamma(-beta) lambda^beta.
      const double phi = -std::log(passage_laplace(beta, q));
      CHECK(-std::log(levy_laplace(beta, phi)) == doctest::Approx(-q).epsilon(1e-12));
    }
  }
}

TEST_CASE("largest-jump target: closed form against quadrature") {
  for (double beta : {1.5, 1.75}) {
    for (double x : {0.05, 0.3, 1.0, 3.0, 20.0}) {
      const double closed = reweighted_largest_jump_target(beta, x);
      CHECK(closed == doctest::Approx(reweighted_largest_jump_target_quadrature(beta, x)).epsilon(1e-7));
      CHECK(closed > 0.0);
      CHECK(closed < 1.0);
    }
  }
}

TEST_CASE("truncated Laplace exponent: closed form against quadrature") {
  for (double beta : {1.5, 1.75}) {
    for (double x : {0.1, 1.0, 5.0}) {
      for (double lambda : {0.2, 1.0, 4.0}) {
        CHECK(truncated_laplace_exponent(beta, x, lambda) ==
              doctest::Approx(truncated_laplace_exponent_quadrature(beta, x, lambda)).epsilon(1e-8));
      }
    }
    // Keeping every jump recovers the full exponent Gamma(-beta) lambda^beta.
    CHECK(truncated_laplace_exponent(beta, 1e6, 2.0) ==
          doctest::Approx(gamma_of_minus(beta) * std::pow(2.0, beta)).epsilon(1e-6));
  }
}

TEST_CASE("weighted largest-jump law is a distribution function") {
  const double beta = 1.5;
  double prev = 0.0;
  for (double x : {0.01, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0}) {
    const double f = weighted_largest_jump_cdf(beta, x);
    CHECK(f >= prev);
    CHECK(f <= 1.0 + 1e-9);
    prev = f;
  }
  CHECK(weighted_largest_jump_cdf(beta, 1e4) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(weighted_largest_jump_cdf(beta, 1e-3) < 0.01);
}

TEST_CASE("incomplete gamma and quadrature helpers") {
  CHECK(regularized_gamma_q(1.0, 2.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-13));
  CHECK(regularized_gamma_q(0.5, 0.7) == doctest::Approx(std::erfc(std::sqrt(0.7))).epsilon(1e-12));
  CHECK(regularized_gamma_q(3.0, 10.0) == doctest::Approx(std::exp(-10.0) * (1 + 10 + 50)).epsilon(1e-12));
  CHECK(integrate([](double x) { return std::sin(x); }, 0.0, std::numbers::pi) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(integrate_to_infinity([](double x) { return std::exp(-x); }, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
}

TEST_CASE("jumps before tau") {
  LevyPath path;
  path.jumps = {{0.1, 2.0}, {0.2, 5.0}};
  path.tau = 0.15;
  CHECK(jumps_before_tau(path) == std::vector<double>{2.0});
  path.tau = 0.05;
  CHECK(jumps_before_tau(path).empty());
  path.tau = 0.3;
  CHECK(jumps_before_tau(path) == std::vector<double>{5.0, 2.0});
  path.tau.reset();
  CHECK_THROWS_AS(jumps_before_tau(path), DomainError);
  CHECK_FALSE(first_passage(path).has_value());
}

TEST_CASE("pure drift path crosses at 1/d") {
  // Without the Brownian part the path is pure drift until the first jump;
  // take the first seed that draws no jump before crossing.
  LevyOptions opts;
  opts.delta = 0.99;
  opts.gaussian_small_jumps = false;
  opts.dt = 0.07;
  int tried = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const LevyPath path = sample_levy_path(1.5, opts, rng);
    if (!path.jumps.empty()) continue;
    ++tried;
    const double d = -path.drift;
    CHECK(d == doctest::Approx(std::pow(0.99, -0.5) / 0.5));
    REQUIRE(first_passage(path).has_value());
    CHECK(*first_passage(path) == doctest::Approx(1.0 / d).epsilon(1e-12));
  }
  CHECK(tried > 0);
}

TEST_CASE("paths have only upward jumps and record the skeleton") {
  LevyOptions opts;
  opts.record_skeleton = true;
  opts.stop_at_passage = false;
  opts.horizon = 10.0;
  Rng rng(2);
  const LevyPath path = sample_levy_path(1.75, opts, rng);
  REQUIRE(!path.jumps.empty());
  for (const Jump& j : path.jumps) CHECK(j.size > opts.delta);
  for (std::size_t k = 1; k < path.jumps.size(); ++k) CHECK(path.jumps[k].time >= path.jumps[k - 1].time);
  CHECK(path.skeleton.size() == static_cast<Eigen::Index>(std::lround(opts.horizon / opts.dt)) + 1);
  CHECK(path.skeleton(0) == 0.0);
}

TEST_CASE("self-similarity of the marginal") {
  const double beta = 1.5;
  LevyOptions opts;
  opts.delta = 1e-2;
  Rng rng(31);
  std::vector<double> at2, at1;
  for (int n = 0; n < 100000; ++n) {
    at2.push_back(sample_levy_increments(beta, 2.0, 1, opts, rng)(0));
    at1.push_back(std::pow(2.0, 1.0 / beta) * sample_levy_increments(beta, 1.0, 1, opts, rng)(0));
  }
  CHECK(stats::ks_distance(at2, at1) <= 0.02);
}

TEST_CASE("passage-time scaling in the level") {
  const double beta = 1.5, x = 2.0;
  LevyOptions base;
  base.delta = 0.02;
  base.dt = 0.02;
  base.horizon = 50.0;
  LevyOptions far = base;
  far.level = -x;
  far.horizon = base.horizon * std::pow(x, beta);
  Rng rng(5);
  const double unresolved = 1e300;
  std::vector<double> t1, tx;
  for (int n = 0; n < 40000; ++n) {
    const auto a = sample_levy_path(beta, base, rng).tau;
    const auto b = sample_levy_path(beta, far, rng).tau;
    t1.push_back(a ? *a : unresolved);
    tx.push_back(b ? *b / std::pow(x, beta) : unresolved);
  }
  CHECK(stats::ks_distance(t1, tx) <= 0.02);
}

TEST_CASE("reweighting by 1/tau") {
  const auto two = reweight_by_inverse_tau({{{1.0}, 1.0}, {{2.0}, 3.0}});
  CHECK(two.weights[0] / (two.weights[0] + two.weights[1]) == doctest::Approx(0.75));
  CHECK(two.weights[1] / (two.weights[0] + two.weights[1]) == doctest::Approx(0.25));
  CHECK(two.rank_cdf(0, 1.5) == doctest::Approx(0.75));

  const auto flat = reweight_by_inverse_tau({{{3.0, 1.0}, 2.0}, {{2.0}, 2.0}, {{5.0, 4.0}, 2.0}});
  for (double w : flat.weights) CHECK(w == doctest::Approx(flat.weights[0]));
  CHECK(flat.effective_sample_size() == doctest::Approx(3.0));
  CHECK(flat.rank_cdf(0, 2.5) == doctest::Approx(1.0 / 3.0));
  CHECK(flat.rank_cdf(1, 0.5) == doctest::Approx(1.0 / 3.0));  // missing rank-2 entry counts as 0

  CHECK_THROWS(reweight_by_inverse_tau({{{1.0}, 0.0}}));

  std::ostringstream csv;
  write_ensemble_csv(csv, reweight_by_inverse_tau({{{}, 1.0}, {{2.0}, 2.0}}));
  CHECK(csv.str().find(",0,0\n") != std::string::npos);
}

TEST_CASE("coupled sampling keeps the jump law") {
  // Thinned common-rate arrivals must reproduce the Pareto law above delta.
  LevyOptions opts;
  opts.delta = 0.05;
  opts.coupling_rate = 2.0 * std::pow(0.05, -1.5) / 1.5;
  opts.stop_at_passage = false;
  opts.horizon = 200.0;
  Rng rng(8);
  const LevyPath path = sample_levy_path(1.5, opts, rng);
  std::vector<double> u;
  for (const Jump& j : path.jumps) u.push_back(std::pow(j.size / opts.delta, -1.5));
  const double rate = static_cast<double>(path.jumps.size()) / opts.horizon;
  const double expected = std::pow(opts.delta, -1.5) / 1.5;
  CHECK(std::abs(rate - expected) < 4.0 * std::sqrt(expected / opts.horizon));
  CHECK(stats::ks_distance_to({u, {}}, [](double v) { return std::clamp(v, 0.0, 1.0); }) < 0.02);
}
