#include <cmath>

#include "doctest.h"
#include "lqglab/gmc.hpp"
#include "lqglab/stats.hpp"

using namespace lqglab;

namespace {

LatticeLoop square(int a0, int b0, int side) {
  LatticeLoop loop;
  for (int k = 0; k < side; ++k) loop.corners.push_back({a0 + k, b0});
  for (int k = 0; k < side; ++k) loop.corners.push_back({a0 + side, b0 + k});
  for (int k = 0; k < side; ++k) loop.corners.push_back({a0 + side - k, b0 + side});
  for (int k = 0; k < side; ++k) loop.corners.push_back({a0, b0 + side - k});
  loop.corners.push_back({a0, b0});
  return loop;
}

}  // namespace

TEST_CASE("area measure of the zero field") {
  const int n = 16;
  const double h = 1.0 / n;
  const Field zero(LatticeDomain::strip(n, n, h), BoundaryCondition::free);
  const Measure m = area_measure(zero, 1.0);
  CHECK(m.size() == n * n);
  CHECK(m.total == doctest::Approx(std::pow(h, 0.5)).epsilon(1e-12));
  const Measure c = area_measure(zero, 2.0);
  CHECK(c.masses(0) == doctest::Approx(std::sqrt(std::log(n)) * std::pow(h, 4.0)).epsilon(1e-12));
}

TEST_CASE("boundary measure of the zero field") {
  const int n = 16;
  const double h = 1.0 / n;
  const Field zero(LatticeDomain::strip(n, n, h), BoundaryCondition::free);
  const Measure m = boundary_measure(zero, 2.0);
  CHECK(m.size() == 2 * n);  // bottom and top segments
  for (Eigen::Index k = 0; k < m.size(); ++k)
    CHECK(m.masses(k) == doctest::Approx(std::sqrt(std::log(n)) / (n * n)).epsilon(1e-12));
  CHECK(m.total / 2.0 == doctest::Approx(std::sqrt(std::log(n)) / n).epsilon(1e-12));
}

TEST_CASE("shift covariance of the measures") {
  Rng rng(10);
  const Field f = sample_zero_boundary_gff(LatticeDomain::disk(12), rng);
  const double c = 0.37;
  const Field g = f + c;
  for (double gamma : {1.0, 1.5, 2.0}) {
    const Measure a = area_measure(f, gamma), b = area_measure(g, gamma);
    for (Eigen::Index k = 0; k < a.size(); ++k) CHECK(b.masses(k) / a.masses(k) == doctest::Approx(std::exp(gamma * c)).epsilon(1e-12));
    const Measure ba = boundary_measure(f, gamma), bb = boundary_measure(g, gamma);
    CHECK(bb.total / ba.total == doctest::Approx(std::exp(gamma * c / 2.0)).epsilon(1e-12));
  }
}

TEST_CASE("loop length") {
  const LatticeDomain d = LatticeDomain::disk(16);
  const Field zero(d, BoundaryCondition::zero);
  const LatticeLoop loop = square(12, 12, 6);
  for (double gamma : {1.7, 2.0}) {
    const double kappa = gamma * gamma;
    const double expected = 3.0 * 24 * std::pow(d.mesh, 1.0 + kappa / 8.0 + gamma * gamma / 8.0) *
                            (gamma == 2.0 ? std::sqrt(std::log(16.0)) : 1.0);
    CHECK(loop_length(zero, loop, gamma, 3.0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(loop_edge_scale(gamma, d.mesh) * 24 * 3.0 == doctest::Approx(expected).epsilon(1e-12));
  }
  Rng rng(3);
  const Field f = sample_zero_boundary_gff(d, rng);
  const double c = -0.8;
  CHECK(loop_length(f + c, loop, 2.0, 1.0) / loop_length(f, loop, 2.0, 1.0) == doctest::Approx(std::exp(c)).epsilon(1e-12));
  LatticeLoop open = loop;
  open.corners.pop_back();
  CHECK_THROWS(loop_length(f, open, 2.0, 1.0));
}

TEST_CASE("expected area mass from the Green function") {
  const LatticeDomain d = LatticeDomain::disk(10);
  const ZeroBoundaryGff gff(d);
  const double gamma = 1.0;
  const double expected = expected_area_mass(gff.green_diagonal(), gamma);
  Rng rng(31);
  std::vector<double> totals;
  for (int n = 0; n < 4000; ++n) totals.push_back(area_measure(gff.sample(rng), gamma).total);
  CHECK(std::abs(stats::mean(totals) - expected) < 3.0 * stats::standard_error(totals));
}

TEST_CASE("expected area mass is stable across a mesh halving" * doctest::timeout(600)) {
  const double coarse = expected_area_mass(ZeroBoundaryGff(LatticeDomain::disk(64)).green_diagonal(), 1.5);
  const double fine = expected_area_mass(ZeroBoundaryGff(LatticeDomain::disk(128)).green_diagonal(), 1.5);
  CHECK(std::isfinite(coarse));
  CHECK(std::abs(fine / coarse - 1.0) < 0.1);
}

TEST_CASE("measures reject non-finite masses and bad gamma") {
  Field f(LatticeDomain::disk(8), BoundaryCondition::zero);
  f(8, 8) = 1e6;
  CHECK_THROWS(area_measure(f, 2.0));
  CHECK_THROWS_AS(area_measure(Field(LatticeDomain::disk(8), BoundaryCondition::zero), 2.5), ConfigError);
}

TEST_CASE("epsilon of gamma") {
  CHECK(epsilon_of_gamma(2.0) == 0.0);
  CHECK(epsilon_of_gamma(1.9) == doctest::Approx(0.2));
}
