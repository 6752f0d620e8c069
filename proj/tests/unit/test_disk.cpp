#include <cmath>
#include <numbers>

#include "doctest.h"
#include "lqglab/gmc.hpp"
#include "lqglab/quantum_disk.hpp"
#include "lqglab/stats.hpp"

using namespace lqglab;

namespace {

// Law at time s of B_{2s} - a s started at 0 and conditioned to stay negative,
// written for Y = -X: killed density by the method of images, Doob-transformed
// by h(y) = 1 - e^{-a y} and taken to the limit of a start at 0+.
double conditioned_density(double a, double s, double y) {
  if (y <= 0.0) return 0.0;
  const double u = y - a * s;
  const double phi = std::exp(-u * u / (4.0 * s)) / std::sqrt(4.0 * std::numbers::pi * s);
  return phi * (a + u / s) * -std::expm1(-a * y) / a;
}

std::vector<double> conditioned_cdf_table(double a, double s, double step, double top) {
  std::vector<double> cdf{0.0};
  double acc = 0.0;
  for (double y = 0.0; y < top; y += step) {
    acc += step / 6.0 *
           (conditioned_density(a, s, y) + 4.0 * conditioned_density(a, s, y + step / 2) +
            conditioned_density(a, s, y + step));
    cdf.push_back(acc);
  }
  return cdf;
}

}  // namespace

TEST_CASE("disk parameters") {
  CHECK(lqg_q(2.0) - 2.0 == 0.0);
  CHECK(disk_reweight_exponent(2.0) == 0.0);
  CHECK(disk_reweight_exponent(1.9) == doctest::Approx(0.10803).epsilon(1e-4));
  CHECK(gamma_lower_bound() == doctest::Approx(std::sqrt(8.0 / 3.0)));
  CHECK_THROWS_AS(check_disk_gamma(1.5), ConfigError);
  CHECK_THROWS_AS(check_disk_gamma(2.1), ConfigError);
  CHECK_NOTHROW(check_disk_gamma(2.0));
}

TEST_CASE("vertical process stays negative and is symmetric in time") {
  Rng rng(8);
  for (double gamma : {2.0, 1.9}) {
    const VerticalProcess vp = sample_vertical_process(gamma, 5.0, 0.01, rng);
    CHECK((vp.values.array() <= 0.0).all());
    CHECK(vp.values(vp.centre()) == 0.0);
    CHECK(vp.times(vp.centre()) == 0.0);
    CHECK(vp.times(0) == -vp.times(vp.times.size() - 1));
    CHECK(vp.values(0) < -default_truncation_depth(gamma));
    CHECK(vp.values(vp.values.size() - 1) < -default_truncation_depth(gamma));
  }
  CHECK_THROWS_AS(sample_vertical_process(1.5, 5.0, 0.01, rng), ConfigError);
}

TEST_CASE("vertical process marginal matches the conditioned density") {
  const double gamma = 1.9, a = 2.0 / gamma - gamma / 2.0, s = 1.0, dt = 0.05;
  const double step = 1e-3;
  const auto table = conditioned_cdf_table(a, s, step, 40.0);
  CHECK(table.back() == doctest::Approx(1.0).epsilon(1e-8));
  const auto cdf = [&](double y) {
    const double k = y / step;
    const auto i = static_cast<std::size_t>(k);
    if (i + 1 >= table.size()) return 1.0;
    return table[i] + (k - i) * (table[i + 1] - table[i]);
  };
  Rng rng(1901);
  std::vector<double> ys;
  const auto offset = static_cast<Eigen::Index>(std::lround(s / dt));
  for (int n = 0; n < 100000; ++n) {
    const VerticalProcess vp = sample_vertical_process(gamma, s, dt, rng, 0.0);
    REQUIRE(vp.times(vp.centre() + offset) == doctest::Approx(s));
    ys.push_back(-vp.values(vp.centre() + offset));
  }
  CHECK(stats::ks_distance_to({ys, {}}, cdf) < 0.02);
}

TEST_CASE("strip assembly") {
  Rng rng(6);
  const LatticeDomain strip = LatticeDomain::lqg_strip(64, 8);
  VerticalProcess vp;
  vp.gamma = 2.0;
  vp.dt = strip.mesh;
  vp.times = Eigen::VectorXd::LinSpaced(64, -32 * strip.mesh, 31 * strip.mesh);
  vp.values = -vp.times.array().abs();
  SUBCASE("zero lateral part gives a column-constant field") {
    const Field f = assemble_strip_field(vp, Field(strip, BoundaryCondition::free));
    for (int i = 0; i < strip.nx; ++i) {
      const double col = f(i, 0);
      for (int j = 1; j < strip.ny; ++j) CHECK(f(i, j) == col);
    }
    const auto dec = vertical_average_decompose(f);
    CHECK(dec.lateral.values.abs().maxCoeff() == 0.0);
  }
  SUBCASE("zero vertical process gives the lateral part") {
    vp.values.setZero();
    const Field lateral = FreeStripGff(strip).sample_lateral(rng);
    const Field f = assemble_strip_field(vp, lateral);
    CHECK((f.values - lateral.values).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("unit boundary disks") {
  DiskResolution res;
  res.strip_height_cells = 16;
  res.disk_radius_cells = 24;
  SUBCASE("critical disks: unit boundary length, weight 1, marked points embedded") {
    Rng rng(12);
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const DiskSample disk = sample_unit_boundary_disk(2.0, res, seed);
      CHECK(disk.nu_total() == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(disk.weight == 1.0);
      CHECK(disk.mu_total() > 0.0);
      const DiskSample marked = embed_with_marked_points(disk, rng);
      CHECK(std::abs(marked.marked_interior) < 1e-9);
      CHECK(std::abs(marked.marked_boundary - Point(1.0, 0.0)) < 1e-9);
      CHECK(marked.nu_total() == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(marked.mu_total() == doctest::Approx(disk.mu_total()).epsilon(1e-12));
      for (const Point& p : marked.boundary.positions) CHECK(std::abs(std::abs(p) - 1.0) < 1e-9);
    }
  }
  SUBCASE("subcritical weights vary") {
    std::vector<double> weights;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) weights.push_back(sample_unit_boundary_disk(1.9, res, seed).weight);
    CHECK(*std::max_element(weights.begin(), weights.end()) > *std::min_element(weights.begin(), weights.end()));
    for (double w : weights) CHECK(w > 0.0);
  }
  SUBCASE("deterministic given the seed") {
    const DiskSample a = sample_unit_boundary_disk(2.0, res, 77), b = sample_unit_boundary_disk(2.0, res, 77);
    CHECK(a.mu_total() == b.mu_total());
    CHECK((a.field.values == b.field.values).all());
  }
}

TEST_CASE("marked points on concentrated measures are deterministic") {
  DiskResolution res;
  res.strip_height_cells = 16;
  res.disk_radius_cells = 24;
  DiskSample disk = sample_unit_boundary_disk(2.0, res, 5);
  disk.area.masses.setZero();
  disk.area.masses(7) = 1.0;
  disk.area.refresh_total();
  disk.boundary.masses.setZero();
  disk.boundary.masses(3) = 1.0;
  disk.boundary.refresh_total();
  Rng rng(1);
  const DiskSample a = embed_with_marked_points(disk, rng), b = embed_with_marked_points(disk, rng);
  CHECK(std::abs(a.area.positions[7]) < 1e-9);
  CHECK(std::abs(a.boundary.positions[3] - Point(1.0, 0.0)) < 1e-9);
  CHECK(std::abs(a.embedding(0.0) - b.embedding(0.0)) < 1e-12);
}

TEST_CASE("atom sampler frequencies follow the masses") {
  Measure m;
  m.masses = Eigen::Vector4d(1.0, 2.0, 3.0, 4.0);
  m.refresh_total();
  const AtomSampler sampler(m);
  Rng rng(44);
  const int n = 100000;
  std::array<int, 4> counts{};
  for (int k = 0; k < n; ++k) ++counts[static_cast<std::size_t>(sampler(rng))];
  for (int k = 0; k < 4; ++k) {
    const double p = (k + 1) / 10.0;
    const double se = std::sqrt(p * (1.0 - p) / n);
    CHECK(std::abs(counts[static_cast<std::size_t>(k)] / static_cast<double>(n) - p) < 3.0 * se);
  }
}
