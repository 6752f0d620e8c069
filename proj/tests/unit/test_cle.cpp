#include <cmath>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "lqglab/cle.hpp"

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

LoopSoup soup_of(const LatticeDomain& d, std::vector<LatticeLoop> loops) {
  LoopSoup soup;
  soup.domain = d;
  soup.intensity = 0.5;
  soup.marks.assign(loops.size(), 0.0);
  soup.loops = std::move(loops);
  return soup;
}

bool is_plaquette(const LatticeLoop& loop) {
  if (loop.steps() != 4) return false;
  const std::set<Corner> distinct(loop.corners.begin(), loop.corners.end() - 1);
  return distinct.size() == 4;
}

}  // namespace

TEST_CASE("central charge") {
  CHECK(central_charge(4.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(central_charge(8.0 / 3.0)) < 1e-14);
  CHECK(central_charge(3.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_THROWS_AS(check_kappa(2.5), ConfigError);
  CHECK_THROWS_AS(check_kappa(4.5), ConfigError);
  CHECK_THROWS_AS(check_kappa(8.0 / 3.0), ConfigError);
  CHECK_THROWS_AS(central_charge(2.0), ConfigError);
}

TEST_CASE("loop soup intensities") {
  const LatticeDomain d = LatticeDomain::strip(8, 8, 0.125);
  Rng rng(2);
  CHECK(sample_loop_soup(d, 4.0, rng).intensity == 0.5);
  CHECK(LoopSoupSampler(d).sample(0.0, rng).loops.empty());
  const LoopSoup soup = sample_loop_soup(d, 4.0, rng);
  for (const auto& loop : soup.loops) {
    CHECK(loop.closed());
    CHECK(loop.steps() >= 4);
    for (const auto& [a, b] : loop.corners) CHECK(d.interior_corner(a, b));
  }
  CHECK_THROWS_AS(LoopSoupSampler(d).sample(0.6, rng), ConfigError);
}

TEST_CASE("return probabilities reproduce det(I - P)") {
  const LatticeDomain d = LatticeDomain::disk(8);
  std::vector<Corner> corners;
  for (int b = 0; b <= d.ny; ++b)
    for (int a = 0; a <= d.nx; ++a)
      if (d.interior_corner(a, b)) corners.push_back({a, b});
  const int n = static_cast<int>(corners.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      if (std::abs(corners[u].first - corners[v].first) + std::abs(corners[u].second - corners[v].second) == 1) m(u, v) = -0.25;
  const LoopSoupSampler sampler(d);
  REQUIRE(sampler.vertex_count() == n);
  double log_det = 0.0;
  for (int k = 0; k < n; ++k) {
    CHECK(sampler.return_probability(k) >= 0.0);
    CHECK(sampler.return_probability(k) < 1.0);
    log_det += std::log1p(-sampler.return_probability(k));
  }
  CHECK(log_det == doctest::Approx(std::log(m.determinant())).epsilon(1e-10));
}

TEST_CASE("plaquette loop counts match direct enumeration") {
  // Each plaquette carries 4 roots x 2 orientations of weight 4^{-4}/4.
  const LatticeDomain d = LatticeDomain::strip(8, 8, 0.125);
  const LoopSoupSampler sampler(d);
  int plaquettes = 0;
  for (int b = 0; b < d.ny; ++b)
    for (int a = 0; a < d.nx; ++a)
      plaquettes += d.interior_corner(a, b) && d.interior_corner(a + 1, b) && d.interior_corner(a, b + 1) &&
                    d.interior_corner(a + 1, b + 1);
  REQUIRE(plaquettes == 36);
  const int soups = 10000;
  const double intensity = 0.5;
  Rng rng(404);
  long count = 0;
  for (int s = 0; s < soups; ++s)
    for (const auto& loop : sampler.sample(intensity, rng).loops) count += is_plaquette(loop);
  const double expected = soups * intensity * plaquettes * std::pow(4.0, -4.0) * (4.0 * 2.0 / 4.0);
  CHECK(std::abs(count - expected) < 3.0 * std::sqrt(expected));
}

TEST_CASE("ensemble extraction on hand-built soups") {
  const LatticeDomain d = LatticeDomain::strip(12, 12, 1.0 / 12);
  SUBCASE("empty soup") {
    const LoopEnsemble ens = extract_loop_ensemble(soup_of(d, {}));
    CHECK(ens.size() == 0);
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) CHECK(ens.in_gasket(i, j));
    CHECK(structure_violations(ens).empty());
  }
  SUBCASE("single square loop") {
    const LatticeLoop loop = square(3, 3, 4);
    const LoopEnsemble ens = extract_loop_ensemble(soup_of(d, {loop}));
    REQUIRE(ens.size() == 1);
    CHECK(ens.loops[0].steps() == 16);
    CHECK(std::set<Corner>(ens.loops[0].corners.begin(), ens.loops[0].corners.end()) ==
          std::set<Corner>(loop.corners.begin(), loop.corners.end()));
    std::set<int> cells;
    for (int j = 3; j < 7; ++j)
      for (int i = 3; i < 7; ++i) cells.insert(d.index(i, j));
    CHECK(std::set<int>(ens.regions[0].begin(), ens.regions[0].end()) == cells);
    CHECK(region_area(ens, 0) == doctest::Approx(16.0 * d.mesh * d.mesh));
    CHECK(structure_violations(ens).empty());
    CHECK(loop_index_of_point(ens, d.cell_center(4, 5)) == std::optional<std::size_t>(0));
    CHECK_FALSE(loop_index_of_point(ens, d.cell_center(0, 0)).has_value());
    CHECK_FALSE(loop_index_of_point(ens, d.cell_center(8, 4)).has_value());

    const Point inside = d.cell_center(4, 4), outside = d.cell_center(9, 9);
    CHECK(first_hitting_index(ens, [&] { return inside; }, 0, 10) == std::optional<std::size_t>(1));
    int calls = 0;
    CHECK(first_hitting_index(ens, [&] { return ++calls % 2 ? outside : inside; }, 0, 10) == std::optional<std::size_t>(2));
    CHECK_FALSE(first_hitting_index(ens, [&] { return outside; }, 0, 10).has_value());

    const auto json = nlohmann::json::parse(loop_ensemble_json(ens));
    CHECK(json["loops"].size() == 1);
  }
  SUBCASE("nested disjoint clusters keep only the outer one") {
    const LoopEnsemble ens = extract_loop_ensemble(soup_of(d, {square(5, 5, 2), square(2, 2, 8)}));
    REQUIRE(ens.size() == 1);
    CHECK(ens.regions[0].size() == 64);
    CHECK(structure_violations(ens).empty());
  }
  SUBCASE("loops sharing a corner form one cluster") {
    const LoopEnsemble ens = extract_loop_ensemble(soup_of(d, {square(2, 2, 3), square(5, 5, 3)}));
    REQUIRE(ens.size() == 1);
    CHECK(ens.regions[0].size() == 18);
    CHECK(structure_violations(ens).empty());
  }
  SUBCASE("separate clusters") {
    const LoopEnsemble ens = extract_loop_ensemble(soup_of(d, {square(1, 1, 3), square(6, 6, 4)}));
    CHECK(ens.size() == 2);
    CHECK(structure_violations(ens).empty());
    CHECK(ens.lengths.size() == 2);
  }
}

TEST_CASE("structure checks detect corrupted ensembles") {
  const LatticeDomain d = LatticeDomain::strip(12, 12, 1.0 / 12);
  LoopEnsemble ens = extract_loop_ensemble(soup_of(d, {square(3, 3, 4)}));
  REQUIRE(structure_violations(ens).empty());
  SUBCASE("label disagrees with region") {
    ens.label[static_cast<std::size_t>(d.index(4, 4))] = -1;
    CHECK_FALSE(structure_violations(ens).empty());
  }
  SUBCASE("overlapping regions") {
    ens.loops.push_back(ens.loops[0]);
    ens.regions.push_back(ens.regions[0]);
    CHECK_FALSE(structure_violations(ens).empty());
  }
  SUBCASE("open loop") {
    ens.loops[0].corners.pop_back();
    CHECK_FALSE(structure_violations(ens).empty());
  }
}

TEST_CASE("sampled ensembles satisfy the structural invariants and monotone coupling") {
  const LatticeDomain d = LatticeDomain::disk(16);
  const LoopSoupSampler sampler(d);
  Rng rng(77);
  for (int s = 0; s < 20; ++s) {
    const LoopSoup soup = sampler.sample(central_charge(4.0) / 2.0, rng);
    const LoopEnsemble outer = extract_loop_ensemble(soup);
    const LoopEnsemble inner = extract_loop_ensemble(thin(soup, central_charge(3.5) / 2.0));
    CHECK(structure_violations(outer).empty());
    CHECK(structure_violations(inner).empty());
    CHECK(regions_nested(inner, outer));
    for (std::size_t k = 1; k < outer.order.size(); ++k) CHECK(outer.lengths[outer.order[k - 1]] >= outer.lengths[outer.order[k]]);
  }
  const LoopEnsemble other = extract_loop_ensemble(soup_of(LatticeDomain::disk(12), {}));
  CHECK_THROWS_AS(regions_nested(other, extract_loop_ensemble(sampler.sample(0.5, rng))), ConfigError);
  CHECK_THROWS_AS(thin(sampler.sample(0.25, rng), 0.5), ConfigError);
}
