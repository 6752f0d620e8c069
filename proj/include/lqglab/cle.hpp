#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lqglab/field.hpp"
#include "lqglab/lattice_loop.hpp"

namespace lqglab {

/// c(kappa) = 1 - 6 (2/sqrt(kappa) - sqrt(kappa)/2)^2 for kappa in [8/3, 4].
double central_charge(double kappa);
/// Throws ConfigError unless kappa lies in (8/3, 4].
void check_kappa(double kappa);

/// Poissonian collection of random-walk loops on the interior corners of a
/// domain, the walk being killed when it leaves them. Each loop carries a
/// uniform mark used for monotone thinning.
struct LoopSoup {
  LatticeDomain domain;
  double intensity = 0.0;
  std::vector<LatticeLoop> loops;
  std::vector<double> marks;
};

/// Exact sampler for the random-walk loop soup (rooted loop weight
/// 4^{-n}/n). Loops are generated vertex by vertex: with vertices x_1, x_2,
/// ..., the loops that first meet x_k inside D_k = {x_k, x_{k+1}, ...} visit
/// x_k a logarithmically distributed number of times, each visit starting an
/// independent excursion in D_k. The return probabilities come from the
/// pivots of an LDL^T factorisation of I - P.
class LoopSoupSampler {
 public:
  explicit LoopSoupSampler(const LatticeDomain& domain);

  /// Soup at the given intensity; loops of two steps are discarded.
  LoopSoup sample(double intensity, Rng& rng) const;

  const LatticeDomain& domain() const { return domain_; }
  int vertex_count() const { return static_cast<int>(corners_.size()); }
  /// Return probability q_k for the k-th processed vertex.
  double return_probability(int k) const { return q_(k); }

 private:
  LatticeDomain domain_;
  std::vector<Corner> corners_;
  std::vector<std::array<int, 4>> neighbours_;  // -1 when the step leaves the domain
  std::vector<int> order_;                      // processing order
  std::vector<int> rank_;                       // inverse of order_
  Eigen::VectorXd q_;
};

/// Soup at intensity c(kappa)/2.
LoopSoup sample_loop_soup(const LatticeDomain& domain, double kappa, Rng& rng);

/// Keeps the loops whose mark is below intensity / soup.intensity.
LoopSoup thin(const LoopSoup& soup, double intensity);

struct LoopEnsemble {
  LatticeDomain domain;
  std::vector<LatticeLoop> loops;          // outer boundaries, traced clockwise
  std::vector<std::vector<int>> regions;   // enclosed cells, as domain.index(i, j)
  std::vector<int> label;                  // per cell: loop index, -1 gasket, -2 outside domain
  std::vector<double> lengths;
  std::vector<std::size_t> order;          // loop indices by decreasing length
  std::vector<std::vector<int>> clusters;  // corner indices (b * (nx + 1) + a) of each loop's cluster
  double largest_cluster_fraction = 0.0;   // share of soup corners in the largest cluster

  bool in_gasket(int i, int j) const { return label[static_cast<std::size_t>(domain.index(i, j))] == -1; }
  std::size_t size() const { return loops.size(); }
};

/// Outermost cluster boundaries of the soup, their filled hulls and the
/// gasket. Clusters whose hull encloses no cell are dropped.
LoopEnsemble extract_loop_ensemble(const LoopSoup& soup);

/// Violations of the ensemble invariants, empty when all hold: regions are
/// pairwise disjoint domain cells; labels partition the domain into regions
/// and gasket; every loop is closed, never runs between two cells of its own
/// region, and covers every edge between its region and the rest (edges with
/// the exterior on both sides, such as dangling walk segments, are allowed);
/// no loop passes through the interior of another loop's region.
std::vector<std::string> structure_violations(const LoopEnsemble& ens);

/// True when every region of `inner` lies inside a single region of `outer`
/// (both ensembles on the same domain).
bool regions_nested(const LoopEnsemble& inner, const LoopEnsemble& outer);

/// Index of the loop whose region contains z, or nullopt in the gasket.
std::optional<std::size_t> loop_index_of_point(const LoopEnsemble& ens, Point z);

/// min{m >= 1 : Z(m) in U^j}, drawing at most max_draws points from the
/// stream; nullopt when the bound is reached first.
std::optional<std::size_t> first_hitting_index(const LoopEnsemble& ens, const std::function<Point()>& stream,
                                               std::size_t j, std::size_t max_draws);

/// Fills lengths with loop_length(field, loop, gamma, calibration) and sets
/// order to sort them decreasingly.
void assign_loop_lengths(LoopEnsemble& ens, const Field& field, double gamma, double calibration);

/// Euclidean area of region j.
double region_area(const LoopEnsemble& ens, std::size_t j);

/// JSON: per loop the corner path, region cell count and length; gasket as a
/// run-length encoded mask over cells in row-major order.
std::string loop_ensemble_json(const LoopEnsemble& ens);

}  // namespace lqglab
