#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "lqglab/field.hpp"
#include "lqglab/lattice_loop.hpp"

namespace lqglab {

enum class Support { cells, boundary_edges, loop_edges, points };

/// Nonnegative atomic measure. atom_ids index grid cells (cells, boundary
/// edges) or loop steps; positions give each atom's location in the plane.
template <typename Scalar>
struct BasicMeasure {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Support support = Support::cells;
  std::vector<int> atom_ids;
  std::vector<Point> positions;
  Vector masses;
  Scalar total = 0;
  double gamma = 0.0;
  double mesh = 0.0;
  double calibration = 1.0;

  Eigen::Index size() const { return masses.size(); }
  void refresh_total() { total = masses.sum(); }
};

using Measure = BasicMeasure<double>;

/// eps = 2 (2 - gamma), the rescaling used along gamma -> 2 sweeps.
double epsilon_of_gamma(double gamma);

/// LQG area measure. Subcritical: h^{2 + gamma^2/2} e^{gamma phi} per cell.
/// gamma = 2: sqrt(log(1/h)) h^4 e^{2 phi} (Seneta-Heyde).
Measure area_measure(const Field& field, double gamma);

/// LQG boundary length measure on boundary cells (one atom per boundary edge
/// of length h): h^{1 + gamma^2/4} e^{gamma phi / 2}; gamma = 2:
/// sqrt(log(1/h)) h^2 e^{phi}.
Measure boundary_measure(const Field& field, double gamma);

/// Per-edge length weight for loops: h^{d + gamma^2/8} with d = 1 + kappa/8
/// and kappa = gamma^2 (times sqrt(log(1/h)) at gamma = 2).
double loop_edge_scale(double gamma, double mesh);

/// Length measure along a closed dual-lattice loop; the field value on an
/// edge is the mean of the two cells it separates.
Measure loop_length_measure(const Field& field, const LatticeLoop& loop, double gamma, double calibration);
double loop_length(const Field& field, const LatticeLoop& loop, double gamma, double calibration);

/// Exact E[mu(D)] for a zero-boundary GFF from the discrete Green function.
double expected_area_mass(const Field& green_diagonal, double gamma);

/// Cumulative-sum sampler for atoms proportional to mass.
class AtomSampler {
 public:
  explicit AtomSampler(const Measure& m);
  Eigen::Index operator()(Rng& rng) const;

 private:
  std::vector<double> cumulative_;
};

/// "# {json header}" line followed by "atom_id,mass" rows.
void write_measure_csv(std::ostream& out, const Measure& m);

}  // namespace lqglab
