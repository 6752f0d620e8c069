#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lqglab/cle.hpp"
#include "lqglab/field.hpp"
#include "lqglab/levy.hpp"
#include "lqglab/random.hpp"

namespace lqglab {

// ---------------------------------------------------------------------------
// Size-biased index selection on a finite model.
// ---------------------------------------------------------------------------

/// n random variables on a common finite alphabet {0, ..., A-1} with a joint
/// probability table (index sum_j x_j A^j) and a weight f on the alphabet.
/// J is drawn with P[J = k | X] = f(X_k) / sum_j f(X_j).
struct DiscreteModel {
  int variables = 0;
  int alphabet = 0;
  Eigen::VectorXd joint;   // size alphabet^variables
  Eigen::VectorXd weight;  // f, size alphabet

  /// Independent variables with the given marginals (rows of `marginals`).
  static DiscreteModel independent(const Eigen::MatrixXd& marginals, const Eigen::VectorXd& weight);
  /// Random instance with a random (generally dependent) joint law.
  static DiscreteModel random(int variables, int alphabet, Rng& rng);

  void validate() const;
  std::size_t configurations() const { return static_cast<std::size_t>(joint.size()); }
  int value(std::size_t config, int j) const;
};

/// Conditional law of X_k given {J = k} and X_j = others[j] for j != k
/// (others[k] is ignored), from the weighting
///   f(X_k) / sum_j f(X_j) * E[f(X_k) / sum_j f(X_j) | X_j, j != k]^{-1}
/// of the conditional law of X_k given the others. Throws DomainError when
/// the conditioning event has probability zero.
Eigen::VectorXd size_biased_posterior(const DiscreteModel& model, int k, const std::vector<int>& others);

/// The same law by enumerating every (X, J) outcome.
Eigen::VectorXd size_biased_posterior_enumerated(const DiscreteModel& model, int k, const std::vector<int>& others);

// ---------------------------------------------------------------------------
// Statistical tests.
// ---------------------------------------------------------------------------

struct TestReport {
  std::string test;
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::size_t n = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> notes;

  std::string json() const;
};

/// Observables of one surface with its boundary length; `group` ties sibling
/// surfaces from the same sample together (-1 = none).
struct SurfaceObservation {
  double boundary_length = 1.0;
  Eigen::VectorXd observables;
  double weight = 1.0;
  long group = -1;
};

struct DiskTestOptions {
  double alpha = 0.01;
  double bin_ratio = 1.3;
  std::size_t min_per_bin = 200;
  int permutations = 199;
};

/// Per geometric boundary-length bin and per observable, two-sample KS of the
/// inner surfaces against reference disks (Bonferroni over all comparisons),
/// plus a distance-correlation permutation test on sibling pairs.
TestReport conditional_disk_test(const std::vector<SurfaceObservation>& inner,
                                 const std::vector<SurfaceObservation>& reference, const DiskTestOptions& opts,
                                 Rng& rng);

/// Weighted two-sample KS: `sample` against `reference` carrying importance
/// weights (e.g. the area fraction); threshold from effective sizes.
TestReport weighted_law_test(std::span<const double> sample, std::span<const double> sample_weights,
                             std::span<const double> reference, std::span<const double> reference_weights,
                             double alpha = 0.01);

struct SequenceDistance {
  std::vector<double> ks;     // ranks 1..K
  double wasserstein1 = 0.0;  // rank 1
  double n_a = 0.0, n_b = 0.0;  // effective sizes
};

/// Per-rank two-sample KS for ranks 1..K and Wasserstein-1 on rank 1;
/// sequences are padded with zeros.
SequenceDistance sequence_distance(const WeightedEnsemble& a, const WeightedEnsemble& b, std::size_t ranks = 5);

/// Rank-1 KS against the two-sample critical value at level alpha.
TestReport sequence_test(const WeightedEnsemble& a, const WeightedEnsemble& b, double alpha = 0.01);

// ---------------------------------------------------------------------------
// Annulus comparison.
// ---------------------------------------------------------------------------

struct AnnulusSummary {
  std::vector<Point> atoms;     // area measure atoms in the unit disk
  Eigen::VectorXd masses;
  std::vector<Point> gasket;    // gasket cell centres inside the annulus
  double r = 0.0;               // conformal modulus proxy, in [0, 1)
  double mesh = 0.0;
};

/// r = exp(-2 pi R) with R the effective resistance between the outer and
/// inner boundaries of the cell set `region` (unit conductance per lattice
/// edge, half cells to each boundary). `hole` marks the inner complement.
double annulus_modulus(const LatticeDomain& domain, const std::vector<char>& region, const std::vector<char>& hole);

/// Annulus D \ closure(U^j) with the area measure of `field`.
AnnulusSummary make_annulus_summary(const LoopEnsemble& ens, std::size_t j, const Field& field, double gamma);

/// Prokhorov distance between finite atomic measures, exact for the atoms
/// given (max-flow feasibility per candidate radius).
double prokhorov_distance(const std::vector<Point>& xa, const Eigen::VectorXd& ma, const std::vector<Point>& xb,
                          const Eigen::VectorXd& mb);

double hausdorff_distance(const std::vector<Point>& a, const std::vector<Point>& b);

struct AnnulusDistanceOptions {
  int rotations = 64;
  int grid = 16;  // common grid cells per side for the area measures
};

/// min over rotations of D_P + D_H + |r_a - r_b|.
double annulus_distance(const AnnulusSummary& a, const AnnulusSummary& b, const AnnulusDistanceOptions& opts = {});

}  // namespace lqglab
