#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "lqglab/random.hpp"

namespace lqglab {

/// beta(gamma) = 4 / gamma^2 + 1/2 for gamma in [sqrt(8/3), 2].
double beta_of_gamma(double gamma);
/// Gamma(-beta) for beta in (1, 2); positive.
double gamma_of_minus(double beta);
/// Throws ConfigError unless beta lies in [3/2, 2).
void check_beta(double beta);

struct Jump {
  double time = 0.0;
  double size = 0.0;
};

struct LevyOptions {
  double delta = 1e-2;           // jumps above delta are simulated one by one
  double horizon = 1000.0;
  double dt = 1e-2;              // maximal step between jumps; skeleton grid
  bool gaussian_small_jumps = true;
  bool record_skeleton = false;
  bool stop_at_passage = true;
  double level = -1.0;
  /// When positive, arrivals are drawn at this common rate and thinned to
  /// delta^{-beta}/beta, with size (beta r)^{-1/beta} for the arrival's level r.
  /// Paths with different beta then share their random numbers.
  double coupling_rate = 0.0;
};

/// Spectrally positive beta-stable path, Levy measure 1_{x>0} x^{-beta-1} dx,
/// compensated to have mean zero.
struct LevyPath {
  double beta = 1.5;
  double delta = 0.0;
  double drift = 0.0;            // -delta^{1-beta} / (beta - 1)
  double variance_rate = 0.0;    // delta^{2-beta} / (2 - beta), or 0
  double horizon = 0.0;
  double dt = 0.0;
  double level = -1.0;
  std::vector<Jump> jumps;       // in time order
  Eigen::VectorXd skeleton;      // values at k dt, k = 0..; empty unless recorded
  double end_time = 0.0;         // time up to which the path was simulated
  double end_value = 0.0;
  std::optional<double> tau;     // first passage below level

  std::size_t jump_count_above(double x, double until) const;
};

/// Jumps above delta arrive at rate delta^{-beta}/beta with Pareto sizes
/// delta U^{-1/beta}; between jumps the path moves with the compensating drift
/// plus, optionally, a Brownian motion standing in for the small jumps.
/// Passage below the level is detected at the end of every step and, with
/// the Brownian part, inside steps through the bridge crossing probability.
LevyPath sample_levy_path(double beta, const LevyOptions& opts, Rng& rng);

/// Increments of zeta over [0, t] split into `blocks` equal sub-intervals.
Eigen::VectorXd sample_levy_increments(double beta, double t, int blocks, const LevyOptions& opts, Rng& rng);

/// The passage time, or nullopt ("not yet passed") when the horizon ran out.
std::optional<double> first_passage(const LevyPath& path);

/// Sizes of the jumps at times <= tau, in decreasing order. Throws
/// DomainError when tau is unresolved.
std::vector<double> jumps_before_tau(const LevyPath& path);

/// Laplace exponent oracles.
double levy_laplace(double beta, double lambda);        // E exp(-lambda zeta_1)
double passage_laplace(double beta, double q);          // E exp(-q tau)
/// F(x) = E[tau^{-1} exp(-tau x^{-beta}/beta)] / E[tau^{-1}] in closed form.
double reweighted_largest_jump_target(double beta, double x);
/// The same target by direct quadrature of the passage Laplace transform.
double reweighted_largest_jump_target_quadrature(double beta, double x);

/// Laplace exponent of zeta with the jumps above x removed (compensator kept):
/// psi_x(lambda) = Gamma(-beta) lambda^beta + int_x^inf (1 - e^{-lambda y}) y^{-beta-1} dy.
double truncated_laplace_exponent(double beta, double x, double lambda);
/// The same exponent with the tail integral done by quadrature.
double truncated_laplace_exponent_quadrature(double beta, double x, double lambda);
/// Weighted law of the largest jump before tau, computed from the killed
/// process: P_w[max jump <= x] = int_s^inf exp(-Phi_x(u)) du / E[tau^{-1}],
/// s = x^{-beta}/beta, Phi_x the inverse of psi_x.
double weighted_largest_jump_cdf(double beta, double x);

struct WeightedEnsemble {
  std::vector<std::vector<double>> samples;  // decreasing sequences
  std::vector<double> taus;
  std::vector<double> weights;
  double normalization = 0.0;

  std::size_t size() const { return samples.size(); }
  double effective_sample_size() const;
  /// Self-normalised weighted CDF of the rank-r entry (0 when missing).
  double rank_cdf(std::size_t rank, double x) const;
};

/// Weights tau^{-1}; samples must have tau > 0 and finite.
WeightedEnsemble reweight_by_inverse_tau(const std::vector<std::pair<std::vector<double>, double>>& samples);

/// CSV: sample_id,tau,weight,jump_rank,jump_size (rank 1 = largest); a sample
/// without jumps before tau gets a single row with rank 0 and size 0.
void write_ensemble_csv(std::ostream& out, const WeightedEnsemble& ens, std::size_t max_rank = 0);

}  // namespace lqglab
