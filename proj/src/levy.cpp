#include "lqglab/levy.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "lqglab/errors.hpp"
#include "lqglab/numerics.hpp"

namespace lqglab {

double beta_of_gamma(double gamma) {
  // The endpoint sqrt(8/3) (beta = 2) is a valid evaluation point, though not a stable index we sample.
  if (!(gamma >= std::sqrt(8.0 / 3.0) - 1e-12 && gamma <= 2.0)) {
    throw ConfigError("beta_of_gamma: gamma must lie in [sqrt(8/3), 2], got " + std::to_string(gamma));
  }
  return 4.0 / (gamma * gamma) + 0.5;
}

double gamma_of_minus(double beta) {
  if (!(beta > 1.0 && beta < 2.0)) throw DomainError("gamma_of_minus: beta must lie in (1, 2)");
  return std::tgamma(-beta);
}

void check_beta(double beta) {
  if (!(beta >= 1.5 && beta < 2.0)) throw ConfigError("levy: beta must lie in [3/2, 2), got " + std::to_string(beta));
}

namespace {

void check_options(const LevyOptions& o) {
  if (!(o.delta > 0.0 && o.delta < 1.0)) throw ConfigError("levy: delta must lie in (0, 1)");
  if (!(o.dt > 0.0)) throw ConfigError("levy: dt must be positive");
  if (!(o.horizon > 0.0)) throw ConfigError("levy: horizon must be positive");
  if (!(o.level < 0.0)) throw ConfigError("levy: passage level must be negative");
}

struct Rates {
  double rate, drift, sigma;
};

Rates rates(double beta, const LevyOptions& o) {
  Rates r;
  r.rate = std::pow(o.delta, -beta) / beta;
  r.drift = -std::pow(o.delta, 1.0 - beta) / (beta - 1.0);
  r.sigma = o.gaussian_small_jumps ? std::sqrt(std::pow(o.delta, 2.0 - beta) / (2.0 - beta)) : 0.0;
  return r;
}

}  // namespace

std::size_t LevyPath::jump_count_above(double x, double until) const {
  std::size_t n = 0;
  for (const auto& j : jumps) {
    if (j.time > until) break;
    if (j.size > x) ++n;
  }
  return n;
}

LevyPath sample_levy_path(double beta, const LevyOptions& opts, Rng& rng) {
  check_beta(beta);
  check_options(opts);
  const Rates r = rates(beta, opts);
  LevyPath path;
  path.beta = beta;
  path.delta = opts.delta;
  path.drift = r.drift;
  path.variance_rate = r.sigma * r.sigma;
  path.horizon = opts.horizon;
  path.dt = opts.dt;
  path.level = opts.level;

  const bool coupled = opts.coupling_rate > 0.0;
  if (coupled && opts.coupling_rate < r.rate) throw ConfigError("levy: coupling rate below the jump rate");
  std::exponential_distribution<double> wait(coupled ? opts.coupling_rate : r.rate);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal;
  const double level = opts.level;
  std::vector<double> skeleton;
  if (opts.record_skeleton) skeleton.push_back(0.0);

  double t = 0.0, x = 0.0;
  double next_jump = wait(rng);
  long grid = 1;  // index of the next skeleton grid point
  while (t < opts.horizon) {
    const double grid_time = static_cast<double>(grid) * opts.dt;
    const double end = std::min({next_jump, grid_time, opts.horizon});
    const double step = end - t;
    double y = x + r.drift * step;
    if (r.sigma > 0.0) y += r.sigma * std::sqrt(step) * normal(rng);
    if (opts.stop_at_passage && !path.tau) {
      if (y <= level) {
        path.tau = t + step * (x - level) / (x - y);
      } else if (r.sigma > 0.0 && step > 0.0) {
        const double p = std::exp(-2.0 * (x - level) * (y - level) / (r.sigma * r.sigma * step));
        if (unif(rng) < p) path.tau = t + step * (x - level) / ((x - level) + (y - level));
      }
    }
    x = y;
    t = end;
    if (path.tau && opts.stop_at_passage) break;
    if (end == grid_time) {
      if (opts.record_skeleton) skeleton.push_back(x);
      ++grid;
    }
    if (end == next_jump) {
      const double u = 1.0 - unif(rng);
      if (!coupled) {
        const double size = opts.delta * std::pow(u, -1.0 / beta);
        path.jumps.push_back({t, size});
        x += size;
      } else if (const double level_r = opts.coupling_rate * u; level_r <= r.rate) {
        const double size = std::pow(beta * level_r, -1.0 / beta);
        path.jumps.push_back({t, size});
        x += size;
      }
      next_jump = t + wait(rng);
    }
  }
  path.end_time = t;
  path.end_value = x;
  if (opts.record_skeleton) path.skeleton = Eigen::Map<Eigen::VectorXd>(skeleton.data(), static_cast<Eigen::Index>(skeleton.size()));
  return path;
}

Eigen::VectorXd sample_levy_increments(double beta, double t, int blocks, const LevyOptions& opts, Rng& rng) {
  check_beta(beta);
  check_options(opts);
  if (!(t > 0.0) || blocks < 1) throw ConfigError("levy increments: need t > 0 and blocks >= 1");
  const Rates r = rates(beta, opts);
  const double s = t / blocks;
  std::poisson_distribution<long> count(r.rate * s);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal;
  Eigen::VectorXd out(blocks);
  for (int b = 0; b < blocks; ++b) {
    double v = r.drift * s;
    const long n = count(rng);
    for (long k = 0; k < n; ++k) v += opts.delta * std::pow(1.0 - unif(rng), -1.0 / beta);
    if (r.sigma > 0.0) v += r.sigma * std::sqrt(s) * normal(rng);
    out(b) = v;
  }
  return out;
}

std::optional<double> first_passage(const LevyPath& path) { return path.tau; }

std::vector<double> jumps_before_tau(const LevyPath& path) {
  if (!path.tau) throw DomainError("jumps_before_tau: passage time not resolved within the horizon");
  std::vector<double> out;
  for (const auto& j : path.jumps) {
    if (j.time > *path.tau) break;
    out.push_back(j.size);
  }
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

double levy_laplace(double beta, double lambda) { return std::exp(gamma_of_minus(beta) * std::pow(lambda, beta)); }

double passage_laplace(double beta, double q) {
  return std::exp(-std::pow(q / gamma_of_minus(beta), 1.0 / beta));
}

double reweighted_largest_jump_target(double beta, double x) {
  if (!(x > 0.0)) return 0.0;
  const double s = std::pow(x, -beta) / beta;
  return regularized_gamma_q(beta, std::pow(s / gamma_of_minus(beta), 1.0 / beta));
}

double reweighted_largest_jump_target_quadrature(double beta, double x) {
  if (!(x > 0.0)) return 0.0;
  const double s = std::pow(x, -beta) / beta;
  // E[tau^{-1} e^{-s tau}] = int_s^inf E[e^{-q tau}] dq.
  auto laplace = [beta](double q) { return passage_laplace(beta, q); };
  return integrate_to_infinity(laplace, s, 1e-12) / integrate_to_infinity(laplace, 0.0, 1e-12);
}

double truncated_laplace_exponent(double beta, double x, double lambda) {
  if (!(x > 0.0) || !(lambda >= 0.0)) throw DomainError("truncated_laplace_exponent: need x > 0 and lambda >= 0");
  if (lambda == 0.0) return 0.0;
  const double a = lambda * x;
  // Gamma(1 - beta, a) from the upper incomplete gamma of positive order 2 - beta.
  const double upper2 = regularized_gamma_q(2.0 - beta, a) * std::tgamma(2.0 - beta);
  const double upper1 = (upper2 - std::pow(a, 1.0 - beta) * std::exp(-a)) / (1.0 - beta);
  const double tail = std::pow(lambda, beta) * (-std::expm1(-a) * std::pow(a, -beta) + upper1) / beta;
  return gamma_of_minus(beta) * std::pow(lambda, beta) + tail;
}

double truncated_laplace_exponent_quadrature(double beta, double x, double lambda) {
  if (!(x > 0.0) || !(lambda >= 0.0)) throw DomainError("truncated_laplace_exponent: need x > 0 and lambda >= 0");
  auto integrand = [&](double y) { return -std::expm1(-lambda * y) * std::pow(y, -beta - 1.0); };
  return gamma_of_minus(beta) * std::pow(lambda, beta) + integrate_to_infinity(integrand, x, 1e-13);
}

double weighted_largest_jump_cdf(double beta, double x) {
  check_beta(beta);
  if (!(x > 0.0)) return 0.0;
  const double s = std::pow(x, -beta) / beta;
  auto inverse = [&](double u) {
    double lo = 0.0, hi = 1.0;
    while (truncated_laplace_exponent(beta, x, hi) < u) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (truncated_laplace_exponent(beta, x, mid) < u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  auto integrand = [&](double u) { return std::exp(-inverse(u)); };
  const double norm = gamma_of_minus(beta) * beta * std::tgamma(beta);  // E[tau^{-1}]
  return integrate_to_infinity(integrand, s, 1e-11) / norm;
}

double WeightedEnsemble::effective_sample_size() const {
  double s = 0.0, s2 = 0.0;
  for (double w : weights) {
    s += w;
    s2 += w * w;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

double WeightedEnsemble::rank_cdf(std::size_t rank, double x) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double v = rank < samples[k].size() ? samples[k][rank] : 0.0;
    if (v <= x) acc += weights[k];
  }
  return normalization > 0.0 ? acc / normalization : 0.0;
}

WeightedEnsemble reweight_by_inverse_tau(const std::vector<std::pair<std::vector<double>, double>>& samples) {
  WeightedEnsemble ens;
  for (const auto& [jumps, tau] : samples) {
    const double w = 1.0 / tau;
    if (!(tau > 0.0) || !std::isfinite(w)) throw NumericalError("reweight_by_inverse_tau: tau^{-1} is not finite");
    std::vector<double> seq = jumps;
    std::sort(seq.begin(), seq.end(), std::greater<>());
    ens.samples.push_back(std::move(seq));
    ens.taus.push_back(tau);
    ens.weights.push_back(w);
    ens.normalization += w;
  }
  return ens;
}

void write_ensemble_csv(std::ostream& out, const WeightedEnsemble& ens, std::size_t max_rank) {
  out << "sample_id,tau,weight,jump_rank,jump_size\n" << std::setprecision(17);
  for (std::size_t k = 0; k < ens.size(); ++k) {
    const auto& seq = ens.samples[k];
    const std::size_t n = max_rank ? std::min(max_rank, seq.size()) : seq.size();
    if (n == 0) out << k << ',' << ens.taus[k] << ',' << ens.weights[k] << ",0,0\n";
    for (std::size_t r = 0; r < n; ++r) {
      out << k << ',' << ens.taus[k] << ',' << ens.weights[k] << ',' << r + 1 << ',' << seq[r] << '\n';
    }
  }
}

}  // namespace lqglab
