#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lqglab/random.hpp"

namespace lqglab::stats {

double mean(std::span<const double> x);
double variance(std::span<const double> x);  // unbiased
double standard_error(std::span<const double> x);

/// Weighted sample: values with nonnegative weights (empty weights = all 1).
struct Weighted {
  std::span<const double> values;
  std::span<const double> weights;

  double weight(std::size_t k) const { return weights.empty() ? 1.0 : weights[k]; }
  double effective_size() const;
};

/// Kish effective sample size (sum w)^2 / sum w^2.
double effective_size(std::span<const double> weights);

/// sup_x |F_a(x) - F_b(x)| for (weighted) empirical CDFs; ties handled exactly.
double ks_distance(const Weighted& a, const Weighted& b);
double ks_distance(std::span<const double> a, std::span<const double> b);

/// sup_x |F_a(x) - F(x)| against a continuous reference CDF.
double ks_distance_to(const Weighted& a, const std::function<double(double)>& cdf);

/// Asymptotic Kolmogorov tail P(K > lambda).
double kolmogorov_tail(double lambda);
/// p-value of a two-sample statistic with (effective) sizes n, m.
double ks_pvalue(double d, double n, double m);
/// c(alpha) sqrt((n + m) / (n m)), c(alpha) = sqrt(-log(alpha / 2) / 2).
double ks_critical(double alpha, double n, double m);

/// Wasserstein-1 distance between (weighted) empirical laws on the line.
double wasserstein1(const Weighted& a, const Weighted& b);

/// Jarque-Bera normality p-value (chi-square with 2 degrees of freedom).
double jarque_bera_pvalue(std::span<const double> x);

/// Sample distance correlation of paired rows of x and y.
double distance_correlation(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);
/// Permutation p-value of the distance correlation.
double distance_correlation_pvalue(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int permutations, Rng& rng);

}  // namespace lqglab::stats
