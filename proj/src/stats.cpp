#include "lqglab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lqglab/errors.hpp"

namespace lqglab::stats {

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double standard_error(std::span<const double> x) {
  return x.empty() ? 0.0 : std::sqrt(variance(x) / static_cast<double>(x.size()));
}

double effective_size(std::span<const double> weights) {
  double s = 0.0, s2 = 0.0;
  for (double w : weights) {
    s += w;
    s2 += w * w;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

double Weighted::effective_size() const {
  return weights.empty() ? static_cast<double>(values.size()) : stats::effective_size(weights);
}

namespace {

struct Sorted {
  std::vector<double> x;
  std::vector<double> w;  // normalised to sum 1
};

Sorted sorted(const Weighted& a) {
  const std::size_t n = a.values.size();
  if (!a.weights.empty() && a.weights.size() != n) throw ConfigError("weighted sample: size mismatch");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return a.values[i] < a.values[j]; });
  Sorted s;
  s.x.reserve(n);
  s.w.reserve(n);
  double total = 0.0;
  for (std::size_t i : idx) {
    const double w = a.weight(i);
    if (w < 0.0 || !std::isfinite(w)) throw NumericalError("weighted sample: weights must be finite and >= 0");
    s.x.push_back(a.values[i]);
    s.w.push_back(w);
    total += w;
  }
  if (!(total > 0.0)) throw NumericalError("weighted sample: total weight must be positive");
  for (double& w : s.w) w /= total;
  return s;
}

// Walks both CDFs over the merged support; calls visit(x_prev, x, Fa, Fb)
// after all atoms at x have been absorbed.
template <typename Visit>
void merge_walk(const Sorted& a, const Sorted& b, Visit visit) {
  std::size_t i = 0, j = 0;
  double fa = 0.0, fb = 0.0;
  double prev = std::numeric_limits<double>::quiet_NaN();
  while (i < a.x.size() || j < b.x.size()) {
    double x;
    if (j >= b.x.size() || (i < a.x.size() && a.x[i] <= b.x[j])) {
      x = a.x[i];
    } else {
      x = b.x[j];
    }
    const double fa_before = fa, fb_before = fb;
    while (i < a.x.size() && a.x[i] == x) fa += a.w[i++];
    while (j < b.x.size() && b.x[j] == x) fb += b.w[j++];
    visit(prev, x, fa_before, fb_before, fa, fb);
    prev = x;
  }
}

}  // namespace

double ks_distance(const Weighted& a, const Weighted& b) {
  const Sorted sa = sorted(a), sb = sorted(b);
  double d = 0.0;
  merge_walk(sa, sb, [&](double, double, double, double, double fa, double fb) { d = std::max(d, std::abs(fa - fb)); });
  return d;
}

double ks_distance(std::span<const double> a, std::span<const double> b) {
  return ks_distance(Weighted{a, {}}, Weighted{b, {}});
}

double ks_distance_to(const Weighted& a, const std::function<double(double)>& cdf) {
  const Sorted s = sorted(a);
  double d = 0.0, f = 0.0;
  std::size_t i = 0;
  while (i < s.x.size()) {
    const double x = s.x[i];
    const double ref = cdf(x);
    d = std::max(d, std::abs(f - ref));  // left limit of the empirical CDF
    while (i < s.x.size() && s.x[i] == x) f += s.w[i++];
    d = std::max(d, std::abs(f - ref));
  }
  return d;
}

double kolmogorov_tail(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_pvalue(double d, double n, double m) {
  const double ne = n * m / (n + m);
  const double root = std::sqrt(ne);
  return kolmogorov_tail((root + 0.12 + 0.11 / root) * d);
}

double ks_critical(double alpha, double n, double m) {
  return std::sqrt(-std::log(alpha / 2.0) / 2.0) * std::sqrt((n + m) / (n * m));
}

double wasserstein1(const Weighted& a, const Weighted& b) {
  const Sorted sa = sorted(a), sb = sorted(b);
  double total = 0.0;
  merge_walk(sa, sb, [&](double prev, double x, double fa_before, double fb_before, double, double) {
    if (!std::isnan(prev)) total += std::abs(fa_before - fb_before) * (x - prev);
  });
  return total;
}

double jarque_bera_pvalue(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  if (n < 8) throw ConfigError("jarque_bera: need at least 8 observations");
  const double m = mean(x);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  const double skew = m3 / std::pow(m2, 1.5);
  const double kurt = m4 / (m2 * m2);
  const double jb = n / 6.0 * (skew * skew + 0.25 * (kurt - 3.0) * (kurt - 3.0));
  return std::exp(-0.5 * jb);
}

namespace {

Eigen::MatrixXd centred_distances(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) d(i, j) = (x.row(i) - x.row(j)).norm();
  }
  const Eigen::VectorXd row = d.rowwise().mean();
  const double all = d.mean();
  d.colwise() -= row;
  d.rowwise() -= row.transpose();
  d.array() += all;
  return d;
}

double dcor_from(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const std::vector<Eigen::Index>& perm) {
  const Eigen::Index n = a.rows();
  double ab = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      ab += a(i, j) * b(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
  }
  const double aa = a.squaredNorm(), bb = b.squaredNorm();
  if (!(aa > 0.0) || !(bb > 0.0)) return 0.0;
  return std::sqrt(std::max(ab, 0.0) / std::sqrt(aa * bb));
}

}  // namespace

double distance_correlation(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows() || x.rows() < 2) throw ConfigError("distance_correlation: need >= 2 paired rows");
  std::vector<Eigen::Index> id(static_cast<std::size_t>(x.rows()));
  std::iota(id.begin(), id.end(), 0);
  return dcor_from(centred_distances(x), centred_distances(y), id);
}

double distance_correlation_pvalue(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int permutations, Rng& rng) {
  if (x.rows() != y.rows() || x.rows() < 2) throw ConfigError("distance_correlation: need >= 2 paired rows");
  const Eigen::MatrixXd a = centred_distances(x), b = centred_distances(y);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(x.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  const double observed = dcor_from(a, b, perm);
  int exceed = 0;
  for (int p = 0; p < permutations; ++p) {
    std::shuffle(perm.begin(), perm.end(), rng);
    if (dcor_from(a, b, perm) >= observed) ++exceed;
  }
  return (1.0 + exceed) / (1.0 + permutations);
}

}  // namespace lqglab::stats
