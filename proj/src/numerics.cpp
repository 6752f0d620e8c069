#include "lqglab/numerics.hpp"

#include <cmath>
#include <limits>

#include "lqglab/errors.hpp"

namespace lqglab {

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) throw DomainError("regularized_gamma_q: need a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  const double log_prefactor = a * std::log(x) - x - std::lgamma(a);
  constexpr double kEps = 1e-16;
  if (x < a + 1.0) {
    double term = 1.0 / a, sum = term;
    for (int n = 1; n < 10000; ++n) {
      term *= x / (a + n);
      sum += term;
      if (std::abs(term) < std::abs(sum) * kEps) break;
    }
    return 1.0 - sum * std::exp(log_prefactor);
  }
  // Modified Lentz evaluation of the continued fraction for Gamma(a, x).
  constexpr double kTiny = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a, c = 1.0 / kTiny, d = 1.0 / b, h = d;
  for (int n = 1; n < 10000; ++n) {
    const double an = -n * (n - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(log_prefactor) * h;
}

namespace {

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  // Split into panels first so narrow features are not missed by the initial
  // three-point estimate.
  constexpr int kPanels = 64;
  double total = 0.0;
  const double w = (b - a) / kPanels;
  for (int k = 0; k < kPanels; ++k) {
    const double lo = a + k * w, hi = (k + 1 == kPanels) ? b : lo + w;
    const double fa = f(lo), fb = f(hi), fm = f(0.5 * (lo + hi));
    total += simpson_step(f, lo, hi, fa, fm, fb, (hi - lo) / 6.0 * (fa + 4.0 * fm + fb), tol / kPanels, 40);
  }
  return total;
}

double integrate_to_infinity(const std::function<double(double)>& f, double a, double tol) {
  auto g = [&](double u) {
    if (u >= 1.0) return 0.0;
    const double one_minus = 1.0 - u;
    const double v = f(a + u / one_minus) / (one_minus * one_minus);
    return std::isfinite(v) ? v : 0.0;
  };
  return integrate(g, 0.0, 1.0, tol);
}

}  // namespace lqglab
