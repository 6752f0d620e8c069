#pragma once

#include <functional>

namespace lqglab {

/// Regularised upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a),
/// a > 0, x >= 0 (series below a + 1, continued fraction above).
double regularized_gamma_q(double a, double x);

/// Adaptive Simpson quadrature on [a, b].
double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-10);

/// Integral over [a, inf) via the substitution x = a + u / (1 - u).
double integrate_to_infinity(const std::function<double(double)>& f, double a, double tol = 1e-10);

}  // namespace lqglab
