#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "lqglab/criteria.hpp"
#include "lqglab/levy.hpp"

namespace lqglab::detail {

inline CriterionResult start(std::string id, std::string title) {
  CriterionResult r;
  r.id = std::move(id);
  r.title = std::move(title);
  return r;
}

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

template <typename... Args>
std::string fmt(const char* pattern, Args... args) {
  const int n = std::snprintf(nullptr, 0, pattern, args...);
  std::string s(static_cast<std::size_t>(n), '\0');
  std::snprintf(s.data(), s.size() + 1, pattern, args...);
  return s;
}

/// Weighted largest-jump law tabulated on a log grid and interpolated
/// linearly in log x (exact evaluation is too slow per sample point).
class LawTable {
 public:
  LawTable(double beta, double lo, double hi, int points_per_decade);
  double operator()(double x) const;
  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& values() const { return fs_; }

 private:
  std::vector<double> log_xs_, xs_, fs_;
};

/// Largest jump (0 when none) and tau of a resolved passage, tau < 0 otherwise.
std::vector<double> passage_row(const LevyPath& path, std::size_t ranks);

}  // namespace lqglab::detail
