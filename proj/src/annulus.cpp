#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/SparseCholesky>

#include "lqglab/gmc.hpp"
#include "lqglab/markov_verify.hpp"

namespace lqglab {

double annulus_modulus(const LatticeDomain& domain, const std::vector<char>& region, const std::vector<char>& hole) {
  const auto cells = static_cast<std::size_t>(domain.cell_count());
  if (region.size() != cells || hole.size() != cells) throw ConfigError("annulus_modulus: mask size mismatch");
  std::vector<int> node(cells, -1);
  int n = 0;
  for (std::size_t c = 0; c < cells; ++c) {
    if (region[c]) node[c] = n++;
  }
  if (n == 0) throw DomainError("annulus_modulus: empty region");
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd to_outer = Eigen::VectorXd::Zero(n);
  bool touches_hole = false;
  constexpr int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
  for (int j = 0; j < domain.ny; ++j) {
    for (int i = 0; i < domain.nx; ++i) {
      const int v = node[static_cast<std::size_t>(domain.index(i, j))];
      if (v < 0) continue;
      double diag = 0.0;
      for (int d = 0; d < 4; ++d) {
        const int ii = i + dx[d], jj = j + dy[d];
        if (!domain.contains(ii, jj)) {
          // Half a cell to the outer boundary, held at potential 1.
          diag += 2.0;
          rhs(v) += 2.0;
          to_outer(v) += 2.0;
          continue;
        }
        const auto c = static_cast<std::size_t>(domain.index(ii, jj));
        if (hole[c]) {
          diag += 2.0;  // inner boundary at potential 0
          touches_hole = true;
        } else if (node[c] >= 0) {
          diag += 1.0;
          trips.emplace_back(v, node[c], -1.0);
        }
      }
      trips.emplace_back(v, v, diag);
    }
  }
  if (!touches_hole || !(to_outer.sum() > 0.0)) throw DomainError("annulus_modulus: region does not separate boundaries");
  Eigen::SparseMatrix<double> lap(n, n);
  lap.setFromTriplets(trips.begin(), trips.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(lap);
  if (solver.info() != Eigen::Success) throw NumericalError("annulus_modulus: factorisation failed");
  const Eigen::VectorXd potential = solver.solve(rhs);
  const double current = (to_outer.array() * (1.0 - potential.array())).sum();
  return std::exp(-2.0 * std::numbers::pi / current);
}

AnnulusSummary make_annulus_summary(const LoopEnsemble& ens, std::size_t j, const Field& field, double gamma) {
  if (j >= ens.size()) throw ConfigError("make_annulus_summary: loop index out of range");
  if (!(field.domain == ens.domain)) throw ConfigError("make_annulus_summary: field and ensemble domains differ");
  const auto& d = ens.domain;
  const auto cells = static_cast<std::size_t>(d.cell_count());
  std::vector<char> region(cells, 0), hole(cells, 0);
  const Measure mu = area_measure(field, gamma);
  AnnulusSummary s;
  s.mesh = d.mesh;
  std::vector<double> masses;
  for (std::size_t k = 0; k < static_cast<std::size_t>(mu.size()); ++k) {
    const auto c = static_cast<std::size_t>(mu.atom_ids[k]);
    if (ens.label[c] == static_cast<int>(j)) continue;
    s.atoms.push_back(mu.positions[k]);
    masses.push_back(mu.masses(static_cast<Eigen::Index>(k)));
  }
  s.masses = Eigen::Map<Eigen::VectorXd>(masses.data(), static_cast<Eigen::Index>(masses.size()));
  for (int jj = 0; jj < d.ny; ++jj) {
    for (int i = 0; i < d.nx; ++i) {
      const auto c = static_cast<std::size_t>(d.index(i, jj));
      if (ens.label[c] == static_cast<int>(j)) {
        hole[c] = 1;
      } else if (ens.label[c] != -2) {
        region[c] = 1;
        if (ens.label[c] == -1) s.gasket.push_back(d.cell_center(i, jj));
      }
    }
  }
  s.r = annulus_modulus(d, region, hole);
  return s;
}

namespace {

// Dinic max flow with real capacities.
class MaxFlow {
 public:
  explicit MaxFlow(int n) : head_(static_cast<std::size_t>(n), -1), level_(static_cast<std::size_t>(n)), it_(static_cast<std::size_t>(n)) {}

  void add_edge(int u, int v, double cap) {
    edges_.push_back({v, head_[static_cast<std::size_t>(u)], cap});
    head_[static_cast<std::size_t>(u)] = static_cast<int>(edges_.size()) - 1;
    edges_.push_back({u, head_[static_cast<std::size_t>(v)], 0.0});
    head_[static_cast<std::size_t>(v)] = static_cast<int>(edges_.size()) - 1;
  }

  double run(int s, int t) {
    double flow = 0.0;
    while (bfs(s, t)) {
      it_ = head_;
      while (true) {
        const double f = dfs(s, t, std::numeric_limits<double>::infinity());
        if (f <= kEps) break;
        flow += f;
      }
    }
    return flow;
  }

 private:
  static constexpr double kEps = 1e-15;
  struct Edge {
    int to, next;
    double cap;
  };

  bool bfs(int s, int t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::vector<int> queue{s};
    level_[static_cast<std::size_t>(s)] = 0;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const int u = queue[q];
      for (int e = head_[static_cast<std::size_t>(u)]; e >= 0; e = edges_[static_cast<std::size_t>(e)].next) {
        const auto& ed = edges_[static_cast<std::size_t>(e)];
        if (ed.cap > kEps && level_[static_cast<std::size_t>(ed.to)] < 0) {
          level_[static_cast<std::size_t>(ed.to)] = level_[static_cast<std::size_t>(u)] + 1;
          queue.push_back(ed.to);
        }
      }
    }
    return level_[static_cast<std::size_t>(t)] >= 0;
  }

  double dfs(int u, int t, double pushed) {
    if (u == t) return pushed;
    for (int& e = it_[static_cast<std::size_t>(u)]; e >= 0; e = edges_[static_cast<std::size_t>(e)].next) {
      auto& ed = edges_[static_cast<std::size_t>(e)];
      if (ed.cap <= kEps || level_[static_cast<std::size_t>(ed.to)] != level_[static_cast<std::size_t>(u)] + 1) continue;
      const double f = dfs(ed.to, t, std::min(pushed, ed.cap));
      if (f > kEps) {
        ed.cap -= f;
        edges_[static_cast<std::size_t>(e ^ 1)].cap += f;
        return f;
      }
    }
    return 0.0;
  }

  std::vector<Edge> edges_;
  std::vector<int> head_, level_, it_;
};

struct Atoms {
  std::vector<Point> x;
  std::vector<double> m;
  double total = 0.0;
};

Atoms positive_atoms(const std::vector<Point>& x, const Eigen::VectorXd& m) {
  if (static_cast<Eigen::Index>(x.size()) != m.size()) throw ConfigError("prokhorov: positions and masses differ in size");
  Atoms a;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double w = m(static_cast<Eigen::Index>(k));
    if (w < 0.0 || !std::isfinite(w)) throw NumericalError("prokhorov: masses must be finite and >= 0");
    if (w == 0.0) continue;
    a.x.push_back(x[k]);
    a.m.push_back(w);
    a.total += w;
  }
  return a;
}

double transport_within(const Atoms& a, const Atoms& b, double eps) {
  const int na = static_cast<int>(a.x.size()), nb = static_cast<int>(b.x.size());
  MaxFlow flow(na + nb + 2);
  const int s = na + nb, t = s + 1;
  for (int i = 0; i < na; ++i) flow.add_edge(s, i, a.m[static_cast<std::size_t>(i)]);
  for (int j = 0; j < nb; ++j) flow.add_edge(na + j, t, b.m[static_cast<std::size_t>(j)]);
  const double inf = a.total + b.total + 1.0;
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nb; ++j) {
      if (std::abs(a.x[static_cast<std::size_t>(i)] - b.x[static_cast<std::size_t>(j)]) <= eps) flow.add_edge(i, na + j, inf);
    }
  }
  return flow.run(s, t);
}

}  // namespace

double prokhorov_distance(const std::vector<Point>& xa, const Eigen::VectorXd& ma, const std::vector<Point>& xb,
                          const Eigen::VectorXd& mb) {
  const Atoms a = positive_atoms(xa, ma), b = positive_atoms(xb, mb);
  const double top = std::max(a.total, b.total);
  if (a.x.empty() || b.x.empty()) return top;
  // The feasibility gap max(|a|, |b|) - F(eps) only changes at pairwise
  // distances, so the infimum is attained on that finite candidate set.
  std::vector<double> cand{0.0};
  for (const auto& p : a.x) {
    for (const auto& q : b.x) cand.push_back(std::abs(p - q));
  }
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  while (cand.size() > 1 && cand.back() > top) cand.pop_back();
  auto gap = [&](std::size_t k) { return top - transport_within(a, b, cand[k]); };
  std::size_t lo = 0, hi = cand.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (cand[mid] >= gap(mid)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  double best = top;
  if (lo < cand.size()) best = std::min(best, cand[lo]);
  if (lo > 0) best = std::min(best, std::max(cand[lo - 1], gap(lo - 1)));
  return std::max(best, 0.0);
}

namespace {

class NearestGrid {
 public:
  explicit NearestGrid(const std::vector<Point>& pts) : pts_(pts) {
    double x0 = pts.front().real(), x1 = x0, y0 = pts.front().imag(), y1 = y0;
    for (const auto& p : pts) {
      x0 = std::min(x0, p.real());
      x1 = std::max(x1, p.real());
      y0 = std::min(y0, p.imag());
      y1 = std::max(y1, p.imag());
    }
    origin_ = Point(x0, y0);
    side_ = std::max({(x1 - x0) / 64.0, (y1 - y0) / 64.0, 1e-9});
    nx_ = static_cast<int>((x1 - x0) / side_) + 1;
    ny_ = static_cast<int>((y1 - y0) / side_) + 1;
    buckets_.resize(static_cast<std::size_t>(nx_ * ny_));
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const auto [i, j] = bucket(pts[k]);
      buckets_[static_cast<std::size_t>(j * nx_ + i)].push_back(static_cast<int>(k));
    }
  }

  double nearest(Point p) const {
    // Search outward from the grid cell nearest to p; a point in ring r is at
    // least (r - 1) side from q, hence at least that minus |p - q| from p.
    auto [ci, cj] = bucket(p);
    ci = std::clamp(ci, 0, nx_ - 1);
    cj = std::clamp(cj, 0, ny_ - 1);
    const Point q = origin_ + Point((ci + 0.5) * side_, (cj + 0.5) * side_);
    const double offset = std::abs(p - q);
    double best = std::numeric_limits<double>::infinity();
    auto scan = [&](int i, int j) {
      if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return;
      for (int k : buckets_[static_cast<std::size_t>(j * nx_ + i)]) {
        best = std::min(best, std::abs(p - pts_[static_cast<std::size_t>(k)]));
      }
    };
    const int max_ring = nx_ + ny_;
    for (int ring = 0; ring <= max_ring; ++ring) {
      if (ring > 0 && (ring - 1) * side_ - offset > best) break;
      if (ring == 0) {
        scan(ci, cj);
        continue;
      }
      for (int d = -ring; d <= ring; ++d) {
        scan(ci + d, cj - ring);
        scan(ci + d, cj + ring);
      }
      for (int d = -ring + 1; d <= ring - 1; ++d) {
        scan(ci - ring, cj + d);
        scan(ci + ring, cj + d);
      }
    }
    return best;
  }

 private:
  std::pair<int, int> bucket(Point p) const {
    const Point g = (p - origin_) / side_;
    return {static_cast<int>(std::floor(g.real())), static_cast<int>(std::floor(g.imag()))};
  }

  const std::vector<Point>& pts_;
  Point origin_;
  double side_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> buckets_;
};

double directed_hausdorff(const std::vector<Point>& a, const NearestGrid& b) {
  double d = 0.0;
  for (const auto& p : a) d = std::max(d, b.nearest(p));
  return d;
}

}  // namespace

double hausdorff_distance(const std::vector<Point>& a, const std::vector<Point>& b) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return 2.0;  // diameter of the unit disk
  const NearestGrid ga(a), gb(b);
  return std::max(directed_hausdorff(a, gb), directed_hausdorff(b, ga));
}

namespace {

void bin_measure(const std::vector<Point>& x, const Eigen::VectorXd& m, Point rot, int grid, std::vector<Point>& pos,
                 Eigen::VectorXd& mass) {
  const double w = 2.0 / grid;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(grid * grid);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const Point p = x[k] * rot;
    const int i = std::clamp(static_cast<int>(std::floor((p.real() + 1.0) / w)), 0, grid - 1);
    const int j = std::clamp(static_cast<int>(std::floor((p.imag() + 1.0) / w)), 0, grid - 1);
    acc(j * grid + i) += m(static_cast<Eigen::Index>(k));
  }
  pos.clear();
  std::vector<double> ms;
  for (int j = 0; j < grid; ++j) {
    for (int i = 0; i < grid; ++i) {
      if (acc(j * grid + i) == 0.0) continue;
      pos.emplace_back(-1.0 + (i + 0.5) * w, -1.0 + (j + 0.5) * w);
      ms.push_back(acc(j * grid + i));
    }
  }
  mass = Eigen::Map<Eigen::VectorXd>(ms.data(), static_cast<Eigen::Index>(ms.size()));
}

}  // namespace

double annulus_distance(const AnnulusSummary& a, const AnnulusSummary& b, const AnnulusDistanceOptions& opts) {
  if (opts.rotations < 1 || opts.grid < 1) throw ConfigError("annulus_distance: rotations and grid must be >= 1");
  std::vector<Point> pb;
  Eigen::VectorXd mb;
  bin_measure(b.atoms, b.masses, Point(1.0, 0.0), opts.grid, pb, mb);
  const double dr = std::abs(a.r - b.r);
  double best = std::numeric_limits<double>::infinity();
  std::vector<Point> pa, ga;
  Eigen::VectorXd ma;
  for (int k = 0; k < opts.rotations; ++k) {
    const Point rot = std::polar(1.0, 2.0 * std::numbers::pi * k / opts.rotations);
    bin_measure(a.atoms, a.masses, rot, opts.grid, pa, ma);
    ga.resize(a.gasket.size());
    for (std::size_t i = 0; i < a.gasket.size(); ++i) ga[i] = a.gasket[i] * rot;
    const double total = prokhorov_distance(pa, ma, pb, mb) + hausdorff_distance(ga, b.gasket) + dr;
    best = std::min(best, total);
  }
  return best;
}

}  // namespace lqglab
