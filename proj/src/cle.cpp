#include "lqglab/cle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include <Eigen/SparseCholesky>
#include <json.hpp>

#include "lqglab/gmc.hpp"

namespace lqglab {

double central_charge(double kappa) {
  // The endpoint 8/3 (c = 0, empty soup) is a valid evaluation point.
  if (!(kappa >= 8.0 / 3.0 - 1e-12 && kappa <= 4.0)) {
    throw ConfigError("cle: central charge needs kappa in [8/3, 4], got " + std::to_string(kappa));
  }
  const double t = 2.0 / std::sqrt(kappa) - std::sqrt(kappa) / 2.0;
  return 1.0 - 6.0 * t * t;
}

void check_kappa(double kappa) {
  if (!(kappa > 8.0 / 3.0 && kappa <= 4.0)) {
    throw ConfigError("cle: kappa must lie in (8/3, 4], got " + std::to_string(kappa));
  }
}

namespace {

constexpr int kDx[4] = {1, 0, -1, 0};  // E, N, W, S
constexpr int kDy[4] = {0, 1, 0, -1};

// Logarithmic law P(m) = q^m / (m * -log(1 - q)), by sequential inversion.
int sample_logarithmic(double q, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  const double norm = -std::log1p(-q);
  double p = q / norm, cdf = p;
  int m = 1;
  while (u > cdf && p > 0.0) {
    p *= q * m / (m + 1.0);
    cdf += p;
    ++m;
  }
  return m;
}

}  // namespace

LoopSoupSampler::LoopSoupSampler(const LatticeDomain& domain) : domain_(domain) {
  domain_.validate();
  const int cw = domain_.nx + 1;
  std::vector<int> id(static_cast<std::size_t>(cw * (domain_.ny + 1)), -1);
  for (int b = 0; b <= domain_.ny; ++b) {
    for (int a = 0; a <= domain_.nx; ++a) {
      if (!domain_.interior_corner(a, b)) continue;
      id[static_cast<std::size_t>(b * cw + a)] = static_cast<int>(corners_.size());
      corners_.emplace_back(a, b);
    }
  }
  const int n = static_cast<int>(corners_.size());
  neighbours_.resize(corners_.size());
  std::vector<Eigen::Triplet<double>> trips;
  for (int v = 0; v < n; ++v) {
    const auto [a, b] = corners_[static_cast<std::size_t>(v)];
    trips.emplace_back(v, v, 1.0);
    for (int d = 0; d < 4; ++d) {
      const int aa = a + kDx[d], bb = b + kDy[d];
      int u = -1;
      if (aa >= 0 && bb >= 0 && aa <= domain_.nx && bb <= domain_.ny) u = id[static_cast<std::size_t>(bb * cw + aa)];
      neighbours_[static_cast<std::size_t>(v)][static_cast<std::size_t>(d)] = u;
      if (u >= 0) trips.emplace_back(v, u, -0.25);
    }
  }
  q_ = Eigen::VectorXd::Zero(n);
  order_.resize(corners_.size());
  rank_.resize(corners_.size());
  if (n == 0) return;
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(m);
  if (ldlt.info() != Eigen::Success) throw NumericalError("loop soup: factorisation of I - P failed");
  // Pivot t is 1 / G_{E_t}(e_t, e_t) with E_t = {e_0, ..., e_t} the vertices
  // eliminated so far, so processing in reverse elimination order makes E_t
  // exactly the set of vertices not yet processed.
  const auto& perm = ldlt.permutationP().indices();
  const Eigen::VectorXd d = ldlt.vectorD();
  for (int v = 0; v < n; ++v) {
    const int t = perm(v);
    const int k = n - 1 - t;
    order_[static_cast<std::size_t>(k)] = v;
    rank_[static_cast<std::size_t>(v)] = k;
    q_(k) = std::clamp(1.0 - d(t), 0.0, 1.0 - 1e-15);
  }
}

LoopSoup LoopSoupSampler::sample(double intensity, Rng& rng) const {
  if (!(intensity >= 0.0 && intensity <= 0.5)) throw ConfigError("loop soup: intensity must lie in [0, 1/2]");
  LoopSoup soup;
  soup.domain = domain_;
  soup.intensity = intensity;
  if (intensity == 0.0) return soup;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<int> path;
  const int n = vertex_count();
  for (int k = 0; k < n; ++k) {
    const double q = q_(k);
    if (q <= 0.0) continue;
    const int x = order_[static_cast<std::size_t>(k)];
    std::poisson_distribution<int> count(-intensity * std::log1p(-q));
    const int loops = count(rng);
    for (int l = 0; l < loops; ++l) {
      const int visits = sample_logarithmic(q, rng);
      path.assign(1, x);
      for (int e = 0; e < visits; ++e) {
        // Excursion from x inside D_k conditioned to come back: retry until
        // the walk returns before leaving D_k.
        const std::size_t base = path.size();
        for (;;) {
          int v = x;
          bool ok = false;
          for (;;) {
            const int u = neighbours_[static_cast<std::size_t>(v)][rng() >> 62];
            if (u < 0 || rank_[static_cast<std::size_t>(u)] < k) break;
            path.push_back(u);
            if (u == x) {
              ok = true;
              break;
            }
            v = u;
          }
          if (ok) break;
          path.resize(base);
        }
      }
      const double mark = unif(rng);
      if (path.size() == 3) continue;  // two-step back-and-forth loop
      LatticeLoop loop;
      loop.corners.reserve(path.size());
      for (int v : path) loop.corners.push_back(corners_[static_cast<std::size_t>(v)]);
      soup.loops.push_back(std::move(loop));
      soup.marks.push_back(mark);
    }
  }
  return soup;
}

LoopSoup sample_loop_soup(const LatticeDomain& domain, double kappa, Rng& rng) {
  check_kappa(kappa);
  return LoopSoupSampler(domain).sample(central_charge(kappa) / 2.0, rng);
}

LoopSoup thin(const LoopSoup& soup, double intensity) {
  if (!(intensity >= 0.0 && intensity <= soup.intensity)) {
    throw ConfigError("thin: target intensity must lie in [0, soup intensity]");
  }
  LoopSoup out;
  out.domain = soup.domain;
  out.intensity = intensity;
  const double ratio = soup.intensity > 0.0 ? intensity / soup.intensity : 0.0;
  for (std::size_t k = 0; k < soup.loops.size(); ++k) {
    if (soup.marks[k] < ratio) {
      out.loops.push_back(soup.loops[k]);
      out.marks.push_back(soup.marks[k] / ratio);
    }
  }
  return out;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
};

struct ClusterInfo {
  int root = -1;
  std::vector<int> corners;
  int a0 = 0, a1 = 0, b0 = 0, b1 = 0;
  std::vector<int> hull;  // cell indices
  LatticeLoop boundary;
};

// Edge ownership on the dual lattice: horizontal edge (a,b)-(a+1,b) and
// vertical edge (a,b)-(a,b+1), each tagged with the owning cluster root.
struct EdgeOwners {
  int nx, ny;
  std::vector<int> h, v;
  EdgeOwners(int nx_, int ny_)
      : nx(nx_), ny(ny_), h(static_cast<std::size_t>(nx_ * (ny_ + 1)), -1),
        v(static_cast<std::size_t>((nx_ + 1) * ny_), -1) {}
  int* slot(int a, int b, int d) {
    // Edge leaving corner (a, b) in direction d.
    if (d == 2) return slot(a - 1, b, 0);
    if (d == 3) return slot(a, b - 1, 1);
    if (d == 0) {
      if (a < 0 || a >= nx || b < 0 || b > ny) return nullptr;
      return &h[static_cast<std::size_t>(b * nx + a)];
    }
    if (a < 0 || a > nx || b < 0 || b >= ny) return nullptr;
    return &v[static_cast<std::size_t>(b * (nx + 1) + a)];
  }
  int owner(int a, int b, int d) {
    const int* s = slot(a, b, d);
    return s ? *s : -1;
  }
};

int step_direction(Corner p, Corner q) {
  for (int d = 0; d < 4; ++d) {
    if (q.first - p.first == kDx[d] && q.second - p.second == kDy[d]) return d;
  }
  throw ConfigError("loop: consecutive corners are not lattice neighbours");
}

// Cells enclosed by the cluster's edges: flood the complement from a ring
// just outside the bounding box; whatever stays dry is the filled hull.
std::vector<int> filled_hull(const LatticeDomain& dom, const ClusterInfo& c, EdgeOwners& edges) {
  const int i0 = c.a0 - 1, j0 = c.b0 - 1;
  const int w = c.a1 - c.a0 + 2, hgt = c.b1 - c.b0 + 2;
  std::vector<char> wet(static_cast<std::size_t>(w * hgt), 0);
  std::vector<int> stack;
  auto push = [&](int li, int lj) {
    auto& s = wet[static_cast<std::size_t>(lj * w + li)];
    if (!s) {
      s = 1;
      stack.push_back(lj * w + li);
    }
  };
  for (int li = 0; li < w; ++li) {
    push(li, 0);
    push(li, hgt - 1);
  }
  for (int lj = 0; lj < hgt; ++lj) {
    push(0, lj);
    push(w - 1, lj);
  }
  while (!stack.empty()) {
    const int cell = stack.back();
    stack.pop_back();
    const int li = cell % w, lj = cell / w;
    const int i = i0 + li, j = j0 + lj;
    // To the east the separating edge is vertical from corner (i+1, j).
    if (li + 1 < w && edges.owner(i + 1, j, 1) != c.root) push(li + 1, lj);
    if (li > 0 && edges.owner(i, j, 1) != c.root) push(li - 1, lj);
    if (lj + 1 < hgt && edges.owner(i, j + 1, 0) != c.root) push(li, lj + 1);
    if (lj > 0 && edges.owner(i, j, 0) != c.root) push(li, lj - 1);
  }
  std::vector<int> hull;
  for (int lj = 0; lj < hgt; ++lj) {
    for (int li = 0; li < w; ++li) {
      if (!wet[static_cast<std::size_t>(lj * w + li)]) hull.push_back(dom.index(i0 + li, j0 + lj));
    }
  }
  return hull;
}

// Clockwise walk around the outer face of the cluster's edge graph, keeping
// the exterior on the left, from the leftmost-topmost corner.
LatticeLoop trace_outer_boundary(const ClusterInfo& c, int corner_width, EdgeOwners& edges) {
  int start = c.corners.front();
  for (int id : c.corners) {
    const int a = id % corner_width, b = id / corner_width;
    const int sa = start % corner_width, sb = start / corner_width;
    if (a < sa || (a == sa && b > sb)) start = id;
  }
  const Corner s{start % corner_width, start / corner_width};
  LatticeLoop loop;
  loop.corners.push_back(s);
  Corner p = s;
  int incoming = 0;  // as if arriving from the exterior to the west
  int first_out = -1;
  for (std::size_t guard = 0;; ++guard) {
    int out = -1;
    for (int turn : {1, 0, 3, 2}) {
      const int d = (incoming + turn) % 4;
      if (edges.owner(p.first, p.second, d) == c.root) {
        out = d;
        break;
      }
    }
    if (out < 0) throw NumericalError("loop trace: isolated corner in cluster");
    if (p == s && out == first_out) break;
    if (first_out < 0) first_out = out;
    p = Corner{p.first + kDx[out], p.second + kDy[out]};
    loop.corners.push_back(p);
    incoming = out;
    if (guard > 8 * c.corners.size() + 16) throw NumericalError("loop trace did not close");
  }
  return loop;
}

}  // namespace

LoopEnsemble extract_loop_ensemble(const LoopSoup& soup) {
  const LatticeDomain& dom = soup.domain;
  const int cw = dom.nx + 1;
  const std::size_t corner_count = static_cast<std::size_t>(cw * (dom.ny + 1));
  LoopEnsemble ens;
  ens.domain = dom;
  ens.label.assign(static_cast<std::size_t>(dom.cell_count()), -2);
  for (int j = 0; j < dom.ny; ++j) {
    for (int i = 0; i < dom.nx; ++i) {
      if (dom.contains(i, j)) ens.label[static_cast<std::size_t>(dom.index(i, j))] = -1;
    }
  }

  UnionFind uf(corner_count);
  std::vector<char> used(corner_count, 0);
  for (const auto& loop : soup.loops) {
    const int first = loop.corners.front().second * cw + loop.corners.front().first;
    for (const auto& [a, b] : loop.corners) {
      const int id = b * cw + a;
      used[static_cast<std::size_t>(id)] = 1;
      uf.unite(first, id);
    }
  }
  EdgeOwners edges(dom.nx, dom.ny);
  for (const auto& loop : soup.loops) {
    const int root = uf.find(loop.corners.front().second * cw + loop.corners.front().first);
    for (std::size_t k = 0; k + 1 < loop.corners.size(); ++k) {
      const Corner p = loop.corners[k];
      int* s = edges.slot(p.first, p.second, step_direction(p, loop.corners[k + 1]));
      if (!s) throw ConfigError("loop soup: loop leaves the lattice");
      *s = root;
    }
  }

  std::unordered_map<int, std::size_t> slot_of_root;
  std::vector<ClusterInfo> clusters;
  int interior = 0;
  for (int b = 0; b <= dom.ny; ++b) {
    for (int a = 0; a <= dom.nx; ++a) {
      if (dom.interior_corner(a, b)) ++interior;
      const int id = b * cw + a;
      if (!used[static_cast<std::size_t>(id)]) continue;
      const int root = uf.find(id);
      auto [it, fresh] = slot_of_root.try_emplace(root, clusters.size());
      if (fresh) {
        ClusterInfo c;
        c.root = root;
        c.a0 = c.a1 = a;
        c.b0 = c.b1 = b;
        clusters.push_back(std::move(c));
      }
      ClusterInfo& c = clusters[it->second];
      c.corners.push_back(id);
      c.a0 = std::min(c.a0, a);
      c.a1 = std::max(c.a1, a);
      c.b0 = std::min(c.b0, b);
      c.b1 = std::max(c.b1, b);
    }
  }
  std::size_t largest = 0;
  for (const auto& c : clusters) largest = std::max(largest, c.corners.size());
  ens.largest_cluster_fraction = interior > 0 ? static_cast<double>(largest) / interior : 0.0;

  for (auto& c : clusters) c.hull = filled_hull(dom, c, edges);
  std::vector<std::size_t> by_size(clusters.size());
  std::iota(by_size.begin(), by_size.end(), 0);
  std::stable_sort(by_size.begin(), by_size.end(),
                   [&](std::size_t x, std::size_t y) { return clusters[x].hull.size() > clusters[y].hull.size(); });
  // Hulls of disjoint clusters are nested or disjoint, so a cluster is
  // enclosed exactly when one of its hull cells is already claimed.
  std::vector<char> claimed(static_cast<std::size_t>(dom.cell_count()), 0);
  std::vector<std::size_t> kept;
  for (std::size_t idx : by_size) {
    const auto& c = clusters[idx];
    if (c.hull.empty() || claimed[static_cast<std::size_t>(c.hull.front())]) continue;
    for (int cell : c.hull) claimed[static_cast<std::size_t>(cell)] = 1;
    kept.push_back(idx);
  }
  std::sort(kept.begin(), kept.end(), [&](std::size_t x, std::size_t y) { return clusters[x].root < clusters[y].root; });
  for (std::size_t idx : kept) {
    auto& c = clusters[idx];
    const int label = static_cast<int>(ens.loops.size());
    for (int cell : c.hull) ens.label[static_cast<std::size_t>(cell)] = label;
    ens.loops.push_back(trace_outer_boundary(c, cw, edges));
    ens.regions.push_back(std::move(c.hull));
    ens.clusters.push_back(std::move(c.corners));
  }
  ens.lengths.assign(ens.loops.size(), 0.0);
  ens.order.resize(ens.loops.size());
  std::iota(ens.order.begin(), ens.order.end(), 0);
  return ens;
}

std::vector<std::string> structure_violations(const LoopEnsemble& ens) {
  std::vector<std::string> out;
  const LatticeDomain& dom = ens.domain;
  const auto n = static_cast<std::size_t>(dom.cell_count());
  if (ens.label.size() != n) return {"label array has the wrong size"};
  if (ens.regions.size() != ens.loops.size()) out.push_back("loop and region counts differ");
  std::vector<int> owner(n, -1);
  for (std::size_t j = 0; j < ens.regions.size(); ++j) {
    if (ens.regions[j].empty()) out.push_back("region " + std::to_string(j) + " is empty");
    for (int c : ens.regions[j]) {
      const auto cell = static_cast<std::size_t>(c);
      if (cell >= n || !dom.contains(c % dom.nx, c / dom.nx)) {
        out.push_back("region " + std::to_string(j) + " has a cell outside the domain");
      } else if (owner[cell] >= 0) {
        out.push_back("regions " + std::to_string(owner[cell]) + " and " + std::to_string(j) + " overlap");
      } else {
        owner[cell] = static_cast<int>(j);
      }
    }
  }
  for (int jj = 0; jj < dom.ny; ++jj) {
    for (int i = 0; i < dom.nx; ++i) {
      const auto cell = static_cast<std::size_t>(dom.index(i, jj));
      const int expected = dom.contains(i, jj) ? owner[cell] : -2;
      if (ens.label[cell] != expected) {
        out.push_back("cell (" + std::to_string(i) + ", " + std::to_string(jj) + ") is mislabelled");
        return out;
      }
    }
  }
  auto label_at = [&](int i, int j) { return dom.in_grid(i, j) ? ens.label[static_cast<std::size_t>(dom.index(i, j))] : -2; };
  for (std::size_t k = 0; k < ens.loops.size(); ++k) {
    const auto& loop = ens.loops[k];
    const int self = static_cast<int>(k);
    if (!loop.closed()) {
      out.push_back("loop " + std::to_string(k) + " is not closed");
      continue;
    }
    std::set<std::pair<Corner, Corner>> on_loop;
    for (std::size_t s = 0; s + 1 < loop.corners.size(); ++s) {
      const Corner p = loop.corners[s], q = loop.corners[s + 1];
      on_loop.insert(std::minmax(p, q));
      const auto [c0, c1] = cells_beside_edge(p, q);
      if (label_at(c0.first, c0.second) == self && label_at(c1.first, c1.second) == self) {
        out.push_back("loop " + std::to_string(k) + " crosses the interior of its region");
        break;
      }
    }
    if (k < ens.regions.size()) {
      bool missing = false;
      for (int c : ens.regions[k]) {
        const int i = c % dom.nx, j = c / dom.nx;
        const std::pair<Corner, Corner> sides[4] = {{{i + 1, j}, {i + 1, j + 1}},
                                                    {{i, j}, {i, j + 1}},
                                                    {{i, j + 1}, {i + 1, j + 1}},
                                                    {{i, j}, {i + 1, j}}};
        const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
        for (int e = 0; e < 4 && !missing; ++e) {
          if (label_at(i + di[e], j + dj[e]) != self && !on_loop.count(sides[e])) missing = true;
        }
        if (missing) break;
      }
      if (missing) out.push_back("loop " + std::to_string(k) + " misses part of its region's boundary");
    }
    for (const auto& [a, b] : loop.corners) {
      const int l = label_at(a, b);
      if (l >= 0 && l != self && label_at(a - 1, b) == l && label_at(a, b - 1) == l && label_at(a - 1, b - 1) == l) {
        out.push_back("loop " + std::to_string(k) + " enters region " + std::to_string(l));
        break;
      }
    }
  }
  return out;
}

bool regions_nested(const LoopEnsemble& inner, const LoopEnsemble& outer) {
  if (!(inner.domain == outer.domain)) throw ConfigError("regions_nested: ensembles live on different domains");
  for (const auto& region : inner.regions) {
    if (region.empty()) continue;
    const int host = outer.label[static_cast<std::size_t>(region.front())];
    if (host < 0) return false;
    for (int c : region) {
      if (outer.label[static_cast<std::size_t>(c)] != host) return false;
    }
  }
  return true;
}

std::optional<std::size_t> loop_index_of_point(const LoopEnsemble& ens, Point z) {
  const auto cell = ens.domain.locate(z);
  if (!cell) return std::nullopt;
  const int label = ens.label[static_cast<std::size_t>(ens.domain.index(cell->first, cell->second))];
  if (label < 0) return std::nullopt;
  return static_cast<std::size_t>(label);
}

std::optional<std::size_t> first_hitting_index(const LoopEnsemble& ens, const std::function<Point()>& stream,
                                               std::size_t j, std::size_t max_draws) {
  for (std::size_t m = 1; m <= max_draws; ++m) {
    const auto idx = loop_index_of_point(ens, stream());
    if (idx && *idx == j) return m;
  }
  return std::nullopt;
}

void assign_loop_lengths(LoopEnsemble& ens, const Field& field, double gamma, double calibration) {
  if (!(field.domain == ens.domain)) throw ConfigError("assign_loop_lengths: field and ensemble domains differ");
  ens.lengths.resize(ens.loops.size());
  for (std::size_t k = 0; k < ens.loops.size(); ++k) {
    ens.lengths[k] = loop_length(field, ens.loops[k], gamma, calibration);
  }
  ens.order.resize(ens.loops.size());
  std::iota(ens.order.begin(), ens.order.end(), 0);
  std::stable_sort(ens.order.begin(), ens.order.end(),
                   [&](std::size_t x, std::size_t y) { return ens.lengths[x] > ens.lengths[y]; });
}

double region_area(const LoopEnsemble& ens, std::size_t j) {
  return static_cast<double>(ens.regions.at(j).size()) * ens.domain.mesh * ens.domain.mesh;
}

std::string loop_ensemble_json(const LoopEnsemble& ens) {
  nlohmann::json loops = nlohmann::json::array();
  for (std::size_t k = 0; k < ens.loops.size(); ++k) {
    nlohmann::json path = nlohmann::json::array();
    for (const auto& [a, b] : ens.loops[k].corners) path.push_back({a, b});
    loops.push_back({{"path", path}, {"region_cells", ens.regions[k].size()}, {"length", ens.lengths[k]}});
  }
  std::vector<int> runs;
  const bool start = !ens.label.empty() && ens.label.front() == -1;
  bool current = start;
  int run = 0;
  for (int l : ens.label) {
    if ((l == -1) == current) {
      ++run;
    } else {
      runs.push_back(run);
      current = !current;
      run = 1;
    }
  }
  runs.push_back(run);
  nlohmann::json j = {{"nx", ens.domain.nx},
                      {"ny", ens.domain.ny},
                      {"mesh", ens.domain.mesh},
                      {"loops", loops},
                      {"gasket", {{"start", start ? 1 : 0}, {"runs", runs}}},
                      {"largest_cluster_fraction", ens.largest_cluster_fraction}};
  return j.dump();
}

}  // namespace lqglab
