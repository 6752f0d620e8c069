#include "lqglab/field.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/SparseCholesky>

namespace lqglab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Eigen::MatrixXd sine_basis(int m) {
  Eigen::MatrixXd s(m, m);
  const double norm = std::sqrt(2.0 / (m + 1));
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < m; ++k) {
      s(i, k) = norm * std::sin(std::numbers::pi * (i + 1) * (k + 1) / (m + 1));
    }
  }
  return s;
}

Eigen::VectorXd sine_eigenvalues(int m) {
  Eigen::VectorXd e(m);
  for (int k = 0; k < m; ++k) e(k) = 2.0 - 2.0 * std::cos(std::numbers::pi * (k + 1) / (m + 1));
  return e;
}

// Orthonormal DCT-II basis: eigenvectors of the path-graph Laplacian with
// reflecting ends.
Eigen::MatrixXd cosine_basis(int n) {
  Eigen::MatrixXd c(n, n);
  for (int k = 0; k < n; ++k) {
    const double norm = (k == 0) ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int i = 0; i < n; ++i) c(i, k) = norm * std::cos(std::numbers::pi * k * (i + 0.5) / n);
  }
  return c;
}

Eigen::VectorXd cosine_eigenvalues(int n) {
  Eigen::VectorXd e(n);
  for (int k = 0; k < n; ++k) e(k) = 2.0 - 2.0 * std::cos(std::numbers::pi * k / n);
  return e;
}

Eigen::MatrixXd standard_normal(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd z(rows, cols);
  // Fill row by row so the stream order matches the row-major output.
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) z(r, c) = normal(rng);
  }
  return z;
}

}  // namespace

// ---------------------------------------------------------------------------
// LatticeDomain
// ---------------------------------------------------------------------------

LatticeDomain LatticeDomain::strip(int length_cells, int height_cells, double mesh) {
  LatticeDomain d;
  d.shape = DomainShape::strip;
  d.nx = length_cells;
  d.ny = height_cells;
  d.mesh = mesh;
  d.origin = Point(-0.5 * length_cells * mesh, 0.0);
  d.validate();
  return d;
}

LatticeDomain LatticeDomain::lqg_strip(int length_cells, int height_cells) {
  if (height_cells <= 0) throw ConfigError("lqg_strip: height must be positive");
  return strip(length_cells, height_cells, kTwoPi / height_cells);
}

LatticeDomain LatticeDomain::disk(int radius_cells) {
  LatticeDomain d;
  d.shape = DomainShape::disk;
  d.nx = d.ny = 2 * radius_cells;
  d.outer_cells = radius_cells;
  d.mesh = radius_cells > 0 ? 1.0 / radius_cells : 0.0;
  d.origin = Point(-1.0, -1.0);
  d.validate();
  return d;
}

LatticeDomain LatticeDomain::annulus(int outer_cells, int inner_cells) {
  LatticeDomain d = disk(outer_cells);
  d.shape = DomainShape::annulus;
  d.inner_cells = inner_cells;
  d.validate();
  return d;
}

void LatticeDomain::validate() const {
  if (!(mesh > 0.0) || !std::isfinite(mesh)) throw ConfigError("LatticeDomain: mesh must be > 0");
  if (nx < 8 || ny < 8) {
    throw ConfigError("LatticeDomain: at least 8 cells per direction required (got " +
                      std::to_string(nx) + "x" + std::to_string(ny) + ")");
  }
  if (shape == DomainShape::annulus && !(inner_cells >= 1 && inner_cells < outer_cells)) {
    throw ConfigError("LatticeDomain: annulus needs 1 <= r < R");
  }
}

bool LatticeDomain::contains(int i, int j) const {
  if (!in_grid(i, j)) return false;
  if (shape == DomainShape::strip) return true;
  const double r = std::abs(cell_center(i, j));
  if (r >= 1.0) return false;
  if (shape == DomainShape::annulus) return r > static_cast<double>(inner_cells) / outer_cells;
  return true;
}

bool LatticeDomain::dirichlet_interior(int i, int j) const {
  if (shape == DomainShape::strip) return i >= 1 && j >= 1 && i < nx - 1 && j < ny - 1;
  return contains(i, j);
}

bool LatticeDomain::boundary_cell(int i, int j) const {
  if (!contains(i, j)) return false;
  if (shape == DomainShape::strip) return j == 0 || j == ny - 1;
  return !contains(i - 1, j) || !contains(i + 1, j) || !contains(i, j - 1) || !contains(i, j + 1);
}

bool LatticeDomain::interior_corner(int a, int b) const {
  return contains(a - 1, b - 1) && contains(a, b - 1) && contains(a - 1, b) && contains(a, b);
}

Eigen::Vector2d LatticeDomain::grid_coords(Point p) const {
  const Point g = (p - origin) / mesh;
  return {g.real() - 0.5, g.imag() - 0.5};
}

std::optional<std::pair<int, int>> LatticeDomain::locate(Point p) const {
  const Point g = (p - origin) / mesh;
  const int i = static_cast<int>(std::floor(g.real()));
  const int j = static_cast<int>(std::floor(g.imag()));
  if (!in_grid(i, j)) return std::nullopt;
  return std::make_pair(i, j);
}

// ---------------------------------------------------------------------------
// Dirichlet GFF
// ---------------------------------------------------------------------------

GridArray<double> sample_dirichlet_block(int m, int n, Rng& rng) {
  if (m < 1 || n < 1) throw ConfigError("sample_dirichlet_block: empty block");
  const Eigen::MatrixXd sx = sine_basis(m), sy = sine_basis(n);
  const Eigen::VectorXd ex = sine_eigenvalues(m), ey = sine_eigenvalues(n);
  Eigen::MatrixXd coeff = standard_normal(n, m, rng);
  for (int l = 0; l < n; ++l) {
    for (int k = 0; k < m; ++k) coeff(l, k) *= std::sqrt(kTwoPi / (ex(k) + ey(l)));
  }
  return (sy * coeff * sx.transpose()).array();
}

Eigen::MatrixXd dirichlet_block_covariance(int m, int n) {
  const int size = m * n;
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(size, size);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < m; ++i) {
      const int v = j * m + i;
      lap(v, v) = 4.0;
      if (i > 0) lap(v, v - 1) = -1.0;
      if (i + 1 < m) lap(v, v + 1) = -1.0;
      if (j > 0) lap(v, v - m) = -1.0;
      if (j + 1 < n) lap(v, v + m) = -1.0;
    }
  }
  return kTwoPi * lap.inverse();
}

struct ZeroBoundaryGff::Impl {
  // Rectangle: sine basis on the (nx-2) x (ny-2) interior block.
  Eigen::MatrixXd sx, sy;
  Eigen::VectorXd ex, ey;
  // Masks: sparse Cholesky of (4I - A) / (2 pi) on the free cells.
  std::vector<int> cell_of;      // free index -> grid index
  std::vector<int> free_index;   // grid index -> free index or -1
  Eigen::SparseMatrix<double> precision;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
  bool rectangle = false;
};

ZeroBoundaryGff::ZeroBoundaryGff(const LatticeDomain& domain)
    : domain_(domain), impl_(std::make_unique<Impl>()) {
  domain_.validate();
  if (domain_.shape == DomainShape::strip) {
    impl_->rectangle = true;
    const int m = domain_.nx - 2, n = domain_.ny - 2;
    impl_->sx = sine_basis(m);
    impl_->sy = sine_basis(n);
    impl_->ex = sine_eigenvalues(m);
    impl_->ey = sine_eigenvalues(n);
    return;
  }
  impl_->free_index.assign(domain_.cell_count(), -1);
  for (int j = 0; j < domain_.ny; ++j) {
    for (int i = 0; i < domain_.nx; ++i) {
      if (domain_.dirichlet_interior(i, j)) {
        impl_->free_index[domain_.index(i, j)] = static_cast<int>(impl_->cell_of.size());
        impl_->cell_of.push_back(domain_.index(i, j));
      }
    }
  }
  const int size = static_cast<int>(impl_->cell_of.size());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(5 * size);
  for (int v = 0; v < size; ++v) {
    const int i = impl_->cell_of[v] % domain_.nx, j = impl_->cell_of[v] / domain_.nx;
    triplets.emplace_back(v, v, 4.0 / kTwoPi);
    const int nbr[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
    for (const auto& nb : nbr) {
      if (!domain_.in_grid(nb[0], nb[1])) continue;
      const int w = impl_->free_index[domain_.index(nb[0], nb[1])];
      if (w >= 0) triplets.emplace_back(v, w, -1.0 / kTwoPi);
    }
  }
  impl_->precision.resize(size, size);
  impl_->precision.setFromTriplets(triplets.begin(), triplets.end());
  impl_->llt.compute(impl_->precision);
  if (impl_->llt.info() != Eigen::Success) throw NumericalError("ZeroBoundaryGff: factorization failed");
}

ZeroBoundaryGff::~ZeroBoundaryGff() = default;
ZeroBoundaryGff::ZeroBoundaryGff(ZeroBoundaryGff&&) noexcept = default;
ZeroBoundaryGff& ZeroBoundaryGff::operator=(ZeroBoundaryGff&&) noexcept = default;

Field ZeroBoundaryGff::sample(Rng& rng) const {
  Field f(domain_, BoundaryCondition::zero);
  if (impl_->rectangle) {
    const int m = domain_.nx - 2, n = domain_.ny - 2;
    Eigen::MatrixXd coeff = standard_normal(n, m, rng);
    for (int l = 0; l < n; ++l) {
      for (int k = 0; k < m; ++k) coeff(l, k) *= std::sqrt(kTwoPi / (impl_->ex(k) + impl_->ey(l)));
    }
    f.values.block(1, 1, n, m) = (impl_->sy * coeff * impl_->sx.transpose()).array();
    return f;
  }
  const int size = static_cast<int>(impl_->cell_of.size());
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(size);
  for (int v = 0; v < size; ++v) z(v) = normal(rng);
  // P A P^T = L L^T  =>  x = P^T L^{-T} z has covariance A^{-1}.
  const Eigen::VectorXd y = impl_->llt.matrixU().solve(z);
  const Eigen::VectorXd x = impl_->llt.permutationPinv() * y;
  for (int v = 0; v < size; ++v) {
    const int c = impl_->cell_of[v];
    f.values(c / domain_.nx, c % domain_.nx) = x(v);
  }
  return f;
}

double ZeroBoundaryGff::green(int i0, int j0, int i1, int j1) const {
  if (!domain_.dirichlet_interior(i0, j0) || !domain_.dirichlet_interior(i1, j1)) return 0.0;
  if (impl_->rectangle) {
    const int m = domain_.nx - 2, n = domain_.ny - 2;
    double g = 0.0;
    for (int l = 0; l < n; ++l) {
      for (int k = 0; k < m; ++k) {
        g += impl_->sx(i0 - 1, k) * impl_->sy(j0 - 1, l) * impl_->sx(i1 - 1, k) *
             impl_->sy(j1 - 1, l) / (impl_->ex(k) + impl_->ey(l));
      }
    }
    return kTwoPi * g;
  }
  const int size = static_cast<int>(impl_->cell_of.size());
  Eigen::VectorXd e = Eigen::VectorXd::Zero(size);
  e(impl_->free_index[domain_.index(i1, j1)]) = 1.0;
  const Eigen::VectorXd col = impl_->llt.solve(e);
  return col(impl_->free_index[domain_.index(i0, j0)]);
}

Field ZeroBoundaryGff::green_diagonal() const {
  Field f(domain_, BoundaryCondition::zero);
  if (impl_->rectangle) {
    const int m = domain_.nx - 2, n = domain_.ny - 2;
    Eigen::MatrixXd inv_eig(n, m);
    for (int l = 0; l < n; ++l) {
      for (int k = 0; k < m; ++k) inv_eig(l, k) = kTwoPi / (impl_->ex(k) + impl_->ey(l));
    }
    const Eigen::MatrixXd sy2 = impl_->sy.array().square().matrix();
    const Eigen::MatrixXd sx2 = impl_->sx.array().square().matrix();
    f.values.block(1, 1, n, m) = (sy2 * inv_eig * sx2.transpose()).array();
    return f;
  }
  const int size = static_cast<int>(impl_->cell_of.size());
  for (int v = 0; v < size; ++v) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(size);
    e(v) = 1.0;
    const int c = impl_->cell_of[v];
    f.values(c / domain_.nx, c % domain_.nx) = impl_->llt.solve(e)(v);
  }
  return f;
}

Field sample_zero_boundary_gff(const LatticeDomain& domain, Rng& rng) {
  return ZeroBoundaryGff(domain).sample(rng);
}

// ---------------------------------------------------------------------------
// Free-boundary strip GFF
// ---------------------------------------------------------------------------

FreeStripGff::FreeStripGff(const LatticeDomain& strip) : domain_(strip) {
  domain_.validate();
  if (domain_.shape != DomainShape::strip) throw ConfigError("FreeStripGff: strip domain required");
  const int nx = domain_.nx, ny = domain_.ny;
  basis_y_ = cosine_basis(ny);
  const Eigen::VectorXd eig_y = cosine_eigenvalues(ny);
  // Vertical frequency l >= 1 leaves a tridiagonal precision T + lambda_l I in
  // x (T the Neumann path Laplacian); store its bidiagonal Cholesky factor.
  chol_diag_ = Eigen::MatrixXd::Zero(ny, nx);
  chol_sub_ = Eigen::MatrixXd::Zero(ny, nx);
  for (int l = 1; l < ny; ++l) {
    double prev = 0.0;
    for (int i = 0; i < nx; ++i) {
      const double d = ((i == 0 || i == nx - 1) ? 1.0 : 2.0) + eig_y(l);
      const double sub = (i == 0) ? 0.0 : -1.0 / prev;
      const double diag = std::sqrt(d - sub * sub);
      chol_sub_(l, i) = sub;
      chol_diag_(l, i) = diag;
      prev = diag;
    }
  }
}

Field FreeStripGff::synthesize(Rng& rng, bool lateral_only) const {
  const int nx = domain_.nx, ny = domain_.ny;
  std::normal_distribution<double> normal;
  const double sd = std::sqrt(kTwoPi);
  Eigen::MatrixXd coeff = Eigen::MatrixXd::Zero(ny, nx);
  if (!lateral_only) {
    // Zero vertical frequency: free-end path GFF, i.e. a random walk with
    // N(0, 2 pi) steps, centred to remove the constant mode.
    double acc = 0.0;
    for (int i = 1; i < nx; ++i) {
      acc += sd * normal(rng);
      coeff(0, i) = acc;
    }
    coeff.row(0).array() -= coeff.row(0).mean();
  }
  Eigen::VectorXd z(nx);
  for (int l = 1; l < ny; ++l) {
    for (int i = 0; i < nx; ++i) z(i) = normal(rng);
    // Solve L^T a = z by back substitution; a ~ N(0, (T + lambda_l)^{-1}).
    double next = 0.0;
    for (int i = nx - 1; i >= 0; --i) {
      const double upper = (i + 1 < nx) ? chol_sub_(l, i + 1) * next : 0.0;
      next = (z(i) - upper) / chol_diag_(l, i);
      coeff(l, i) = sd * next;
    }
  }
  Field f(domain_, BoundaryCondition::free);
  f.values = (basis_y_ * coeff).array();
  return f;
}

Field FreeStripGff::sample(Rng& rng) const { return synthesize(rng, false); }
Field FreeStripGff::sample_lateral(Rng& rng) const { return synthesize(rng, true); }

Field sample_free_strip_gff(const LatticeDomain& strip, Rng& rng) { return FreeStripGff(strip).sample(rng); }

// ---------------------------------------------------------------------------
// Coordinate change
// ---------------------------------------------------------------------------

double lqg_q(double gamma) { return 2.0 / gamma + gamma / 2.0; }

namespace {

Point clamp_into(const LatticeDomain& d, Point p) {
  const double x0 = d.origin.real(), y0 = d.origin.imag();
  const double x1 = x0 + d.nx * d.mesh, y1 = y0 + d.ny * d.mesh;
  return {std::clamp(p.real(), x0, x1), std::clamp(p.imag(), y0, y1)};
}

}  // namespace

double coordinate_change_at(const Field& source, Point w, const ConformalMap& map, double q,
                            OutsidePolicy policy) {
  Point z = map(w);
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
    if (policy == OutsidePolicy::raise) throw DomainError("coordinate_change: map is singular at target point");
    z = Point(std::isfinite(z.real()) ? z.real() : std::copysign(1e300, z.real()),
              std::isfinite(z.imag()) ? z.imag() : 0.0);
  }
  auto value = source.interpolate(z);
  if (!value) {
    if (policy == OutsidePolicy::raise) {
      throw DomainError("coordinate_change: target point maps outside the source domain");
    }
    value = source.interpolate(clamp_into(source.domain, z));
  }
  if (q == 0.0) return *value;
  return *value + q * std::log(std::abs(map.derivative(w)));
}

Field coordinate_change(const Field& source, const LatticeDomain& target, const ConformalMap& map,
                        double q, OutsidePolicy policy) {
  if (map.is_identity() && target == source.domain) return source;
  Field out(target, source.boundary);
  for (int j = 0; j < target.ny; ++j) {
    for (int i = 0; i < target.nx; ++i) {
      if (!target.contains(i, j)) continue;
      out(i, j) = coordinate_change_at(source, target.cell_center(i, j), map, q, policy);
    }
  }
  return out;
}

}  // namespace lqglab
