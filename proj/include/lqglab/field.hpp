#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "lqglab/conformal_map.hpp"
#include "lqglab/errors.hpp"
#include "lqglab/random.hpp"

namespace lqglab {

using Point = std::complex<double>;

enum class DomainShape : std::uint32_t { strip = 0, disk = 1, annulus = 2 };
enum class BoundaryCondition : std::uint32_t { zero = 0, free = 1 };

/// Cell-centred square lattice. Field values live on cells; loops live on the
/// dual lattice of cell corners.
///
/// strip:   nx x ny cells covering [-nx h/2, nx h/2] x [0, ny h]. For the LQG
///          strip the height ny h equals 2 pi.
/// disk:    2R x 2R bounding cells of mesh 1/R; a cell belongs to the domain
///          when its centre lies in the open unit disk.
/// annulus: as disk, minus the closed disk of radius r/R.
struct LatticeDomain {
  DomainShape shape = DomainShape::strip;
  int nx = 0;
  int ny = 0;
  double mesh = 1.0;
  Point origin{0.0, 0.0};  // lower-left corner of cell (0, 0)
  int outer_cells = 0;      // R, disk and annulus only
  int inner_cells = 0;      // r, annulus only

  static LatticeDomain strip(int length_cells, int height_cells, double mesh);
  /// Strip with height 2 pi, i.e. mesh = 2 pi / height_cells.
  static LatticeDomain lqg_strip(int length_cells, int height_cells);
  static LatticeDomain disk(int radius_cells);
  static LatticeDomain annulus(int outer_cells, int inner_cells);

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  int cell_count() const { return nx * ny; }
  int index(int i, int j) const { return j * nx + i; }
  bool in_grid(int i, int j) const { return i >= 0 && j >= 0 && i < nx && j < ny; }
  Point cell_center(int i, int j) const {
    return origin + Point((i + 0.5) * mesh, (j + 0.5) * mesh);
  }
  Point corner(int a, int b) const { return origin + Point(a * mesh, b * mesh); }

  /// Cell belongs to the domain.
  bool contains(int i, int j) const;
  /// Cell carries a free value for a zero-boundary field. On strips the outer
  /// ring of cells is the Dirichlet boundary; on disks every domain cell is.
  bool dirichlet_interior(int i, int j) const;
  /// Domain cell adjacent to the outside; carries boundary length.
  bool boundary_cell(int i, int j) const;
  /// Dual vertex whose four surrounding cells all belong to the domain.
  bool interior_corner(int a, int b) const;

  /// Continuous grid coordinates of a point (cell centres at integers).
  Eigen::Vector2d grid_coords(Point p) const;
  /// Cell containing the point, if it lies inside the bounding grid.
  std::optional<std::pair<int, int>> locate(Point p) const;

  bool operator==(const LatticeDomain&) const = default;
};

template <typename Scalar>
using GridArray = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Real-valued lattice field; values(j, i) is the value on cell (i, j), so
/// rows are horizontal lines and columns are vertical lattice columns.
template <typename Scalar>
struct BasicField {
  LatticeDomain domain;
  BoundaryCondition boundary = BoundaryCondition::free;
  GridArray<Scalar> values;

  BasicField() = default;
  BasicField(const LatticeDomain& d, BoundaryCondition bc)
      : domain(d), boundary(bc), values(GridArray<Scalar>::Zero(d.ny, d.nx)) {}

  Scalar operator()(int i, int j) const { return values(j, i); }
  Scalar& operator()(int i, int j) { return values(j, i); }

  bool all_finite() const { return values.allFinite(); }

  /// Bilinear interpolation between cell centres. Points within half a cell of
  /// the outermost centres are clamped onto the grid; anything farther out
  /// returns nullopt.
  std::optional<Scalar> interpolate(Point p) const {
    const Eigen::Vector2d g = domain.grid_coords(p);
    const double max_x = domain.nx - 1, max_y = domain.ny - 1;
    if (!(g.x() >= -0.5 && g.x() <= max_x + 0.5 && g.y() >= -0.5 && g.y() <= max_y + 0.5)) {
      return std::nullopt;
    }
    const double gx = std::clamp(g.x(), 0.0, max_x);
    const double gy = std::clamp(g.y(), 0.0, max_y);
    const int i0 = std::min(static_cast<int>(gx), std::max(domain.nx - 2, 0));
    const int j0 = std::min(static_cast<int>(gy), std::max(domain.ny - 2, 0));
    const int i1 = std::min(i0 + 1, domain.nx - 1), j1 = std::min(j0 + 1, domain.ny - 1);
    const Scalar tx = static_cast<Scalar>(gx - i0), ty = static_cast<Scalar>(gy - j0);
    return (1 - tx) * (1 - ty) * values(j0, i0) + tx * (1 - ty) * values(j0, i1) +
           (1 - tx) * ty * values(j1, i0) + tx * ty * values(j1, i1);
  }

  BasicField& operator+=(Scalar c) {
    values += c;
    return *this;
  }
};

using Field = BasicField<double>;

template <typename Scalar>
BasicField<Scalar> operator+(BasicField<Scalar> f, Scalar c) {
  f += c;
  return f;
}

// ---------------------------------------------------------------------------
// Discrete Gaussian free field.
//
// Normalisation: covariance = 2 pi (4 I - A)^{-1}, A the adjacency of the
// cell graph, so the variance at a cell grows like log(1/h) + O(1) and the
// field approximates the GFF with E[h(x) h(y)] ~ -log|x - y|.
// ---------------------------------------------------------------------------

/// Zero-boundary GFF on an m x n block of free cells (sine-basis sampling).
/// Returns an n x m row-major array. No size floor; building block for the
/// domain-level samplers and for small exact checks.
GridArray<double> sample_dirichlet_block(int m, int n, Rng& rng);

/// Exact covariance matrix of sample_dirichlet_block, indexed j * m + i.
Eigen::MatrixXd dirichlet_block_covariance(int m, int n);

/// Reusable sampler for zero-boundary GFFs on a fixed domain. Rectangles use
/// the sine basis; disk and annulus masks use a sparse Cholesky factor.
class ZeroBoundaryGff {
 public:
  explicit ZeroBoundaryGff(const LatticeDomain& domain);
  ~ZeroBoundaryGff();
  ZeroBoundaryGff(ZeroBoundaryGff&&) noexcept;
  ZeroBoundaryGff& operator=(ZeroBoundaryGff&&) noexcept;

  Field sample(Rng& rng) const;
  const LatticeDomain& domain() const { return domain_; }

  /// Exact covariance between two free cells (0 if either is a boundary cell).
  double green(int i0, int j0, int i1, int j1) const;
  /// Exact variance of every cell, as a field.
  Field green_diagonal() const;

 private:
  struct Impl;
  LatticeDomain domain_;
  std::unique_ptr<Impl> impl_;
};

Field sample_zero_boundary_gff(const LatticeDomain& domain, Rng& rng);

/// Free-boundary (Neumann) GFF on a strip, additive constant fixed by zero
/// total mean. Cosine basis vertically; each vertical frequency is an exact
/// tridiagonal Gaussian chain horizontally, so the cost is linear in length.
class FreeStripGff {
 public:
  explicit FreeStripGff(const LatticeDomain& strip);

  Field sample(Rng& rng) const;
  /// Samples only the lateral part (modes with non-zero vertical frequency).
  Field sample_lateral(Rng& rng) const;
  const LatticeDomain& domain() const { return domain_; }

 private:
  Field synthesize(Rng& rng, bool lateral_only) const;

  LatticeDomain domain_;
  Eigen::MatrixXd basis_y_;    // ny x ny, orthonormal DCT-II columns
  Eigen::MatrixXd chol_diag_;  // ny x nx bidiagonal Cholesky factors per mode
  Eigen::MatrixXd chol_sub_;
};

Field sample_free_strip_gff(const LatticeDomain& strip, Rng& rng);

// ---------------------------------------------------------------------------
// Strip decomposition into vertical averages and lateral part.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct StripDecomposition {
  BasicField<Scalar> average;
  BasicField<Scalar> lateral;
};

/// average is constant on each lattice column and equals the column mean;
/// lateral = field - average, adjusted by at most a few ulps so that
/// average + lateral reproduces field bit for bit. When no floating-point
/// lateral value achieves that (the spacing of lateral can be twice that of
/// field), the sum is off by at most one ulp of the largest of the three.
template <typename Scalar>
StripDecomposition<Scalar> vertical_average_decompose(const BasicField<Scalar>& field) {
  if (field.domain.shape != DomainShape::strip) {
    throw ConfigError("vertical_average_decompose: field must live on a strip");
  }
  StripDecomposition<Scalar> out{field, field};
  // Mean taken relative to the bottom row, so constant columns come out exact.
  const auto means = (field.values.row(0) + (field.values.rowwise() - field.values.row(0)).colwise().mean()).eval();
  for (int i = 0; i < field.domain.nx; ++i) {
    for (int j = 0; j < field.domain.ny; ++j) {
      const Scalar a = means(i);
      const Scalar v = field.values(j, i);
      Scalar l = v - a, best = l;
      for (int step = 0; step < 8 && a + l != v; ++step) {
        l = std::nextafter(l, (a + l < v) ? std::numeric_limits<Scalar>::infinity()
                                           : -std::numeric_limits<Scalar>::infinity());
        if (std::abs(a + l - v) < std::abs(a + best - v)) best = l;
      }
      l = a + l == v ? l : best;
      out.average.values(j, i) = a;
      out.lateral.values(j, i) = l;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Coordinate change  field o f + Q log|f'|.
// ---------------------------------------------------------------------------

enum class OutsidePolicy { raise, clamp };

/// Q = 2/gamma + gamma/2.
double lqg_q(double gamma);

/// Pulls `source` back through `map` (target -> source coordinates) onto the
/// cells of `target`. Cells outside the target domain are set to 0. With
/// OutsidePolicy::clamp, preimages outside the source grid are projected onto
/// its nearest point before interpolation.
Field coordinate_change(const Field& source, const LatticeDomain& target, const ConformalMap& map,
                        double q, OutsidePolicy policy = OutsidePolicy::raise);

/// Same map applied to a single point.
double coordinate_change_at(const Field& source, Point w, const ConformalMap& map, double q,
                            OutsidePolicy policy = OutsidePolicy::raise);

}  // namespace lqglab
