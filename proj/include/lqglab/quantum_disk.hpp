#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lqglab/field.hpp"
#include "lqglab/gmc.hpp"

namespace lqglab {

/// Lower end of the admissible gamma range, sqrt(8/3).
double gamma_lower_bound();
/// Throws ConfigError unless gamma lies in (sqrt(8/3), 2].
void check_disk_gamma(double gamma);
/// Exponent of the boundary-length reweighting, 4/gamma^2 - 1 (0 at gamma = 2).
double disk_reweight_exponent(double gamma);
/// Default truncation depth K = (8/gamma) log 2 + 10.
double default_truncation_depth(double gamma);

/// Vertical (column-average) process on a symmetric time grid. values(k) is
/// the value at times(k); times(n) = 0 at the centre.
struct VerticalProcess {
  double gamma = 2.0;
  double dt = 0.0;
  Eigen::VectorXd times;
  Eigen::VectorXd values;

  Eigen::Index centre() const { return times.size() / 2; }
};

/// Each side s >= 0 and s <= 0 independently follows B_{2s} - (2/gamma - gamma/2) s
/// conditioned to stay negative. Realised exactly on the grid as
/// -sqrt(2) |W_s + mu s e_1| with W a 3d Brownian motion and mu = a / sqrt(2);
/// at gamma = 2 this is -sqrt(2) BES(3). Each side runs until both
/// s >= horizon and the value is below -depth; the half-length is then padded
/// to a multiple of 16 steps.
VerticalProcess sample_vertical_process(double gamma, double horizon, double dt, Rng& rng,
                                        double depth = -1.0);

/// Strip field whose column means are the vertical process values and whose
/// lateral part is `lateral`. Throws ConfigError on grid mismatch.
Field assemble_strip_field(const VerticalProcess& vp, const Field& lateral);

struct DiskResolution {
  int strip_height_cells = 32;   // 2 pi is split into this many cells
  int disk_radius_cells = 64;    // disk lattice used for the embedded field
  double horizon = 0.0;          // minimum vertical-process horizon
  double depth = -1.0;           // truncation depth; < 0 selects the default
  bool render_field = true;      // also build the field on the disk lattice
};

/// LQG disk embedded in the unit disk. Measures are carried as point masses
/// at the images of the strip cells, so totals are preserved exactly.
struct DiskSample {
  double gamma = 2.0;
  Field strip_field;          // normalised field on the strip
  ConformalMap embedding;     // unit disk -> strip
  Field field;                // strip_field pulled back to the disk lattice
  double weight = 1.0;        // importance weight nu_0^{4/gamma^2 - 1}
  Measure area;               // support: points
  Measure boundary;           // support: points on the unit circle
  Point marked_interior{0.0, 0.0};
  Point marked_boundary{1.0, 0.0};
  double nu_raw = 0.0;        // boundary length before normalisation
  std::uint64_t seed = 0;
  int disk_radius_cells = 0;

  double nu_total() const { return boundary.total; }
  double mu_total() const { return area.total; }
};

/// Samples a gamma-LQG disk with boundary length `boundary_length` (1 for
/// the unit disk, eps for the rescaled subcritical variant). Throws
/// NumericalError when the boundary measure is zero or non-finite.
DiskSample sample_unit_boundary_disk(double gamma, const DiskResolution& res, std::uint64_t seed,
                                     double boundary_length = 1.0);

/// Re-embeds so that the given area atom sits at 0 and the given boundary
/// atom at 1.
DiskSample embed_at(DiskSample disk, Eigen::Index area_atom, Eigen::Index boundary_atom);

/// Samples Z from the area measure and W from the boundary measure,
/// conditionally independently, and re-embeds with Z -> 0, W -> 1.
DiskSample embed_with_marked_points(DiskSample disk, Rng& rng);

/// JSON sidecar {gamma, weight, Z, W, nu_total, mu_total, seed}.
std::string disk_sidecar_json(const DiskSample& disk);
/// Writes <stem>.field (binary) and <stem>.json.
void save_disk_sample(const std::string& stem, const DiskSample& disk);

}  // namespace lqglab
