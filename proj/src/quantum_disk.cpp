#include "lqglab/quantum_disk.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "lqglab/field_io.hpp"

namespace lqglab {

double gamma_lower_bound() { return std::sqrt(8.0 / 3.0); }

void check_disk_gamma(double gamma) {
  if (!(gamma > gamma_lower_bound() && gamma <= 2.0)) {
    throw ConfigError("quantum disk: gamma must lie in (sqrt(8/3), 2], got " + std::to_string(gamma));
  }
}

double disk_reweight_exponent(double gamma) { return gamma == 2.0 ? 0.0 : 4.0 / (gamma * gamma) - 1.0; }

double default_truncation_depth(double gamma) { return (8.0 / gamma) * std::numbers::ln2 + 10.0; }

namespace {

// One side of the vertical process, -sqrt(2) |W_s + mu s e_1| on s = k dt.
struct Side {
  double mu, dt, sd;
  double x = 0.0, y = 0.0, z = 0.0;
  std::vector<double> values{0.0};

  Side(double mu_, double dt_) : mu(mu_), dt(dt_), sd(std::sqrt(dt_)) {}

  void step(Rng& rng, std::normal_distribution<double>& normal) {
    x += mu * dt + sd * normal(rng);
    y += sd * normal(rng);
    z += sd * normal(rng);
    values.push_back(-std::numbers::sqrt2 * std::sqrt(x * x + y * y + z * z));
  }

  void run(double horizon, double depth, Rng& rng, std::normal_distribution<double>& normal) {
    constexpr std::size_t kMaxSteps = 20'000'000;
    while ((values.size() - 1) * dt < horizon || !(values.back() < -depth)) {
      if (values.size() > kMaxSteps) throw NumericalError("vertical process: truncation depth not reached");
      step(rng, normal);
    }
  }
};

constexpr std::size_t kPadding = 16;

// Clamp pushed-forward atoms strictly inside the disk; far-out strip cells
// would otherwise round onto the circle.
Point inside_disk(Point p) {
  constexpr double kMax = 1.0 - 1e-12;
  const double r = std::abs(p);
  return r > kMax ? p * (kMax / r) : p;
}

void render(DiskSample& disk) {
  if (disk.disk_radius_cells <= 0) return;
  disk.field = coordinate_change(disk.strip_field, LatticeDomain::disk(disk.disk_radius_cells), disk.embedding,
                                 lqg_q(disk.gamma), OutsidePolicy::clamp);
}

}  // namespace

VerticalProcess sample_vertical_process(double gamma, double horizon, double dt, Rng& rng, double depth) {
  check_disk_gamma(gamma);
  if (!(dt > 0.0)) throw ConfigError("vertical process: dt must be positive");
  if (depth < 0.0) depth = default_truncation_depth(gamma);
  const double mu = (2.0 / gamma - gamma / 2.0) / std::numbers::sqrt2;
  std::normal_distribution<double> normal;
  Side right(mu, dt), left(mu, dt);
  right.run(horizon, depth, rng, normal);
  left.run(horizon, depth, rng, normal);
  std::size_t n = std::max(right.values.size(), left.values.size()) - 1;
  n = ((n + kPadding - 1) / kPadding) * kPadding;
  while (right.values.size() <= n) right.step(rng, normal);
  while (left.values.size() <= n) left.step(rng, normal);

  VerticalProcess vp;
  vp.gamma = gamma;
  vp.dt = dt;
  const auto len = static_cast<Eigen::Index>(2 * n + 1);
  vp.times.resize(len);
  vp.values.resize(len);
  const auto c = static_cast<Eigen::Index>(n);
  for (Eigen::Index k = 0; k <= c; ++k) {
    vp.times(c + k) = static_cast<double>(k) * dt;
    vp.times(c - k) = -static_cast<double>(k) * dt;
    vp.values(c + k) = right.values[static_cast<std::size_t>(k)];
    vp.values(c - k) = left.values[static_cast<std::size_t>(k)];
  }
  return vp;
}

Field assemble_strip_field(const VerticalProcess& vp, const Field& lateral) {
  const auto& d = lateral.domain;
  if (d.shape != DomainShape::strip || d.nx != vp.values.size()) {
    throw ConfigError("assemble_strip_field: lateral field has " + std::to_string(d.nx) +
                      " columns, vertical process has " + std::to_string(vp.values.size()) + " times");
  }
  if (std::abs(d.mesh - vp.dt) > 1e-12 * vp.dt) {
    throw ConfigError("assemble_strip_field: lateral mesh differs from the vertical time step");
  }
  const auto means = lateral.values.colwise().mean().eval();
  const double scale = 1.0 + lateral.values.abs().maxCoeff();
  if (means.abs().maxCoeff() > 1e-9 * scale) {
    throw ConfigError("assemble_strip_field: lateral part has non-zero column means");
  }
  Field f = lateral;
  f.boundary = BoundaryCondition::free;
  f.values.rowwise() += vp.values.transpose().array();
  return f;
}

DiskSample sample_unit_boundary_disk(double gamma, const DiskResolution& res, std::uint64_t seed,
                                     double boundary_length) {
  check_disk_gamma(gamma);
  if (res.strip_height_cells < 8) throw ConfigError("quantum disk: strip_height_cells must be >= 8");
  if (!(boundary_length > 0.0)) throw ConfigError("quantum disk: boundary length must be positive");
  Rng rng(seed);
  const double h = 2.0 * std::numbers::pi / res.strip_height_cells;
  const VerticalProcess vp = sample_vertical_process(gamma, res.horizon, h, rng, res.depth);
  const LatticeDomain strip = LatticeDomain::lqg_strip(static_cast<int>(vp.values.size()), res.strip_height_cells);
  const Field lateral = FreeStripGff(strip).sample_lateral(rng);
  Field phi = assemble_strip_field(vp, lateral);

  const double nu0 = boundary_measure(phi, gamma).total;
  if (!(nu0 > 0.0) || !std::isfinite(nu0)) {
    throw NumericalError("quantum disk: boundary length " + std::to_string(nu0) +
                         " is not positive and finite; refine the resolution");
  }
  DiskSample disk;
  disk.gamma = gamma;
  disk.seed = seed;
  disk.nu_raw = nu0;
  disk.weight = std::pow(nu0, disk_reweight_exponent(gamma));
  phi += (2.0 / gamma) * (std::log(boundary_length) - std::log(nu0));
  disk.strip_field = std::move(phi);

  const ConformalMap to_disk = ConformalMap::strip_to_disk();
  disk.embedding = ConformalMap::disk_to_strip();
  disk.area = area_measure(disk.strip_field, gamma);
  disk.boundary = boundary_measure(disk.strip_field, gamma);
  for (auto& p : disk.area.positions) p = inside_disk(to_disk(p));
  for (auto& p : disk.boundary.positions) {
    const Point q = to_disk(p);
    p = q / std::abs(q);
  }
  disk.area.support = disk.boundary.support = Support::points;
  disk.marked_interior = to_disk(Point(0.0, std::numbers::pi));
  disk.marked_boundary = Point(1.0, 0.0);
  disk.disk_radius_cells = res.render_field ? res.disk_radius_cells : 0;
  render(disk);
  return disk;
}

DiskSample embed_at(DiskSample disk, Eigen::Index area_atom, Eigen::Index boundary_atom) {
  if (area_atom < 0 || area_atom >= disk.area.size() || boundary_atom < 0 || boundary_atom >= disk.boundary.size()) {
    throw ConfigError("embed_at: atom index out of range");
  }
  const Point z = disk.area.positions[static_cast<std::size_t>(area_atom)];
  const Point w = disk.boundary.positions[static_cast<std::size_t>(boundary_atom)];
  const ConformalMap f = ConformalMap::mobius_disk(z, w / std::abs(w));
  const ConformalMap f_inv = f.inverse();
  for (auto& p : disk.area.positions) p = inside_disk(f_inv(p));
  for (auto& p : disk.boundary.positions) {
    const Point q = f_inv(p);
    p = q / std::abs(q);
  }
  disk.embedding = disk.embedding.compose(f);
  disk.marked_interior = f_inv(z);
  disk.marked_boundary = f_inv(w);
  render(disk);
  return disk;
}

DiskSample embed_with_marked_points(DiskSample disk, Rng& rng) {
  const Eigen::Index zi = AtomSampler(disk.area)(rng);
  const Eigen::Index wi = AtomSampler(disk.boundary)(rng);
  return embed_at(std::move(disk), zi, wi);
}

std::string disk_sidecar_json(const DiskSample& disk) {
  nlohmann::json j = {{"gamma", disk.gamma},
                      {"weight", disk.weight},
                      {"Z", {disk.marked_interior.real(), disk.marked_interior.imag()}},
                      {"W", {disk.marked_boundary.real(), disk.marked_boundary.imag()}},
                      {"nu_total", disk.nu_total()},
                      {"mu_total", disk.mu_total()},
                      {"seed", disk.seed}};
  return j.dump(2);
}

void save_disk_sample(const std::string& stem, const DiskSample& disk) {
  save_field(stem + ".field", disk.disk_radius_cells > 0 ? disk.field : disk.strip_field);
  std::ofstream out(stem + ".json");
  if (!out) throw ConfigError("cannot write " + stem + ".json");
  out << disk_sidecar_json(disk) << "\n";
}

}  // namespace lqglab
