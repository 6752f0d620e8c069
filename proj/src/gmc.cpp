#include "lqglab/gmc.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include <json.hpp>

namespace lqglab {

namespace {

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma <= 2.0)) throw ConfigError("gmc: gamma must lie in (0, 2]");
}

bool critical(double gamma) { return gamma == 2.0; }

double seneta_heyde(double mesh) {
  if (!(mesh < 1.0)) throw ConfigError("gmc: critical normalisation needs mesh < 1");
  return std::sqrt(std::log(1.0 / mesh));
}

std::string cell_name(int i, int j) { return "(" + std::to_string(i) + ", " + std::to_string(j) + ")"; }

void check_mass(double mass, int i, int j) {
  if (!std::isfinite(mass)) throw NumericalError("gmc: non-finite mass at cell " + cell_name(i, j));
}

}  // namespace

double epsilon_of_gamma(double gamma) { return 2.0 * (2.0 - gamma); }

Measure area_measure(const Field& field, double gamma) {
  check_gamma(gamma);
  const auto& d = field.domain;
  const double h = d.mesh;
  const double scale = critical(gamma) ? seneta_heyde(h) * std::pow(h, 4.0) : std::pow(h, 2.0 + gamma * gamma / 2.0);
  Measure m;
  m.support = Support::cells;
  m.gamma = gamma;
  m.mesh = h;
  std::vector<double> masses;
  masses.reserve(d.cell_count());
  for (int j = 0; j < d.ny; ++j) {
    for (int i = 0; i < d.nx; ++i) {
      if (!d.contains(i, j)) continue;
      const double mass = scale * std::exp(gamma * field(i, j));
      check_mass(mass, i, j);
      m.atom_ids.push_back(d.index(i, j));
      m.positions.push_back(d.cell_center(i, j));
      masses.push_back(mass);
    }
  }
  m.masses = Eigen::Map<Eigen::VectorXd>(masses.data(), static_cast<Eigen::Index>(masses.size()));
  m.refresh_total();
  return m;
}

Measure boundary_measure(const Field& field, double gamma) {
  check_gamma(gamma);
  const auto& d = field.domain;
  const double h = d.mesh;
  const double scale = critical(gamma) ? seneta_heyde(h) * h * h : std::pow(h, 1.0 + gamma * gamma / 4.0);
  Measure m;
  m.support = Support::boundary_edges;
  m.gamma = gamma;
  m.mesh = h;
  std::vector<double> masses;
  for (int j = 0; j < d.ny; ++j) {
    for (int i = 0; i < d.nx; ++i) {
      if (!d.boundary_cell(i, j)) continue;
      const double mass = scale * std::exp(0.5 * gamma * field(i, j));
      check_mass(mass, i, j);
      Point pos = d.cell_center(i, j);
      if (d.shape == DomainShape::strip) {
        pos = Point(pos.real(), j == 0 ? d.origin.imag() : d.origin.imag() + d.ny * h);
      } else {
        pos /= std::abs(pos);
      }
      m.atom_ids.push_back(d.index(i, j));
      m.positions.push_back(pos);
      masses.push_back(mass);
    }
  }
  m.masses = Eigen::Map<Eigen::VectorXd>(masses.data(), static_cast<Eigen::Index>(masses.size()));
  m.refresh_total();
  return m;
}

double loop_edge_scale(double gamma, double mesh) {
  check_gamma(gamma);
  const double kappa = gamma * gamma;
  const double dim = 1.0 + kappa / 8.0;
  double s = std::pow(mesh, dim + gamma * gamma / 8.0);
  if (critical(gamma)) s *= seneta_heyde(mesh);
  return s;
}

Measure loop_length_measure(const Field& field, const LatticeLoop& loop, double gamma, double calibration) {
  if (!loop.closed()) throw ConfigError("loop_length: loop is not closed");
  if (!(calibration > 0.0)) throw ConfigError("loop_length: calibration must be positive");
  const auto& d = field.domain;
  const double scale = calibration * loop_edge_scale(gamma, d.mesh);
  Measure m;
  m.support = Support::loop_edges;
  m.gamma = gamma;
  m.mesh = d.mesh;
  m.calibration = calibration;
  m.masses.resize(static_cast<Eigen::Index>(loop.steps()));
  for (std::size_t k = 0; k < loop.steps(); ++k) {
    const Corner p = loop.corners[k], q = loop.corners[k + 1];
    if (std::abs(p.first - q.first) + std::abs(p.second - q.second) != 1) {
      throw ConfigError("loop_length: consecutive corners are not lattice neighbours");
    }
    const auto [c0, c1] = cells_beside_edge(p, q);
    const double phi = 0.5 * (field(c0.first, c0.second) + field(c1.first, c1.second));
    const double mass = scale * std::exp(0.5 * gamma * phi);
    check_mass(mass, c0.first, c0.second);
    m.atom_ids.push_back(static_cast<int>(k));
    m.positions.push_back(0.5 * (d.corner(p.first, p.second) + d.corner(q.first, q.second)));
    m.masses(static_cast<Eigen::Index>(k)) = mass;
  }
  m.refresh_total();
  return m;
}

double loop_length(const Field& field, const LatticeLoop& loop, double gamma, double calibration) {
  return loop_length_measure(field, loop, gamma, calibration).total;
}

double expected_area_mass(const Field& green_diagonal, double gamma) {
  check_gamma(gamma);
  const auto& d = green_diagonal.domain;
  const double h = d.mesh;
  const double scale = critical(gamma) ? seneta_heyde(h) * std::pow(h, 4.0) : std::pow(h, 2.0 + gamma * gamma / 2.0);
  double total = 0.0;
  for (int j = 0; j < d.ny; ++j) {
    for (int i = 0; i < d.nx; ++i) {
      if (d.contains(i, j)) total += scale * std::exp(0.5 * gamma * gamma * green_diagonal(i, j));
    }
  }
  return total;
}

AtomSampler::AtomSampler(const Measure& m) {
  if (m.size() == 0 || !(m.total > 0.0) || !std::isfinite(m.total)) {
    throw NumericalError("AtomSampler: measure has no positive finite mass");
  }
  cumulative_.resize(static_cast<std::size_t>(m.size()));
  double acc = 0.0;
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    acc += m.masses(k);
    cumulative_[static_cast<std::size_t>(k)] = acc;
  }
}

Eigen::Index AtomSampler::operator()(Rng& rng) const {
  std::uniform_real_distribution<double> u(0.0, cumulative_.back());
  const double x = u(rng);
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
  if (it == cumulative_.end()) --it;
  return static_cast<Eigen::Index>(it - cumulative_.begin());
}

void write_measure_csv(std::ostream& out, const Measure& m) {
  static const char* kSupport[] = {"cells", "boundary_edges", "loop_edges", "points"};
  nlohmann::json header = {{"gamma", m.gamma},
                           {"h", m.mesh},
                           {"calibration", m.calibration},
                           {"support", kSupport[static_cast<int>(m.support)]},
                           {"total", m.total}};
  out << "# " << header.dump() << "\n";
  out << "atom_id,mass\n" << std::setprecision(17);
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    if (m.masses(k) == 0.0) continue;
    out << m.atom_ids[static_cast<std::size_t>(k)] << ',' << m.masses(k) << '\n';
  }
}

}  // namespace lqglab
