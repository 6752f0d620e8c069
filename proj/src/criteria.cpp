#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>

#include <Eigen/SparseCholesky>

#include "criteria_util.hpp"
#include "lqglab/cle.hpp"
#include "lqglab/errors.hpp"
#include "lqglab/field.hpp"
#include "lqglab/gmc.hpp"
#include "lqglab/markov_verify.hpp"
#include "lqglab/quantum_disk.hpp"
#include "lqglab/stats.hpp"

namespace lqglab::criteria {

namespace {

using detail::fmt;
using detail::Stopwatch;

/// Exact 2 pi (4 I - A)^{-1} restricted to the given cells, by sparse solves
/// on the free cells of a zero-boundary domain (independent of the sampler's
/// spectral representation).
class SparseGreen {
 public:
  explicit SparseGreen(const LatticeDomain& d) : domain_(d), index_(static_cast<std::size_t>(d.cell_count()), -1) {
    int n = 0;
    for (int j = 0; j < d.ny; ++j) {
      for (int i = 0; i < d.nx; ++i) {
        if (d.dirichlet_interior(i, j)) index_[static_cast<std::size_t>(d.index(i, j))] = n++;
      }
    }
    std::vector<Eigen::Triplet<double>> t;
    for (int j = 0; j < d.ny; ++j) {
      for (int i = 0; i < d.nx; ++i) {
        const int a = at(i, j);
        if (a < 0) continue;
        t.emplace_back(a, a, 4.0);
        for (auto [di, dj] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
          const int b = at(i + di, j + dj);
          if (b >= 0) t.emplace_back(a, b, -1.0);
        }
      }
    }
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    solver_.compute(m);
    if (solver_.info() != Eigen::Success) throw NumericalError("sparse Green function: factorisation failed");
  }

  double operator()(int i0, int j0, int i1, int j1) const {
    const int a = at(i0, j0), b = at(i1, j1);
    if (a < 0 || b < 0) return 0.0;
    Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(solver_.rows()));
    e(a) = 1.0;
    const Eigen::VectorXd col = solver_.solve(e);
    return 2.0 * std::numbers::pi * col(b);
  }

 private:
  int at(int i, int j) const {
    return domain_.in_grid(i, j) ? index_[static_cast<std::size_t>(domain_.index(i, j))] : -1;
  }

  LatticeDomain domain_;
  std::vector<int> index_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

double max_relative_gap(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double scale = std::max(std::abs(a(k)), std::abs(b(k)));
    if (scale > 0.0) worst = std::max(worst, std::abs(a(k) - b(k)) / scale);
  }
  return worst;
}

/// Euclidean area of the outermost loop around the origin, 0 in the gasket.
std::vector<double> origin_row(const LoopEnsemble& ens) {
  const auto j = loop_index_of_point(ens, Point(1e-9, 1e-9));
  const double violations = static_cast<double>(structure_violations(ens).size());
  return {j ? region_area(ens, *j) : 0.0, j ? 0.0 : 1.0, violations, ens.largest_cluster_fraction,
          static_cast<double>(ens.size())};
}

}  // namespace

CriterionResult lemma_exactness(const LemmaParams& p, const RunContext& ctx) {
  Stopwatch watch;
  CriterionResult r = detail::start("C1", "size-biased posterior exactness");
  r.threshold = p.tolerance;
  int agree = 0;
  double worst = 0.0;
  std::size_t queries = 0;
  std::ofstream csv;
  if (ctx.out) {
    csv = ctx.out->csv("lemma37.csv");
    csv << "model,variables,atoms,queries,max_abs_diff\n" << std::setprecision(17);
  }
  for (int m = 0; m < p.models; ++m) {
    Rng rng = make_rng(ctx.seed, "lemma37", static_cast<std::uint64_t>(m));
    std::uniform_int_distribution<int> variables(2, p.max_variables), atoms(2, p.max_atoms);
    const int n = variables(rng), a = atoms(rng);
    const DiscreteModel model = DiscreteModel::random(n, a, rng);
    double model_worst = 0.0;
    std::size_t model_queries = 0;
    std::vector<int> x(static_cast<std::size_t>(n));
    for (std::size_t c = 0; c < model.configurations(); ++c) {
      if (!(model.joint(static_cast<Eigen::Index>(c)) > 0.0)) continue;
      for (int j = 0; j < n; ++j) x[static_cast<std::size_t>(j)] = model.value(c, j);
      for (int k = 0; k < n; ++k) {
        const Eigen::VectorXd formula = size_biased_posterior(model, k, x);
        const Eigen::VectorXd brute = size_biased_posterior_enumerated(model, k, x);
        model_worst = std::max(model_worst, (formula - brute).cwiseAbs().maxCoeff());
        ++model_queries;
      }
    }
    agree += model_worst <= p.tolerance;
    worst = std::max(worst, model_worst);
    queries += model_queries;
    if (ctx.out) csv << m << ',' << n << ',' << a << ',' << model_queries << ',' << model_worst << '\n';
  }
  r.seconds = watch.seconds();
  r.statistic = worst;
  r.pass = agree == p.models && r.seconds < p.time_limit;
  r.metrics = {{"models_agreeing", agree}, {"queries", static_cast<double>(queries)}, {"max_abs_diff", worst}};
  r.detail = fmt("pass %d/%d models (%zu conditional laws), max |formula - enumeration| = %.2e (tolerance %.0e), "
                 "runtime limit %.0f s",
                 agree, p.models, queries, worst, p.tolerance, p.time_limit);
  return r;
}

CriterionResult gff_covariance(const GffParams& p, const RunContext& ctx) {
  Stopwatch watch;
  CriterionResult r = detail::start("C5", "GFF covariance vs discrete Green function");
  r.threshold = p.sigmas;
  const int n = p.grid, c = n / 2;
  const LatticeDomain domain = LatticeDomain::strip(n, n, 1.0 / n);
  struct Pair {
    int i0, j0, i1, j1;
  };
  const std::vector<Pair> pairs{{c, c, c, c},         {c, c, c + 1, c},     {c, c, c + 2, c},  {c, c, c + 4, c},
                                {c, c, c + 8, c},     {c, c, c + 3, c + 3}, {c, c, c, c + 16}, {1, 1, 1, 1},
                                {1, 1, 2, 1},         {8, c, c, 8}};
  const SparseGreen green(domain);
  const ZeroBoundaryGff gff(domain);
  std::vector<double> exact;
  double spectral_gap = 0.0;
  for (const auto& q : pairs) {
    exact.push_back(green(q.i0, q.j0, q.i1, q.j1));
    spectral_gap = std::max(spectral_gap, std::abs(exact.back() - gff.green(q.i0, q.j0, q.i1, q.j1)));
  }
  const auto rows = ctx.samples("gff-covariance", p.samples, [&](std::size_t k) {
    Rng rng = make_rng(ctx.seed, "gff-covariance", k);
    const Field f = gff.sample(rng);
    std::vector<double> row;
    for (const auto& q : pairs) row.push_back(f(q.i0, q.j0) * f(q.i1, q.j1));
    return row;
  });
  std::ofstream csv;
  if (ctx.out) {
    csv = ctx.out->csv("gff_covariance.csv");
    csv << "i0,j0,i1,j1,exact,empirical,standard_error,z\n" << std::setprecision(17);
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    std::vector<double> products;
    for (const auto& row : rows) products.push_back(row[k]);
    const double m = stats::mean(products), se = stats::standard_error(products);
    const double z = (m - exact[k]) / se;
    worst = std::max(worst, std::abs(z));
    const auto& q = pairs[k];
    r.metrics.emplace_back(fmt("z(%d,%d;%d,%d)", q.i0, q.j0, q.i1, q.j1), z);
    if (ctx.out) {
      csv << q.i0 << ',' << q.j0 << ',' << q.i1 << ',' << q.j1 << ',' << exact[k] << ',' << m << ',' << se << ',' << z
          << '\n';
    }
  }
  r.metrics.emplace_back("spectral_vs_sparse_green", spectral_gap);
  r.statistic = worst;
  r.pass = worst <= p.sigmas;
  r.detail = fmt("max |empirical - exact| = %.2f standard errors (bound %.0f) over %zu pairs, %dx%d grid, N=%zu; "
                 "spectral vs sparse Green %.1e",
                 worst, p.sigmas, pairs.size(), n, n, p.samples, spectral_gap);
  r.seconds = watch.seconds();
  return r;
}

std::vector<CriterionResult> gmc_scaling(const GmcParams& p, const RunContext& ctx) {
  Stopwatch watch;
  CriterionResult r = detail::start("C6", "GMC shift covariance and mesh stability");
  r.threshold = p.ks_bound;

  // Atom-level shift factors on sampled fields, subcritical and critical.
  double shift_gap = 0.0;
  {
    const LatticeDomain d = LatticeDomain::disk(p.coarse_radius);
    const ZeroBoundaryGff gff(d);
    for (int s = 0; s < 4; ++s) {
      Rng rng = make_rng(ctx.seed, "gmc-shift", static_cast<std::uint64_t>(s));
      const Field f = gff.sample(rng);
      for (double gamma : {p.gamma, 2.0}) {
        for (double c : {-0.7, 0.3, 1.1}) {
          const Field g = f + c;
          const Measure a0 = area_measure(f, gamma), a1 = area_measure(g, gamma);
          const Measure b0 = boundary_measure(f, gamma), b1 = boundary_measure(g, gamma);
          shift_gap = std::max(shift_gap, max_relative_gap(a1.masses, a0.masses * std::exp(gamma * c)));
          shift_gap = std::max(shift_gap, max_relative_gap(b1.masses, b0.masses * std::exp(0.5 * gamma * c)));
        }
      }
    }
  }
  const bool shift_ok = shift_gap <= 1e-12;

  std::vector<std::vector<double>> ratio(2);
  std::vector<double> expected(2);
  for (int level = 0; level < 2; ++level) {
    const int radius = p.coarse_radius << level;
    const ZeroBoundaryGff gff(LatticeDomain::disk(radius));
    expected[static_cast<std::size_t>(level)] = expected_area_mass(gff.green_diagonal(), p.gamma);
    const std::string tag = fmt("gmc-mass-R%d", radius);
    ctx.note(fmt("  GMC total mass on the disk, R = %d: %zu fields", radius, p.samples));
    const auto rows = ctx.samples(tag, p.samples, [&](std::size_t k) {
      Rng rng = make_rng(ctx.seed, tag, k);
      return std::vector<double>{area_measure(gff.sample(rng), p.gamma).total};
    });
    for (const auto& row : rows) ratio[static_cast<std::size_t>(level)].push_back(row[0] / expected[static_cast<std::size_t>(level)]);
  }
  const double ks = stats::ks_distance(ratio[0], ratio[1]);
  const double crit = stats::ks_critical(0.01, static_cast<double>(ratio[0].size()), static_cast<double>(ratio[1].size()));
  if (ctx.out) {
    std::ofstream csv = ctx.out->csv("gmc_masses.csv");
    csv << "radius_cells,sample,mass,calibrated_mass\n" << std::setprecision(17);
    for (int level = 0; level < 2; ++level) {
      const auto& v = ratio[static_cast<std::size_t>(level)];
      for (std::size_t k = 0; k < v.size(); ++k) {
        csv << (p.coarse_radius << level) << ',' << k << ',' << v[k] * expected[static_cast<std::size_t>(level)] << ','
            << v[k] << '\n';
      }
    }
  }
  r.statistic = ks;
  r.pass = shift_ok && ks <= p.ks_bound;
  r.metrics = {{"shift_max_relative_gap", shift_gap}, {"mesh_ks", ks}, {"two_sample_critical_0.01", crit},
               {"mean_calibrated_coarse", stats::mean(ratio[0])}, {"mean_calibrated_fine", stats::mean(ratio[1])}};
  r.detail = fmt("shift factors exact to %.1e; KS of mu(D)/E[mu(D)] between R=%d and R=%d = %.4f (bound %.2f; "
                 "two-sample 1%% noise level %.4f), gamma=%g, N=%zu per mesh",
                 shift_gap, p.coarse_radius, 2 * p.coarse_radius, ks, p.ks_bound, crit, p.gamma, p.samples);
  r.seconds = watch.seconds();
  return {r};
}

std::vector<CriterionResult> cle_geometry(const CleParams& p, const RunContext& ctx) {
  Stopwatch watch;
  CriterionResult r = detail::start("C7", "CLE structure, monotone coupling and origin-loop stability");
  r.threshold = p.ks_bound;
  check_kappa(p.kappa);
  check_kappa(p.kappa_thinned);
  if (!(p.kappa_thinned < p.kappa)) throw ConfigError("cle_geometry: the thinned kappa must be below kappa");
  const double kappa = p.kappa;
  const double intensity = central_charge(kappa) / 2.0;

  auto origin_areas = [&](int radius) {
    const LoopSoupSampler sampler(LatticeDomain::disk(radius));
    const std::string tag = fmt("cle-origin-R%d", radius);
    ctx.note(fmt("  CLE ensembles, kappa = %g, R = %d: %zu soups", kappa, radius, p.samples));
    return ctx.samples(tag, p.samples, [&](std::size_t k) {
      Rng rng = make_rng(ctx.seed, tag, k);
      return origin_row(extract_loop_ensemble(sampler.sample(intensity, rng)));
    });
  };
  const auto coarse = origin_areas(p.coarse_radius);
  const auto fine = origin_areas(2 * p.coarse_radius);

  std::size_t violations = 0, checked = 0;
  for (const auto* set : {&coarse, &fine}) {
    for (const auto& row : *set) {
      violations += static_cast<std::size_t>(row[2]);
      ++checked;
    }
  }

  std::size_t nested = 0;
  {
    const LoopSoupSampler sampler(LatticeDomain::disk(p.coarse_radius));
    const double thinned = central_charge(p.kappa_thinned) / 2.0;
    const auto rows = ctx.samples("cle-coupled", p.coupled, [&](std::size_t k) {
      Rng rng = make_rng(ctx.seed, "cle-coupled", k);
      const LoopSoup soup = sampler.sample(intensity, rng);
      const LoopEnsemble outer = extract_loop_ensemble(soup);
      const LoopEnsemble inner = extract_loop_ensemble(thin(soup, thinned));
      const double bad = static_cast<double>(structure_violations(outer).size() + structure_violations(inner).size());
      return std::vector<double>{regions_nested(inner, outer) ? 1.0 : 0.0, bad};
    });
    for (const auto& row : rows) {
      nested += row[0] > 0.0;
      violations += static_cast<std::size_t>(row[1]);
      checked += 2;
    }
  }

  auto column = [](const std::vector<std::vector<double>>& rows, std::size_t c) {
    std::vector<double> v;
    for (const auto& row : rows) v.push_back(row[c]);
    return v;
  };
  // The gasket atom at area 0 shrinks only slowly with the mesh; the law given
  // that the origin is enclosed is reported alongside.
  auto enclosed = [](const std::vector<double>& areas) {
    std::vector<double> v;
    for (double a : areas) {
      if (a > 0.0) v.push_back(a);
    }
    return v;
  };
  const std::vector<double> a0 = column(coarse, 0), a1 = column(fine, 0);
  const double ks = stats::ks_distance(a0, a1);
  const double ks_enclosed = stats::ks_distance(enclosed(a0), enclosed(a1));
  const double g0 = stats::mean(column(coarse, 1)), g1 = stats::mean(column(fine, 1));

  if (ctx.out) {
    std::ofstream csv = ctx.out->csv("cle_origin_area.csv");
    csv << "radius_cells,sample,origin_area,in_gasket,loops,largest_cluster_fraction\n" << std::setprecision(17);
    for (int level = 0; level < 2; ++level) {
      const auto& rows = level ? fine : coarse;
      for (std::size_t k = 0; k < rows.size(); ++k) {
        csv << (p.coarse_radius << level) << ',' << k << ',' << rows[k][0] << ',' << rows[k][1] << ',' << rows[k][4]
            << ',' << rows[k][3] << '\n';
      }
    }
    Rng rng = make_rng(ctx.seed, fmt("cle-origin-R%d", p.coarse_radius), 0);
    const LoopEnsemble ens = extract_loop_ensemble(LoopSoupSampler(LatticeDomain::disk(p.coarse_radius)).sample(intensity, rng));
    ctx.out->json("cle_sample.json", loop_ensemble_json(ens));
  }

  const bool structure_ok = violations == 0;
  const bool coupling_ok = nested == p.coupled;
  r.statistic = ks;
  r.pass = structure_ok && coupling_ok && ks <= p.ks_bound;
  r.metrics = {{"structure_violations", static_cast<double>(violations)},
               {"ensembles_checked", static_cast<double>(checked)},
               {"coupled_nested", static_cast<double>(nested)},
               {"origin_area_ks", ks},
               {"enclosed_area_ks", ks_enclosed},
               {"gasket_fraction_coarse", g0},
               {"gasket_fraction_fine", g1},
               {"largest_cluster_fraction_coarse", stats::mean(column(coarse, 3))}};
  r.detail = fmt("%zu structure violations in %zu ensembles; %zu/%zu thinned (kappa=%g) hulls nested; origin-loop "
                 "area KS R=%d vs R=%d = %.4f (bound %.2f; origin in gasket %.3f vs %.3f; KS given an enclosing loop %.4f), "
                 "N=%zu",
                 violations, checked, nested, p.coupled, p.kappa_thinned, p.coarse_radius, 2 * p.coarse_radius, ks,
                 p.ks_bound, g0, g1, ks_enclosed, p.samples);
  r.seconds = watch.seconds();
  std::vector<CriterionResult> out{r};

  if (p.finer_diagnostic) {
    Stopwatch w2;
    CriterionResult d = detail::start("C7-fine", "origin-loop area stability one halving finer");
    d.gating = false;
    d.threshold = p.ks_bound;
    const auto finer = origin_areas(4 * p.coarse_radius);
    const std::vector<double> a2 = column(finer, 0);
    const double ks2 = stats::ks_distance(a1, a2);
    const double ks2_enclosed = stats::ks_distance(enclosed(a1), enclosed(a2));
    const double g2 = stats::mean(column(finer, 1));
    d.statistic = ks2;
    d.pass = ks2 <= p.ks_bound;
    d.metrics = {{"origin_area_ks", ks2}, {"enclosed_area_ks", ks2_enclosed}, {"gasket_fraction", g2}};
    d.detail = fmt("KS R=%d vs R=%d = %.4f; origin in gasket %.3f -> %.3f; KS given an enclosing loop %.4f",
                   2 * p.coarse_radius, 4 * p.coarse_radius, ks2, g1, g2, ks2_enclosed);
    d.seconds = w2.seconds();
    out.push_back(d);
  }
  return out;
}

CriterionResult marked_points(const MarkedParams& p, const RunContext& ctx) {
  Stopwatch watch;
  CriterionResult r = detail::start("C8", "marked-point laws");
  r.threshold = p.sigmas;
  const LatticeDomain domain = LatticeDomain::disk(p.radius);
  const ZeroBoundaryGff gff(domain);
  const LoopSoupSampler sampler(domain);
  double worst = 0.0;
  std::size_t checks = 0;
  std::ofstream csv;
  if (ctx.out) {
    csv = ctx.out->csv("marked_points.csv");
    csv << "ensemble,kind,loop,probability,estimate,standard_error,z\n" << std::setprecision(17);
  }
  for (int e = 0; e < p.ensembles; ++e) {
    Rng rng = make_rng(ctx.seed, "marked-ensemble", static_cast<std::uint64_t>(e));
    const Field field = gff.sample(rng);
    const LoopEnsemble ens = extract_loop_ensemble(sampler.sample(central_charge(p.gamma * p.gamma) / 2.0, rng));
    const Measure mu = area_measure(field, p.gamma);
    std::vector<double> mass(ens.size(), 0.0);
    double gasket = 0.0;
    for (Eigen::Index a = 0; a < mu.size(); ++a) {
      const auto j = loop_index_of_point(ens, mu.positions[static_cast<std::size_t>(a)]);
      (j ? mass[*j] : gasket) += mu.masses(a);
    }
    std::vector<std::size_t> by_mass(ens.size());
    for (std::size_t k = 0; k < by_mass.size(); ++k) by_mass[k] = k;
    std::sort(by_mass.begin(), by_mass.end(), [&](std::size_t a, std::size_t b) { return mass[a] > mass[b]; });
    const std::size_t shown = std::min<std::size_t>(static_cast<std::size_t>(p.categories), by_mass.size());

    // Multinomial law of J for area-sampled points.
    const AtomSampler draw(mu);
    std::vector<double> counts(ens.size(), 0.0);
    double gasket_count = 0.0;
    Rng prng = make_rng(ctx.seed, "marked-points", static_cast<std::uint64_t>(e));
    for (std::size_t m = 0; m < p.point_draws; ++m) {
      const auto j = loop_index_of_point(ens, mu.positions[static_cast<std::size_t>(draw(prng))]);
      (j ? counts[*j] : gasket_count) += 1.0;
    }
    const double n = static_cast<double>(p.point_draws);
    auto check = [&](const char* kind, long loop, double prob, double estimate, double se) {
      const double z = se > 0.0 ? (estimate - prob) / se : (estimate == prob ? 0.0 : INFINITY);
      worst = std::max(worst, std::abs(z));
      ++checks;
      if (ctx.out) csv << e << ',' << kind << ',' << loop << ',' << prob << ',' << estimate << ',' << se << ',' << z << '\n';
    };
    const double gp = gasket / mu.total;
    check("multinomial", -1, gp, gasket_count / n, std::sqrt(gp * (1.0 - gp) / n));
    for (std::size_t s = 0; s < shown; ++s) {
      const std::size_t j = by_mass[s];
      const double pj = mass[j] / mu.total;
      check("multinomial", static_cast<long>(j), pj, counts[j] / n, std::sqrt(pj * (1.0 - pj) / n));
    }
    // First hitting index of the heaviest loops: geometric with success mu(U^j)/mu(D).
    for (std::size_t s = 0; s < std::min<std::size_t>(3, shown); ++s) {
      const std::size_t j = by_mass[s];
      const double pj = mass[j] / mu.total;
      Rng hrng = make_rng(ctx.seed, fmt("marked-hitting-%d", e), j);
      auto stream = [&]() { return mu.positions[static_cast<std::size_t>(draw(hrng))]; };
      double sum = 0.0;
      for (std::size_t m = 0; m < p.hitting_draws; ++m) {
        const auto hit = first_hitting_index(ens, stream, j, 100000000);
        if (!hit) throw NumericalError("marked points: hitting index exceeded its draw bound");
        sum += static_cast<double>(*hit);
      }
      const double hn = static_cast<double>(p.hitting_draws);
      check("geometric_mean", static_cast<long>(j), 1.0 / pj, sum / hn, std::sqrt(1.0 - pj) / pj / std::sqrt(hn));
    }
  }
  r.statistic = worst;
  r.pass = worst <= p.sigmas;
  r.metrics = {{"max_abs_z", worst}, {"checks", static_cast<double>(checks)}};
  r.detail = fmt("max |z| = %.2f (bound %.0f) over %zu checks: gasket and %d heaviest loops' frequencies (N=%zu points) "
                 "and geometric hitting means (N=%zu) on %d fixed ensembles, gamma=%g, R=%d",
                 worst, p.sigmas, checks, p.categories, p.point_draws, p.hitting_draws, p.ensembles, p.gamma, p.radius);
  r.seconds = watch.seconds();
  return r;
}

std::vector<CriterionResult> end_to_end(const EndToEndParams& p, const RunContext& ctx) {
  Stopwatch watch;
  CriterionResult r = detail::start("C10", "largest-loop length law at gamma = 2 vs the stable target");
  r.gating = false;
  r.threshold = p.ks_bound;
  DiskResolution res;
  res.strip_height_cells = p.strip_height;
  res.disk_radius_cells = p.radius;
  const double kappa = p.gamma * p.gamma;
  const LoopSoupSampler sampler(LatticeDomain::disk(p.radius));
  ctx.note(fmt("  end-to-end, gamma = %g, h = 1/%d: %zu disks", p.gamma, p.radius, p.samples));
  const auto rows = ctx.samples("thm12", p.samples, [&](std::size_t k) {
    const DiskSample disk = sample_unit_boundary_disk(p.gamma, res, derive_seed(ctx.seed, "thm12-disk", k));
    Rng rng = make_rng(ctx.seed, "thm12-soup", k);
    LoopEnsemble ens = extract_loop_ensemble(sampler.sample(central_charge(kappa) / 2.0, rng));
    assign_loop_lengths(ens, disk.field, p.gamma, 1.0);
    std::vector<double> row{disk.weight, static_cast<double>(ens.size())};
    for (std::size_t s = 0; s < 5; ++s) row.push_back(s < ens.order.size() ? ens.lengths[ens.order[s]] : 0.0);
    return row;
  });
  std::vector<double> top, weights;
  for (const auto& row : rows) {
    top.push_back(row[2]);
    weights.push_back(row[0]);
  }
  const double beta = beta_of_gamma(p.gamma);
  const detail::LawTable law(beta, 1e-2, 1e3, 20);
  auto target = [beta](double x) { return reweighted_largest_jump_target(beta, x); };

  // The lattice length carries an unknown multiplicative constant; quotient it
  // out by the scale minimising the distance.
  auto best_scale = [&](const std::function<double(double)>& cdf) {
    auto ks_at = [&](double log_c) {
      std::vector<double> scaled(top.size());
      for (std::size_t k = 0; k < top.size(); ++k) scaled[k] = top[k] * std::exp(log_c);
      return stats::ks_distance_to({scaled, weights}, cdf);
    };
    double best = 0.0, best_ks = INFINITY;
    for (double lc = -15.0; lc <= 15.0; lc += 0.05) {
      const double v = ks_at(lc);
      if (v < best_ks) best_ks = v, best = lc;
    }
    for (double step = 0.02; step > 1e-4; step *= 0.5) {
      for (double lc : {best - step, best + step}) {
        const double v = ks_at(lc);
        if (v < best_ks) best_ks = v, best = lc;
      }
    }
    return std::pair{best, best_ks};
  };
  const auto [log_c, ks] = best_scale(target);
  const auto [log_c_law, ks_law] = best_scale([&law](double x) { return law(x); });
  if (ctx.out) {
    std::ofstream csv = ctx.out->csv("thm12_lengths.csv");
    csv << "sample_id,weight,loops,rank,length,calibrated_length\n" << std::setprecision(17);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      for (std::size_t s = 0; s < 5; ++s) {
        if (rows[k][2 + s] <= 0.0 && s > 0) break;
        csv << k << ',' << rows[k][0] << ',' << rows[k][1] << ',' << s + 1 << ',' << rows[k][2 + s] << ','
            << rows[k][2 + s] * std::exp(log_c) << '\n';
      }
    }
  }
  r.statistic = ks;
  r.pass = ks <= p.ks_bound;
  r.metrics = {{"ks_target", ks}, {"log_calibration", log_c}, {"ks_law", ks_law}, {"log_calibration_law", log_c_law}};
  r.detail = fmt("KS of the calibrated largest-loop length to the criterion-4 target = %.4f (bound %.2f, log c = %.3f); "
                 "to the killed-process law %.4f; h=1/%d, strip height %d cells, N=%zu",
                 ks, p.ks_bound, log_c, ks_law, p.radius, p.strip_height, p.samples);
  r.seconds = watch.seconds();
  return {r};
}

std::vector<CriterionResult> null_power(const CalibrationParams& p, const RunContext& ctx) {
  Stopwatch watch;
  CriterionResult r = detail::start("C11", "null and power calibration of the statistical tests");
  r.threshold = p.repetitions;
  struct Tally {
    std::string name;
    int null_pass = 0;
    int alt_fail = 0;
  };
  std::vector<Tally> tallies{{"conditional_disk"}, {"weighted_law"}, {"sequence_rank1"}};
  DiskTestOptions opts;
  opts.alpha = p.alpha;

  DiskResolution res;
  res.strip_height_cells = p.disk_strip_height;
  res.render_field = false;
  const double shift = 0.5;
  auto disk_arm = [&](const std::string& tag, int rep, double field_shift) {
    std::vector<SurfaceObservation> arm;
    for (std::size_t i = 0; i < p.disks_per_arm; ++i) {
      const std::uint64_t index = static_cast<std::uint64_t>(rep) * p.disks_per_arm + i;
      Rng lrng = make_rng(ctx.seed, tag + "-length", index);
      const double length = std::exp(std::uniform_real_distribution<double>(0.0, 2.0 * std::log(opts.bin_ratio))(lrng));
      const DiskSample disk = sample_unit_boundary_disk(p.disk_gamma, res, derive_seed(ctx.seed, tag, index), length);
      double inner = 0.0;
      for (Eigen::Index a = 0; a < disk.area.size(); ++a) {
        if (std::abs(disk.area.positions[static_cast<std::size_t>(a)]) < 0.5) inner += disk.area.masses(a);
      }
      SurfaceObservation s;
      s.boundary_length = length;
      s.observables.resize(2);
      // A field shift by c multiplies every area atom by e^{gamma c}.
      s.observables << std::log(disk.mu_total() / (length * length)) + p.disk_gamma * field_shift,
          inner / disk.mu_total();
      s.group = static_cast<long>(i / 2);
      arm.push_back(s);
    }
    return arm;
  };

  auto levy_arm = [&](const std::string& tag, double beta, int rep) {
    LevyOptions o;
    o.delta = p.sequence_delta;
    o.dt = p.sequence_delta;
    std::vector<std::pair<std::vector<double>, double>> samples;
    for (std::size_t i = 0; i < p.sequence_samples; ++i) {
      Rng rng = make_rng(ctx.seed, tag, static_cast<std::uint64_t>(rep) * p.sequence_samples + i);
      const LevyPath path = sample_levy_path(beta, o, rng);
      if (!path.tau) continue;
      std::vector<double> jumps = jumps_before_tau(path);
      if (jumps.size() > 5) jumps.resize(5);
      samples.emplace_back(std::move(jumps), *path.tau);
    }
    return reweight_by_inverse_tau(samples);
  };

  std::ofstream csv;
  if (ctx.out) {
    csv = ctx.out->csv("null_power.csv");
    csv << "test,repetition,arm,statistic,threshold,pass\n" << std::setprecision(17);
  }
  auto record = [&](const std::string& test, int rep, const char* arm, const TestReport& t) {
    if (ctx.out) csv << test << ',' << rep << ',' << arm << ',' << t.statistic << ',' << t.threshold << ',' << t.pass << '\n';
  };
  ctx.note(fmt("  null/power: %d repetitions of three tests", p.repetitions));
  for (int rep = 0; rep < p.repetitions; ++rep) {
    {
      const auto a = disk_arm("cal-disk-a", rep, 0.0), b = disk_arm("cal-disk-b", rep, 0.0);
      const auto shifted = disk_arm("cal-disk-a", rep, shift);
      Rng rng = make_rng(ctx.seed, "cal-disk-perm", static_cast<std::uint64_t>(rep));
      const TestReport null = conditional_disk_test(a, b, opts, rng);
      const TestReport alt = conditional_disk_test(shifted, b, opts, rng);
      tallies[0].null_pass += null.pass;
      tallies[0].alt_fail += !alt.pass;
      record("conditional_disk", rep, "null", null);
      record("conditional_disk", rep, "alternative", alt);
    }
    {
      Rng rng = make_rng(ctx.seed, "cal-weighted", static_cast<std::uint64_t>(rep));
      std::exponential_distribution<double> expo(1.0);
      std::gamma_distribution<double> gamma2(2.0, 1.0);
      std::vector<double> x(p.weighted_samples), w1(x.size()), w2(x.size()), y(p.weighted_samples);
      for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = expo(rng);
        w1[i] = x[i];
        w2[i] = x[i] * x[i];
      }
      for (auto& v : y) v = gamma2(rng);
      // Exp(1) size-biased by x is Gamma(2, 1); weighting by x^2 gives Gamma(3, 1).
      const TestReport null = weighted_law_test(x, w1, y, {}, p.alpha);
      const TestReport alt = weighted_law_test(x, w2, y, {}, p.alpha);
      tallies[1].null_pass += null.pass;
      tallies[1].alt_fail += !alt.pass;
      record("weighted_law", rep, "null", null);
      record("weighted_law", rep, "alternative", alt);
    }
    {
      const WeightedEnsemble a = levy_arm("cal-seq-a", 1.5, rep), b = levy_arm("cal-seq-b", 1.5, rep);
      const WeightedEnsemble c = levy_arm("cal-seq-c", 1.75, rep);
      const TestReport null = sequence_test(a, b, p.alpha);
      const TestReport alt = sequence_test(a, c, p.alpha);
      tallies[2].null_pass += null.pass;
      tallies[2].alt_fail += !alt.pass;
      record("sequence_rank1", rep, "null", null);
      record("sequence_rank1", rep, "alternative", alt);
    }
  }
  bool pass = true;
  std::string parts;
  int worst = p.repetitions;
  for (const auto& t : tallies) {
    pass = pass && t.null_pass == p.repetitions && t.alt_fail == p.repetitions;
    worst = std::min({worst, t.null_pass, t.alt_fail});
    parts += fmt("%s%s null %d/%d, power %d/%d", parts.empty() ? "" : "; ", t.name.c_str(), t.null_pass, p.repetitions,
                 t.alt_fail, p.repetitions);
    r.metrics.emplace_back(t.name + "_null_pass", t.null_pass);
    r.metrics.emplace_back(t.name + "_alternative_fail", t.alt_fail);
  }
  r.statistic = worst;
  r.pass = pass;
  r.detail = parts + fmt(" (alpha %.2f; alternatives: field shift +%.1f, weight x^2, beta 7/4)", p.alpha, shift);
  r.seconds = watch.seconds();
  return {r};
}

}  // namespace lqglab::criteria
