#include "stokeslab/experiments.hpp"

#include "stokeslab/continuation.hpp"
#include "stokeslab/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

namespace stokeslab {

namespace {

double wrap(double s) { return s - std::floor(s); }

// exp(1 - 1/(1 - r^2)) on (-1, 1): smooth, 1 at the center, flat zero outside.
double smooth_bump(double r) { return std::abs(r) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r * r)) : 0.0; }

struct Line {
  double a = 0.0, b = 0.0, r_squared = 0.0;
};

Line least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, ErrorKind::invalid_argument, "fit abscissae have no spread");
  Line l;
  l.b = sxy / sxx;
  l.a = my - l.b * mx;
  l.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return l;
}

double r_squared(const std::vector<double>& x, const std::vector<double>& y, double a, double b) {
  double my = 0;
  for (double v : y) my += v / static_cast<double>(y.size());
  double res = 0, tot = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    res += std::pow(y[i] - a - b * x[i], 2);
    tot += std::pow(y[i] - my, 2);
  }
  return tot > 0.0 ? 1.0 - res / tot : 1.0;
}

// Transformed abscissa of the modulus family: log log|log x| or log|log x|.
double modulus_abscissa(ModulusFamily family, double x) {
  return family == ModulusFamily::loglog ? std::log(std::log(-std::log(x))) : std::log(-std::log(x));
}

StabilityRecord compute_record(const ExperimentConfig& cfg, const Mesh& base, int piece, const StokesSolution& sol0,
                               const CauchyData& c0, double g_norm, double t) {
  StabilityRecord r;
  r.t = t;
  r.level = cfg.level;
  r.F = c0.F;
  r.g_norm = g_norm;
  try {
    const BoundaryCurve d0 = obstacle_at(cfg, 0.0), dt = obstacle_at(cfg, t);
    const bool same = t == 0.0;
    std::shared_ptr<const P2Space> space;
    if (same) {
      space = sol0.space;
    } else {
      Mesh m = morph_piece(base, piece, std::make_shared<const BoundaryCurve>(dt), cfg.falloff);
      const MeshCheck check = check_mesh(m);
      require(check.passed(), ErrorKind::mesh, "morphed mesh fails its checks: " + check.failure);
      space = std::make_shared<const P2Space>(std::make_shared<const Mesh>(std::move(m)));
    }
    const StokesSolution sol = same ? sol0 : solve_dirichlet(space, boundary_data(cfg, *space));
    auto gamma = std::make_shared<const BoundaryTraceSpace>(space, std::set{BoundaryTag::gamma});
    const CauchyData ct = same ? c0 : measure_cauchy(sol, gamma, cfg.domain.rho0);
    r.d_H = same ? 0.0 : hausdorff_distance(d0, dt).distance;
    r.epsilon = epsilon_discrepancy(c0, ct, cfg.domain.rho0);
    r.energy_12 = energy_in_difference(sol0, d0, dt, cfg.max_depth);
    r.energy_21 = energy_in_difference(sol, dt, d0, cfg.max_depth);
    r.residual = sol.residual;
    if (!(r.residual <= cfg.residual_tolerance)) {
      r.flagged = true;
      r.reason = "solver residual above tolerance";
    }
  } catch (const std::exception& e) {
    r.failed = true;
    r.reason = e.what();
  }
  return r;
}

}  // namespace

std::string to_string(ObstacleFamily family) {
  switch (family) {
    case ObstacleFamily::translation: return "translation";
    case ObstacleFamily::dilation: return "dilation";
    case ObstacleFamily::radial_mode: return "radial_mode";
  }
  return "unknown";
}

ObstacleFamily parse_obstacle_family(const std::string& name) {
  if (name == "translation") return ObstacleFamily::translation;
  if (name == "dilation") return ObstacleFamily::dilation;
  if (name == "radial_mode") return ObstacleFamily::radial_mode;
  fail(ErrorKind::config, "unknown obstacle family '" + name + "' (translation, dilation, radial_mode)");
}

std::string to_string(ModulusFamily family) { return family == ModulusFamily::loglog ? "loglog" : "log"; }

ModulusFamily parse_modulus_family(const std::string& name) {
  if (name == "loglog") return ModulusFamily::loglog;
  if (name == "log") return ModulusFamily::log;
  fail(ErrorKind::config, "unknown modulus family '" + name + "' (loglog, log)");
}

BoundaryCurve obstacle_at(const ExperimentConfig& cfg, double t) {
  const Point& c = cfg.obstacle_center;
  switch (cfg.family) {
    case ObstacleFamily::translation: return BoundaryCurve::circle(c + t * cfg.direction.normalized(), cfg.obstacle_radius);
    case ObstacleFamily::dilation: return BoundaryCurve::circle(c, cfg.obstacle_radius * (1.0 + t));
    case ObstacleFamily::radial_mode:
      return t == 0.0 ? BoundaryCurve::circle(c, cfg.obstacle_radius)
                      : BoundaryCurve::radial_mode(c, cfg.obstacle_radius, t, cfg.mode);
  }
  fail(ErrorKind::config, "unknown obstacle family");
}

DomainSpec domain_at(const ExperimentConfig& cfg, double t) {
  DomainSpec d = cfg.domain;
  d.obstacle = obstacle_at(cfg, t);
  return d;
}

void validate_config(const ExperimentConfig& cfg) {
  require(!cfg.t_grid.empty(), ErrorKind::config, "t grid is empty");
  for (size_t i = 0; i < cfg.t_grid.size(); ++i) {
    require(cfg.t_grid[i] >= 0.0, ErrorKind::config, "t grid values must be nonnegative");
    require(i == 0 || cfg.t_grid[i] > cfg.t_grid[i - 1], ErrorKind::config, "t grid must be strictly increasing");
  }
  require(cfg.h_target > 0.0 && cfg.level >= 0, ErrorKind::config, "mesh needs h_target > 0 and level >= 0");
  require(cfg.jobs >= 1, ErrorKind::config, "jobs must be at least 1");
  require(cfg.data.kind == "bump" || cfg.data.kind == "random_modes", ErrorKind::config,
          "unknown data kind '" + cfg.data.kind + "' (bump, random_modes)");
  for (double t : cfg.t_grid) {
    const ValidationReport rep = validate_domain(domain_at(cfg, t));
    for (const auto& c : rep.checks) {
      std::ostringstream msg;
      msg << "obstacle at t = " << t << " fails hypothesis " << c.id << " (measured " << c.measured << ", required "
          << c.required << ")";
      require(c.passed, ErrorKind::config, msg.str());
    }
  }
}

DirichletData boundary_data(const ExperimentConfig& cfg, const P2Space& space) {
  const int n = space.dof_count();
  DirichletData g{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  std::vector<double> a, b;
  if (cfg.data.kind == "random_modes") {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> nd;
    for (int k = 1; k <= cfg.data.modes; ++k) {
      a.push_back(nd(rng) / k);
      b.push_back(nd(rng) / k);
    }
  }
  const BoundaryCurve& outer = cfg.domain.outer;
  const ArcInterval& arc = cfg.domain.gamma;
  std::vector<char> done(static_cast<size_t>(n), 0);
  for (const auto& e : space.boundary_edges()) {
    if (e.interface || e.tag != BoundaryTag::gamma) continue;
    for (int d : e.dofs) {
      if (done[d]) continue;
      done[d] = 1;
      const double s = outer.project(space.dof_point(d)).param;
      const double f = wrap(s - arc.begin) / arc.span();
      const double bump = cfg.data.amplitude * smooth_bump((f - 0.5) / 0.25);
      if (bump == 0.0) continue;
      double w = 1.0;
      for (size_t k = 0; k < a.size(); ++k) {
        const double th = 2.0 * std::numbers::pi * static_cast<double>(k + 1) * f;
        w += a[k] * std::cos(th) + b[k] * std::sin(th);
      }
      w *= bump;
      const Vec2 tau = outer.tangent(s);
      g.gx[d] = w * tau.x();
      g.gy[d] = w * tau.y();
    }
  }
  remove_flux(space, g);
  return g;
}

std::vector<StabilityRecord> run_stability_sweep(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const Mesh base = refine(triangulate(domain_at(cfg, 0.0), cfg.h_target), cfg.level);
  const int piece = find_piece(base, BoundaryTag::obstacle);
  auto space0 = std::make_shared<const P2Space>(std::make_shared<const Mesh>(base));
  const StokesSolution sol0 = solve_dirichlet(space0, boundary_data(cfg, *space0));
  auto gamma0 = std::make_shared<const BoundaryTraceSpace>(space0, std::set{BoundaryTag::gamma});
  const CauchyData c0 = measure_cauchy(sol0, gamma0, cfg.domain.rho0);
  const double g_norm = h_half_norm(*gamma0, c0.g, cfg.domain.rho0);
  gamma0->eigenvalues();  // decompose once before the workers share it

  std::vector<StabilityRecord> records(cfg.t_grid.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < records.size(); i = next++)
      records[i] = compute_record(cfg, base, piece, sol0, c0, g_norm, cfg.t_grid[i]);
  };
  const int workers = std::min<int>(cfg.jobs, static_cast<int>(records.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < workers; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return records;
}

ModulusFit fit_modulus(const std::vector<StabilityRecord>& records, ModulusFamily family, double rho0,
                       const FitOptions& options) {
  require(rho0 > 0.0, ErrorKind::invalid_argument, "fit needs rho0 > 0");
  const double limit = family == ModulusFamily::loglog ? std::exp(-1.0) : 1.0;
  std::vector<double> u, v, xs, ys;
  for (const auto& r : records) {
    if (r.failed || r.flagged || !(r.d_H > 0.0) || !(r.epsilon > 0.0) || !(r.g_norm > 0.0)) continue;
    const double x = r.epsilon / r.g_norm;
    if (!(x < limit)) continue;
    xs.push_back(x);
    ys.push_back(r.d_H / rho0);
    u.push_back(modulus_abscissa(family, x));
    v.push_back(std::log(r.d_H / rho0));
  }
  std::ostringstream msg;
  msg << "modulus fit needs at least 5 valid records with epsilon/|g| < " << limit << ", got " << u.size();
  require(u.size() >= 5, ErrorKind::invalid_argument, msg.str());
  ModulusFit fit;
  fit.family = family;
  fit.points = static_cast<int>(u.size());
  const Line line = least_squares(u, v);
  fit.unconstrained_exponent = -line.b;
  fit.exponent = fit.unconstrained_exponent;
  double a = line.a;
  if (family == ModulusFamily::loglog) {
    fit.exponent = std::clamp(fit.unconstrained_exponent, options.beta_min, 1.0 - options.beta_min);
    fit.clamped = fit.exponent != fit.unconstrained_exponent;
    a = 0.0;
    for (size_t i = 0; i < u.size(); ++i) a += (v[i] + fit.exponent * u[i]) / static_cast<double>(u.size());
  }
  fit.C = std::exp(a);
  fit.r_squared = r_squared(u, v, a, -fit.exponent);
  fit.envelope = true;
  for (size_t i = 0; i < xs.size(); ++i) {
    ModulusFit unit = fit;
    unit.C = 1.0;
    fit.envelope_C = std::max(fit.envelope_C, ys[i] / evaluate_modulus(unit, xs[i]));
    fit.envelope = fit.envelope && ys[i] <= evaluate_modulus(fit, xs[i]) * (1.0 + 1e-12);
  }
  return fit;
}

double evaluate_modulus(const ModulusFit& fit, double t) {
  return fit.C * std::exp(-fit.exponent * modulus_abscissa(fit.family, t));
}

ContinuationReport continuation_consistency(const std::vector<StabilityRecord>& records, double zero_tolerance) {
  ContinuationReport rep;
  rep.zero_tolerance = zero_tolerance;
  std::vector<const StabilityRecord*> ok;
  for (const auto& r : records)
    if (!r.failed) ok.push_back(&r);
  for (const auto* r : ok) {
    const double g2 = r->g_norm * r->g_norm;
    rep.normalized_12.push_back(g2 > 0.0 ? r->energy_12 / g2 : 0.0);
    rep.normalized_21.push_back(g2 > 0.0 ? r->energy_21 / g2 : 0.0);
    if (r->d_H == 0.0)
      rep.vanishes_at_zero = rep.vanishes_at_zero && r->energy_12 <= zero_tolerance && r->energy_21 <= zero_tolerance;
  }
  std::vector<size_t> order(ok.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return ok[a]->epsilon < ok[b]->epsilon; });
  for (size_t k = 1; k < order.size(); ++k) {
    rep.monotone_12 = rep.monotone_12 && rep.normalized_12[order[k]] >= rep.normalized_12[order[k - 1]];
    rep.monotone_21 = rep.monotone_21 && rep.normalized_21[order[k]] >= rep.normalized_21[order[k - 1]];
  }
  return rep;
}

void write_records_csv(std::ostream& out, const std::vector<StabilityRecord>& records) {
  out << "t,d_H,epsilon,energy_12,energy_21,F,level\n";
  char buf[512];
  for (const auto& r : records) {
    if (r.failed) continue;
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", r.t, r.d_H, r.epsilon, r.energy_12,
                  r.energy_21, r.F, r.level);
    out << buf;
  }
}

void write_records_csv(const std::filesystem::path& path, const std::vector<StabilityRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
  write_records_csv(out, records);
}

std::vector<StabilityRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  require(line.rfind("t,d_H,epsilon,energy_12,energy_21,F,level", 0) == 0, ErrorKind::io,
          path.string() + ": unexpected CSV header");
  std::vector<StabilityRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    StabilityRecord r;
    char comma;
    std::istringstream s(line);
    s >> r.t >> comma >> r.d_H >> comma >> r.epsilon >> comma >> r.energy_12 >> comma >> r.energy_21 >> comma >> r.F >>
        comma >> r.level;
    require(!s.fail(), ErrorKind::io, path.string() + ":" + std::to_string(lineno) + ": malformed record");
    out.push_back(r);
  }
  return out;
}

std::string fit_summary(const std::vector<ModulusFit>& fits, const ContinuationReport& continuation) {
  nlohmann::ordered_json j;
  for (const auto& f : fits) {
    nlohmann::ordered_json e;
    e["C"] = f.C;
    e[f.family == ModulusFamily::loglog ? "beta" : "gamma"] = f.exponent;
    e["unconstrained_exponent"] = f.unconstrained_exponent;
    e["clamped"] = f.clamped;
    e["r_squared"] = f.r_squared;
    e["points"] = f.points;
    e["envelope"] = f.envelope;
    e["envelope_C"] = f.envelope_C;
    j["fits"][to_string(f.family)] = e;
  }
  j["continuation"] = {{"monotone_12", continuation.monotone_12},
                       {"monotone_21", continuation.monotone_21},
                       {"vanishes_at_zero", continuation.vanishes_at_zero},
                       {"normalized_12", continuation.normalized_12},
                       {"normalized_21", continuation.normalized_21}};
  return j.dump(2) + "\n";
}

void write_plot_data(const std::filesystem::path& path, const std::vector<StabilityRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
  char buf[128];
  for (const auto& r : records) {
    if (r.failed || !(r.g_norm > 0.0)) continue;
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", r.epsilon / r.g_norm, r.d_H);
    out << buf;
  }
}

}  // namespace stokeslab
