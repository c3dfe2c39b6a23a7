// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include "stokeslab/continuation.hpp"
#include "stokeslab/experiments.hpp"
#include "stokeslab/extension.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

using namespace stokeslab;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
  bool pass;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::shared_ptr<const P2Space> space_of(Mesh m) {
  return std::make_shared<const P2Space>(std::make_shared<const Mesh>(std::move(m)));
}

Vec2 poiseuille(const Point& x) { return {x.y() * (1 - x.y()), 0.0}; }

Mesh channel_mesh(double h) {
  return triangulate(rectangle_domain({0, 0}, {2, 1}, {BoundaryTag::gamma, BoundaryTag::box, BoundaryTag::box, BoundaryTag::box}), h);
}

DomainSpec annulus() {
  return {BoundaryCurve::circle({0, 0}, 1.0), BoundaryCurve::circle({0, 0}, 0.3), ArcInterval{0.0, 0.5}, 0.25, 0.5, 3.0, 20.0, 1.0};
}

DirichletData random_tangential(const P2Space& space, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::array<double, 8> c{};
  for (auto& v : c) v = nd(rng);
  return interpolate_dirichlet(space, [c](const Point& x) {
    if (x.norm() < 0.65) return Vec2(0, 0);
    const double th = std::atan2(x.y(), x.x());
    double a = 0.0;
    for (int k = 1; k <= 4; ++k) a += c[2 * k - 2] * std::cos(k * th) + c[2 * k - 1] * std::sin(k * th);
    return Vec2(a * Vec2(-x.y(), x.x()));
  });
}

ExperimentConfig translation_sweep_config(int level) {
  ExperimentConfig c;
  c.domain = {BoundaryCurve::circle({0, 0}, 1.0), std::nullopt, ArcInterval{0.05, 0.45}, 0.25, 0.5, 3.0, 20.0, 1.0};
  c.obstacle_radius = 0.25;
  c.direction = {0.0, 1.0};
  c.t_grid = {0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08};
  c.level = level;
  c.jobs = 1;
  return c;
}

Outcome poiseuille_exactness() {
  const Stopwatch sw;
  double worst = 0.0;
  for (double h : {0.25, 0.17, 0.11}) {
    const auto space = space_of(channel_mesh(h));
    const auto sol = solve_dirichlet(space, interpolate_dirichlet(*space, poiseuille));
    double err = 0.0, scale = 0.0;
    for (int d = 0; d < space->dof_count(); ++d) {
      const Vec2 exact = poiseuille(space->dof_point(d));
      err = std::max(err, (Vec2(sol.ux[d], sol.uy[d]) - exact).norm());
      scale = std::max(scale, exact.norm());
    }
    worst = std::max(worst, err / scale);
  }
  const double t = sw.seconds();
  return {worst <= 1e-10 && t < 5.0, fmt("max relative velocity error %.2e over 3 meshes (<= 1e-10), %.2f s (< 5 s)", worst, t)};
}

// Divergence-free manufactured field with a sin cos pressure.
Vec2 mf_u(const Point& x) {
  const double s = std::sin(pi * x.x()), t = std::sin(pi * x.y());
  return {pi * s * s * std::sin(2 * pi * x.y()), -pi * std::sin(2 * pi * x.x()) * t * t};
}
Eigen::Matrix2d mf_grad(const Point& x) {
  const double sx = std::sin(pi * x.x()), sy = std::sin(pi * x.y());
  Eigen::Matrix2d g;
  g(0, 0) = pi * pi * std::sin(2 * pi * x.x()) * std::sin(2 * pi * x.y());
  g(0, 1) = 2 * pi * pi * sx * sx * std::cos(2 * pi * x.y());
  g(1, 0) = -2 * pi * pi * std::cos(2 * pi * x.x()) * sy * sy;
  g(1, 1) = -pi * pi * std::sin(2 * pi * x.x()) * std::sin(2 * pi * x.y());
  return g;
}
double mf_p(const Point& x) { return std::sin(pi * x.x()) * std::cos(pi * x.y()); }
Vec2 mf_f(const Point& x) {
  const double sx = std::sin(pi * x.x()), sy = std::sin(pi * x.y());
  const double lap1 = pi * std::sin(2 * pi * x.y()) * (2 * pi * pi * std::cos(2 * pi * x.x()) - 4 * pi * pi * sx * sx);
  const double lap2 = -pi * std::sin(2 * pi * x.x()) * (2 * pi * pi * std::cos(2 * pi * x.y()) - 4 * pi * pi * sy * sy);
  const Vec2 gp(pi * std::cos(pi * x.x()) * std::cos(pi * x.y()), -pi * sx * sy);
  return Vec2(lap1, lap2) - gp;
}

Outcome manufactured_convergence() {
  const Stopwatch sw;
  Mesh m = triangulate(rectangle_domain({0, 0}, {1, 1}, {BoundaryTag::box, BoundaryTag::box, BoundaryTag::box, BoundaryTag::box}), 0.25);
  std::vector<double> hs, eg, ep;
  for (int level = 0; level < 4; ++level) {
    if (level > 0) m = refine(m);
    const auto space = space_of(m);
    const auto sol = solve_dirichlet(space, zero_dirichlet(*space), {mf_f});
    const auto err = solution_errors(sol, mf_u, mf_grad, mf_p);
    hs.push_back(m.h_max());
    eg.push_back(err.velocity_h1_semi);
    ep.push_back(err.pressure_l2);
  }
  double min_u = 1e9, min_p = 1e9;
  for (int k = 1; k < 4; ++k) {
    const double r = std::log(hs[k - 1] / hs[k]);
    min_u = std::min(min_u, std::log(eg[k - 1] / eg[k]) / r);
    min_p = std::min(min_p, std::log(ep[k - 1] / ep[k]) / r);
  }
  const double t = sw.seconds();
  return {min_u >= 1.8 && min_p >= 1.8 && t < 120.0,
          fmt("min observed orders H1 %.3f, pressure %.3f (>= 1.8), %.1f s (< 120 s)", min_u, min_p, t)};
}

Outcome poincare_probe() {
  Mesh m = triangulate(rectangle_domain({0, 0}, {1, 1}, {BoundaryTag::box, BoundaryTag::box, BoundaryTag::box, BoundaryTag::gamma}), 0.25);
  m = refine(m, 3);
  const P2Space space(std::make_shared<const Mesh>(m));
  const double lambda = poincare_constant(space, {BoundaryTag::gamma}).lambda1;
  const double rel = std::abs(lambda - pi * pi / 4) / (pi * pi / 4);
  return {rel <= 0.02, fmt("lambda1 %.6f vs pi^2/4 = %.6f, relative %.2e (<= 2%%)", lambda, pi * pi / 4, rel)};
}

Outcome leray_decomposition() {
  const auto space = space_of(triangulate(annulus(), 0.15));
  const LerayProjector proj(space);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  double res = 0.0, orth = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd v(2 * space->dof_count());
    for (int i = 0; i < v.size(); ++i) v[i] = nd(rng);
    const auto r = proj.project(v);
    res = std::max(res, r.residual);
    orth = std::max(orth, r.orthogonality);
  }
  return {res <= 1e-10 && orth <= 1e-10, fmt("100 random fields: max residual %.2e, max orthogonality %.2e (<= 1e-10)", res, orth)};
}

double brute_directed(const std::vector<Point>& from, const std::vector<Point>& poly) {
  double d = 0.0;
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < poly.size(); ++k) best = std::min(best, point_segment_distance(p, poly[k], poly[(k + 1) % poly.size()]));
    d = std::max(d, best);
  }
  return d;
}

std::vector<Point> random_convex_polygon(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Point c(u(rng) - 0.5, u(rng) - 0.5);
  const double r = 0.5 + u(rng);
  std::vector<double> angles(8);
  for (auto& a : angles) a = 2.0 * pi * u(rng);
  std::sort(angles.begin(), angles.end());
  std::vector<Point> v;
  for (double a : angles) v.emplace_back(c + r * Point(std::cos(a), std::sin(a)));
  return v;
}

Outcome hausdorff_oracle() {
  std::mt19937_64 rng(2024);
  const int n = 4096;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto va = random_convex_polygon(rng), vb = random_convex_polygon(rng);
    const auto a = BoundaryCurve::polygon(va), b = BoundaryCurve::polygon(vb);
    auto pa = resample_by_arclength(a, n), pb = resample_by_arclength(b, n);
    pa.pop_back();
    pb.pop_back();
    const double oracle = std::max(brute_directed(pa, vb), brute_directed(pb, va));
    worst = std::max(worst, std::abs(hausdorff_distance(a, b, n).distance - oracle));
  }
  const double circles = hausdorff_distance(BoundaryCurve::circle({0, 0}, 1.0), BoundaryCurve::circle({0, 0}, 0.5)).distance;
  return {worst <= 1e-9 && std::abs(circles - 0.5) <= 1e-3,
          fmt("50 polygon pairs: max deviation %.2e (<= 1e-9); circles 1 vs 0.5: %.6f (0.5 +- 1e-3)", worst, circles)};
}

Outcome stress_trace_check() {
  const auto space = space_of(refine(channel_mesh(0.25), 2));
  const auto sol = solve_dirichlet(space, interpolate_dirichlet(*space, poiseuille));
  const BoundaryTraceSpace gamma(space, {BoundaryTag::gamma});
  const TraceField psi = stress_trace(sol, gamma);
  double err = 0.0;
  for (int i = 0; i < gamma.size(); ++i) {
    const Point x = space->dof_point(gamma.dofs()[i]);
    err = std::max(err, (psi.row(i).transpose() - Vec2(-1.0, -2 * x.x() + 2)).norm());
  }
  return {err <= 1e-8, fmt("max |psi - (-1, p(x))| on the bottom wall %.2e (<= 1e-8)", err)};
}

Outcome three_spheres() {
  const Point c(0.65, 0.0);
  std::vector<double> d2, d3;
  for (int level : {2, 3}) {
    const auto space = space_of(refine(triangulate(annulus(), 0.2), level));
    for (unsigned seed = 1; seed <= 20; ++seed) {
      const auto sol = solve_dirichlet(space, random_tangential(*space, seed));
      (level == 2 ? d2 : d3).push_back(three_spheres_probe(sol, c, 0.06, 0.12, 0.24).delta_hat);
    }
  }
  double var = 0.0;
  for (size_t i = 0; i < d2.size(); ++i) var = std::max(var, std::abs(d3[i] - d2[i]) / d2[i]);
  const double min_delta = std::min(summarize(d2).min, summarize(d3).min);

  const auto disk = space_of(triangulate(DomainSpec{BoundaryCurve::circle({0, 0}, 1.0), std::nullopt, ArcInterval{0.0, 0.5}, 0.25, 0.5, 3.0, 20.0, 1.0}, 0.15));
  const auto affine = solve_dirichlet(disk, interpolate_dirichlet(*disk, [](const Point& x) { return Vec2(x.y(), x.x()); }));
  const double half = three_spheres_probe(affine, {0, 0}, 0.1, 0.2, 0.4).delta_hat;
  return {min_delta >= 0.05 && var <= 0.2 && std::abs(half - 0.5) <= 1e-10,
          fmt("20 solutions: min delta %.4f (>= 0.05), max level 2->3 change %.2f%% (<= 20%%); constant gradient delta %.12f",
              min_delta, 100 * var, half)};
}

Outcome smallness() {
  const auto space = space_of(refine(triangulate(annulus(), 0.2)));
  const auto sol = solve_dirichlet(space, random_tangential(*space, 3));
  std::vector<Point> centers;
  for (int k = 0; k < 8; ++k) centers.push_back(0.65 * Vec2(std::cos(k * pi / 4), std::sin(k * pi / 4)));
  const auto rep = smallness_probe(sol, {0.01, 0.02, 0.04, 0.08, 0.16}, centers, 0.5);
  double min_r = std::numeric_limits<double>::infinity();
  for (const auto& s : rep.samples) min_r = std::min(min_r, s.R);
  const bool ok = !rep.samples.empty() && min_r > 0.0 && rep.fit.B > 0.0 && rep.fit.r_squared >= 0.8;
  return {ok, fmt("%zu samples, min R %.3e (> 0); B %.4f (> 0), R^2 %.4f (>= 0.8)", rep.samples.size(), min_r, rep.fit.B,
                  rep.fit.r_squared)};
}

Outcome stability_sweep(const std::vector<StabilityRecord>& rec, double seconds) {
  std::vector<const StabilityRecord*> moved;
  const StabilityRecord* control = nullptr;
  int failed = 0;
  for (const auto& r : rec) {
    if (r.failed || r.flagged) ++failed;
    if (r.t == 0.0) control = &r;
    else if (!r.failed) moved.push_back(&r);
  }
  std::sort(moved.begin(), moved.end(), [](auto a, auto b) { return a->d_H < b->d_H; });
  bool increasing = moved.size() == 8;
  for (size_t i = 1; i < moved.size(); ++i) increasing = increasing && moved[i]->epsilon > moved[i - 1]->epsilon;
  const double control_ratio = control ? control->epsilon / control->g_norm : 1.0;
  std::string fits = "fits skipped";
  bool fit_ok = false;
  try {
    const ModulusFit lf = fit_modulus(rec, ModulusFamily::log, 0.5);
    const ModulusFit ll = fit_modulus(rec, ModulusFamily::loglog, 0.5);
    fit_ok = lf.r_squared >= 0.9 && ll.exponent > 0.0 && ll.exponent < 1.0 && ll.envelope_C > 0.0 && std::isfinite(ll.envelope_C);
    fits = fmt("log fit R^2 %.4f (>= 0.9) gamma %.3f; loglog envelope C %.4f at beta %.2f (least squares beta %.3f%s)", lf.r_squared,
               lf.exponent, ll.envelope_C, ll.exponent, ll.unconstrained_exponent, ll.clamped ? ", clamped into (0,1)" : "");
  } catch (const std::exception& e) {
    fits = e.what();
  }
  const bool ok = failed == 0 && increasing && control_ratio <= 1e-10 && fit_ok && seconds < 600.0;
  return {ok, fmt("level 2, 8 points: eps strictly increasing in d_H: %s; t=0 eps/|g| %.1e (<= 1e-10); %s; %.1f s single-threaded (< 600 s)",
                  increasing ? "yes" : "no", control_ratio, fits.c_str(), seconds)};
}

Outcome continuation_energies(const std::vector<StabilityRecord>& rec) {
  bool mono = true;
  double zero = 0.0;
  for (size_t i = 0; i < rec.size(); ++i) {
    if (rec[i].t == 0.0) zero = std::max({zero, rec[i].energy_12, rec[i].energy_21});
    if (i > 0) mono = mono && rec[i].energy_12 >= rec[i - 1].energy_12 && rec[i].energy_21 >= rec[i - 1].energy_21;
  }
  const ContinuationReport rep = continuation_consistency(rec);
  const bool ok = mono && rep.monotone_12 && rep.monotone_21 && rep.vanishes_at_zero && zero <= 1e-10;
  return {ok, fmt("energy_12 and energy_21 nondecreasing in t: %s; at t=0 max %.1e (<= 1e-10)", mono ? "yes" : "no", zero)};
}

DomainSpec extension_channel() {
  const std::vector<Point> v{{0, 0}, {2, 0}, {2, 1}, {0, 1}};
  return {BoundaryCurve::polygon(v), std::nullopt, ArcInterval{0.0, 1.0 / 3.0}, 1.0 / 6.0, 0.5, 1.0, 20.0, 1.0};
}

Outcome extension_certificate() {
  const DomainSpec spec = extension_channel();
  const BoxGeometry box = build_box(spec);
  const ExtendedDomain coarse = mesh_extended_domain(spec, box, 0.2);
  const double zero = extend_cauchy_data(coarse, solve_dirichlet(coarse.inner, zero_dirichlet(*coarse.inner))).phi.phi_norm;
  std::vector<double> ratios;
  double identity = 0.0;
  for (int level = 1; level <= 3; ++level) {
    const ExtendedDomain ext = mesh_extended_domain(spec, box, 0.25, level);
    const auto r = extend_cauchy_data(ext, solve_dirichlet(ext.inner, interpolate_dirichlet(*ext.inner, poiseuille)));
    ratios.push_back(r.phi.bound_ratio);
    identity = std::max(identity, r.phi.interface_residual);
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  const double spread = *hi / *lo - 1.0;
  return {zero <= 1e-10 && *lo > 0.0 && spread <= 0.5 && identity <= 1e-9,
          fmt("zero data |Phi| %.1e (<= 1e-10); Poiseuille bound_ratio %.4f %.4f %.4f, spread %.1f%% (<= 50%%); identity residual %.1e (<= 1e-9)",
              zero, ratios[0], ratios[1], ratios[2], 100 * spread, identity)};
}

Outcome determinism() {
  ExperimentConfig c = translation_sweep_config(1);
  c.data.kind = "random_modes";
  c.seed = 42;
  auto csv = [](const ExperimentConfig& cfg) {
    std::ostringstream out;
    write_records_csv(out, run_stability_sweep(cfg));
    return out.str();
  };
  const std::string a = csv(c), b = csv(c);
  c.jobs = 4;
  const std::string d = csv(c);
  return {a == b && a == d, fmt("two single-threaded runs and a 4-worker run, seed 42: %s (%zu bytes)",
                                a == b && a == d ? "byte-identical" : "DIFFERENT", a.size())};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("criterion %2d %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "Poiseuille exactness", poiseuille_exactness);
  report(2, "manufactured convergence", manufactured_convergence);
  report(3, "Poincare probe", poincare_probe);
  report(4, "Leray decomposition", leray_decomposition);
  report(5, "Hausdorff oracle", hausdorff_oracle);
  report(6, "stress trace", stress_trace_check);
  report(7, "three-spheres probe", three_spheres);
  report(8, "propagation of smallness", smallness);

  std::vector<StabilityRecord> sweep;
  double seconds = 0.0;
  std::string sweep_error;
  try {
    const Stopwatch sw;
    sweep = run_stability_sweep(translation_sweep_config(2));
    seconds = sw.seconds();
  } catch (const std::exception& e) {
    sweep_error = e.what();
  }
  auto needs_sweep = [&](auto f) {
    return [&, f]() -> Outcome { return sweep_error.empty() ? f() : Outcome{false, "sweep failed: " + sweep_error}; };
  };
  report(9, "stability sweep", needs_sweep([&] { return stability_sweep(sweep, seconds); }));
  report(10, "continuation energies", needs_sweep([&] { return continuation_energies(sweep); }));
  report(11, "extension certificate", extension_certificate);
  report(12, "determinism", determinism);

  std::printf("%d of 12 criteria passed\n", 12 - failures);
  return failures == 0 ? 0 : 1;
}
