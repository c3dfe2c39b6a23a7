#include "stokeslab/extension.hpp"
#include "stokeslab/error.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace stokeslab;

namespace {

constexpr double pi = std::numbers::pi;

// [0,2] x [0,1] with Gamma the bottom wall and P0 = (1, 0).
DomainSpec channel() {
  const std::vector<Point> v{{0, 0}, {2, 0}, {2, 1}, {0, 1}};
  return {BoundaryCurve::polygon(v), std::nullopt, ArcInterval{0.0, 1.0 / 3.0}, 1.0 / 6.0, 0.5, 1.0, 20.0, 1.0};
}

DomainSpec disk() {
  return {BoundaryCurve::circle({0, 0}, 1.0), std::nullopt, ArcInterval{0.0, 0.5}, 0.25, 0.5, 3.0, 20.0, 1.0};
}

StokesSolution solve_on(const ExtendedDomain& ext, const VectorField& g) {
  return solve_dirichlet(ext.inner, interpolate_dirichlet(*ext.inner, g));
}

Vec2 poiseuille(const Point& x) { return {x.y() * (1 - x.y()), 0.0}; }

// Poiseuille plus a tangential bump on the bottom wall supported inside Gamma0.
VectorField bumped(double x0, double x1) {
  return [x0, x1](const Point& x) {
    Vec2 v = poiseuille(x);
    if (x.y() < 1e-12 && x.x() > x0 && x.x() < x1) v.x() += std::pow(std::sin(pi * (x.x() - x0) / (x1 - x0)), 2);
    return v;
  };
}

}  // namespace

TEST(BuildBox, FlatChannel) {
  const BoxGeometry box = build_box(channel());
  const double rho00 = 0.5 / std::sqrt(2.0);
  EXPECT_NEAR(box.rho00, rho00, 1e-15);
  EXPECT_NEAR(box.gamma0_length, 2 * rho00, 1e-9);
  EXPECT_NEAR((box.p_star - Point(1.0, -0.25 * rho00)).norm(), 0.0, 1e-12);
  const ExtendedDomain ext = mesh_extended_domain(channel(), box, 0.15);
  EXPECT_TRUE(check_mesh(ext.tilde->mesh()).passed());
  EXPECT_NEAR(ext.inner->mesh().area(), 2.0, 1e-12);
  EXPECT_NEAR(ext.minus->mesh().area(), 2 * rho00 * box.height, 1e-12);
  // E- lies below the wall.
  for (const auto& p : ext.minus->mesh().nodes) EXPECT_LE(p.y(), 1e-12);
}

TEST(BuildBox, CircleArclengthAndErrors) {
  const BoxGeometry box = build_box(disk());
  EXPECT_NEAR(box.gamma0_length / (2 * box.rho00), 1.0, 0.02);
  const ExtendedDomain ext = mesh_extended_domain(disk(), box, 0.1);
  EXPECT_TRUE(check_mesh(ext.tilde->mesh()).passed());
  EXPECT_NEAR(ext.inner->mesh().area() + ext.minus->mesh().area(), ext.tilde->mesh().area(), 1e-12);
  for (const auto& p : ext.minus->mesh().nodes) EXPECT_GE(p.norm(), 1.0 - 1e-9);

  EXPECT_THROW(build_box(disk(), 0.75), Error);  // P0 outside Gamma
  DomainSpec wide = disk();
  wide.rho0 = 4.0;  // Gamma0 would leave Gamma
  EXPECT_THROW(build_box(wide), Error);
}

TEST(Extension, ZeroDataGivesZeroCertificate) {
  const ExtendedDomain ext = mesh_extended_domain(channel(), build_box(channel()), 0.2);
  const auto u = solve_dirichlet(ext.inner, zero_dirichlet(*ext.inner));
  const ExtensionResult r = extend_cauchy_data(ext, u);
  EXPECT_EQ(r.velocity.u_minus.velocity_vector().norm(), 0.0);
  EXPECT_EQ(r.pressure.p.norm(), 0.0);
  EXPECT_EQ(r.pressure.x_l2, 0.0);
  EXPECT_LE(r.phi.phi_norm, 1e-10);
  EXPECT_EQ(r.phi.bound_ratio, 0.0);
}

TEST(Extension, TangentialBumpLift) {
  const BoxGeometry box = build_box(channel());
  const ExtendedDomain ext = mesh_extended_domain(channel(), box, 0.15, 1);
  const auto u = solve_on(ext, bumped(0.7, 1.3));
  const ExtensionResult r = extend_cauchy_data(ext, u);
  const auto& um = r.velocity.u_minus;
  EXPECT_LE(std::abs(r.velocity.compensated_flux), 1e-12);
  EXPECT_LE(um.divergence, 1e-10);
  // u- = g on Gamma0 at every shared dof.
  std::vector<int> from_inner(ext.tilde->dof_count(), -1);
  for (size_t i = 0; i < ext.inner_to_tilde.size(); ++i) from_inner[ext.inner_to_tilde[i]] = static_cast<int>(i);
  double err = 0.0;
  for (int d : ext.minus->dofs_on({BoundaryTag::gamma})) {
    const int i = from_inner[ext.minus_to_tilde[d]];
    err = std::max(err, std::hypot(um.ux[d] - u.ux[i], um.uy[d] - u.uy[i]));
  }
  EXPECT_LE(err, 1e-14);
  EXPECT_GT(r.velocity.kappa, 0.0);
  // p- vanishes on the boundary of E- and X- is weakly divergence free.
  for (int v = 0; v < ext.minus->vertex_count(); ++v)
    if (ext.minus->boundary_mask()[v]) EXPECT_EQ(r.pressure.p[v], 0.0);
  EXPECT_GT(r.pressure.x_l2, 0.0);
  EXPECT_LE(r.pressure.weak_divergence, 1e-9);
  EXPECT_LE(r.phi.interface_residual, 1e-9);
  EXPECT_GT(r.phi.part_norms[1], 0.0);
  EXPECT_GT(r.phi.part_norms[2], 0.0);
}

TEST(Extension, NormalFluxIsCompensated) {
  const ExtendedDomain ext = mesh_extended_domain(channel(), build_box(channel()), 0.15);
  // Affine Stokes flow crossing the wall: g = (0, x) on Gamma.
  const auto u = solve_on(ext, [](const Point& x) { return Vec2(x.y(), x.x()); });
  const ExtensionResult r = extend_cauchy_data(ext, u);
  const double rho00 = ext.box.rho00;
  EXPECT_NEAR(r.velocity.compensated_flux, 2 * rho00, 1e-10);  // outflow of E- through the wall
  EXPECT_LE(r.velocity.u_minus.divergence, 1e-10);
  EXPECT_LE(boundary_flux(*ext.minus, DirichletData{r.velocity.u_minus.ux, r.velocity.u_minus.uy}).relative(), 1e-12);
  EXPECT_LE(r.phi.interface_residual, 1e-9);
}

TEST(Extension, PhiOneIsLinearInPsi) {
  const ExtendedDomain ext = mesh_extended_domain(channel(), build_box(channel()), 0.2);
  const auto u = solve_on(ext, bumped(0.7, 1.3));
  auto gamma = std::make_shared<const BoundaryTraceSpace>(ext.inner, std::set{BoundaryTag::gamma});
  CauchyData c = measure_cauchy(u, gamma, ext.rho0);
  const VelocityExtension ve = extend_velocity(ext, u);
  const PressureCorrection pc = pressure_correction(ve.u_minus);
  const PhiCertificate a = build_phi(ext, u, c, ve, pc);
  c.psi *= -2.5;
  const PhiCertificate b = build_phi(ext, u, c, ve, pc);
  EXPECT_LE((b.phi1 + 2.5 * a.phi1).norm(), 1e-14 * a.phi1.norm());
  EXPECT_EQ((b.phi2 - a.phi2).norm(), 0.0);
  EXPECT_NEAR(b.part_norms[0], 2.5 * a.part_norms[0], 1e-12 * b.part_norms[0]);
}

TEST(Extension, PoiseuilleBoundRatioIsStable) {
  const BoxGeometry box = build_box(channel());
  std::vector<double> ratios, xnorms;
  for (int level = 1; level <= 3; ++level) {
    const ExtendedDomain ext = mesh_extended_domain(channel(), box, 0.25, level);
    const ExtensionResult r = extend_cauchy_data(ext, solve_on(ext, poiseuille));
    EXPECT_LE(r.phi.interface_residual, 1e-9);
    EXPECT_GT(r.phi.bound_ratio, 0.0);
    ratios.push_back(r.phi.bound_ratio);
    const ExtensionResult s = extend_cauchy_data(ext, solve_on(ext, bumped(0.7, 1.3)));
    xnorms.push_back(s.pressure.x_l2);
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  EXPECT_LE(*hi / *lo - 1.0, 0.5);
  for (size_t k = 1; k < xnorms.size(); ++k) EXPECT_NEAR(xnorms[k], xnorms[k - 1], 0.2 * xnorms[k - 1]);
}

TEST(InteriorSmallness, TopWallModeFamily) {
  // Shallow channel [0,4] x [0,1/2]; top-wall modes symmetric about P0 = (2, 0).
  const std::vector<Point> v{{0, 0}, {4, 0}, {4, 0.5}, {0, 0.5}};
  const DomainSpec spec{BoundaryCurve::polygon(v), std::nullopt, ArcInterval{0.0, 4.0 / 9.0}, 2.0 / 9.0, 0.5, 1.0, 20.0, 1.0};
  const BoxGeometry box = build_box(spec);
  const ExtendedDomain ext = mesh_extended_domain(spec, box, 0.1, 1);
  // Fixed k = 15 mode (same sign as k = 1 at P0) plus a log-spaced multiple of the k = 1 mode, so |psi| spans two decades.
  auto mode = [](int k, double a) {
    return [k, a](const Point& x) { return x.y() > 0.5 - 1e-12 ? Vec2(a * std::sin(k * pi * x.x() / 4), 0.0) : Vec2(0, 0); };
  };
  std::vector<StokesSolution> family;
  for (int j = 0; j < 8; ++j) {
    const double c = std::pow(10.0, -2.0 + 2.5 * j / 7.0);
    family.push_back(solve_on(ext, [&](const Point& x) -> Vec2 { return mode(15, -1.0)(x) + mode(1, c)(x); }));
  }
  const InteriorSmallnessFit fit = interior_smallness_estimate(family, box, 0.5);
  EXPECT_GT(fit.tau, 0.0);
  EXPECT_LT(fit.tau, 1.0);
  EXPECT_GE(fit.r_squared, 0.8);

  // Scaling a member scales the measured sup.
  StokesSolution scaled = family[2];
  scaled.ux *= 3.0;
  scaled.uy *= 3.0;
  EXPECT_NEAR(ball_sup(scaled, box.p_star, 0.375 * box.rho00), 3.0 * fit.samples[2].sup, 1e-12 * fit.samples[2].sup);
  const auto zero = solve_dirichlet(ext.inner, zero_dirichlet(*ext.inner));
  EXPECT_EQ(ball_sup(zero, box.p_star, 0.375 * box.rho00), 0.0);

  family.resize(4);
  EXPECT_THROW(interior_smallness_estimate(family, box, 0.5), Error);
  std::vector<StokesSolution> bad(5, solve_on(ext, poiseuille));
  bad[0] = solve_on(ext, [](const Point& x) { return Vec2(x.y(), x.x()); });
  EXPECT_THROW(interior_smallness_estimate(bad, box, 0.5), Error);
}

TEST(Extension, DumpFiles) {
  const ExtendedDomain ext = mesh_extended_domain(channel(), build_box(channel()), 0.25);
  const ExtensionResult r = extend_cauchy_data(ext, solve_on(ext, poiseuille));
  const auto dir = std::filesystem::temp_directory_path() / "stokeslab_ext";
  write_extension(dir, ext, r);
  for (const char* f : {"e_minus.mesh", "e_tilde.mesh", "e_minus_dofs.txt", "e_tilde_phi.txt", "certificate.txt"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  EXPECT_EQ(read_mesh(dir / "e_minus.mesh").triangle_count(), ext.minus->mesh().triangle_count());
  std::filesystem::remove_all(dir);
}
