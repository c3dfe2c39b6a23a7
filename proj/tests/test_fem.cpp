#include "stokeslab/error.hpp"
#include "stokeslab/fem.hpp"
#include "stokeslab/quadrature.hpp"

#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>

using namespace stokeslab;

namespace {

constexpr double pi = std::numbers::pi;

std::shared_ptr<const P2Space> space_of(Mesh m) {
  return std::make_shared<const P2Space>(std::make_shared<const Mesh>(std::move(m)));
}

Mesh channel(double h) {
  return triangulate(rectangle_domain({0, 0}, {2, 1}, {BoundaryTag::gamma, BoundaryTag::box, BoundaryTag::box, BoundaryTag::box}), h);
}

Mesh unit_square(double h, std::array<BoundaryTag, 4> tags = {BoundaryTag::box, BoundaryTag::box, BoundaryTag::box, BoundaryTag::box}) {
  return triangulate(rectangle_domain({0, 0}, {1, 1}, tags), h);
}

DomainSpec annulus() {
  DomainSpec d{BoundaryCurve::circle({0, 0}, 1.0), BoundaryCurve::circle({0, 0}, 0.3), ArcInterval{0.0, 0.5}, 0.25, 0.5, 3.0, 20.0, 1.0};
  return d;
}

// Manufactured solution on the unit square with zero boundary velocity.
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

}  // namespace

TEST(Quadrature, TriangleRulesIntegrateMonomials) {
  // Reference triangle (0,0),(1,0),(0,1): integral x^a y^b = a! b! / (a+b+2)!
  auto exact = [](int a, int b) { return std::tgamma(a + 1.0) * std::tgamma(b + 1.0) / std::tgamma(a + b + 3.0); };
  for (int degree : {2, 4, 6, 9, 14}) {
    const auto& r = triangle_rule(degree);
    double wsum = 0.0;
    for (double w : r.w) wsum += w;
    EXPECT_NEAR(wsum, 1.0, 1e-12);
    for (int a = 0; a <= degree; ++a)
      for (int b = 0; a + b <= degree; ++b) {
        double s = 0.0;
        for (size_t k = 0; k < r.w.size(); ++k) s += 0.5 * r.w[k] * std::pow(r.bary[k][1], a) * std::pow(r.bary[k][2], b);
        EXPECT_NEAR(s, exact(a, b), 1e-13) << "degree " << degree << " monomial " << a << "," << b;
      }
  }
}

TEST(Quadrature, GaussLegendre) {
  const auto& g = gauss_legendre(7);
  for (int k = 0; k <= 13; ++k) {
    double s = 0.0;
    for (size_t i = 0; i < g.x.size(); ++i) s += g.w[i] * std::pow(g.x[i], k);
    EXPECT_NEAR(s, 1.0 / (k + 1), 1e-14);
  }
}

TEST(P2Space, DofCountsAndOperators) {
  const auto space = space_of(unit_square(0.3));
  const Mesh& m = space->mesh();
  EXPECT_EQ(space->dof_count(), m.node_count() + m.distinct_edge_count());
  const SparseMatrix M = space->mass();
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(space->dof_count());
  EXPECT_NEAR(one.dot(M * one), 1.0, 1e-13);
  const Eigen::VectorXd x = space->interpolate([](const Point& p) { return p.x() * p.x() + 2 * p.y(); });
  // integral |grad|^2 = integral 4x^2 + 4 = 4/3 + 4
  EXPECT_NEAR(x.dot(space->stiffness() * x), 4.0 / 3.0 + 4.0, 1e-12);
  EXPECT_NEAR(space->p1_integrals().sum(), 1.0, 1e-14);
  const SparseMatrix B = assemble_divergence(*space);
  EXPECT_EQ(B.rows(), space->vertex_count());
  EXPECT_EQ(B.cols(), 2 * space->dof_count());
}

TEST(Stokes, PoiseuilleIsReproducedExactly) {
  // u = (y(1-y), 0), p = -2x + 2 solves the homogeneous problem.
  for (double h : {0.25, 0.17}) {
    const auto space = space_of(channel(h));
    const auto g = interpolate_dirichlet(*space, [](const Point& x) { return Vec2(x.y() * (1 - x.y()), 0.0); });
    const auto sol = solve_dirichlet(space, g);
    const auto err = solution_errors(
        sol, [](const Point& x) { return Vec2(x.y() * (1 - x.y()), 0.0); },
        [](const Point& x) {
          Eigen::Matrix2d G = Eigen::Matrix2d::Zero();
          G(0, 1) = 1 - 2 * x.y();
          return G;
        },
        [](const Point& x) { return -2 * x.x() + 2; });
    EXPECT_LT(err.velocity_l2, 1e-10);
    EXPECT_LT(err.velocity_h1_semi, 1e-10);
    EXPECT_LT(err.pressure_l2, 1e-10);
    EXPECT_LT(sol.residual, 1e-10);
    EXPECT_NEAR(sol.pressure_mean, 0.0, 1e-12);
    EXPECT_LT(sol.divergence, 1e-12);
  }
}

TEST(Stokes, ZeroDataGivesZeroSolution) {
  const auto space = space_of(triangulate(annulus(), 0.2));
  const auto sol = solve_dirichlet(space, zero_dirichlet(*space));
  EXPECT_EQ(sol.ux.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(sol.uy.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(sol.p.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Stokes, ManufacturedConvergenceOrders) {
  Mesh m = unit_square(0.25);
  std::vector<double> hs, eu, eg, ep;
  for (int level = 0; level < 4; ++level) {
    if (level > 0) m = refine(m);
    const auto space = space_of(m);
    const auto sol = solve_dirichlet(space, zero_dirichlet(*space), {mf_f});
    const auto err = solution_errors(sol, mf_u, mf_grad, mf_p);
    hs.push_back(m.h_max());
    eu.push_back(err.velocity_l2);
    eg.push_back(err.velocity_h1_semi);
    ep.push_back(err.pressure_l2);
  }
  for (int k = 1; k < 4; ++k) {
    const double r = std::log(hs[k - 1] / hs[k]);
    EXPECT_GE(std::log(eu[k - 1] / eu[k]) / r, 2.8) << "L2 velocity, level " << k;
    EXPECT_GE(std::log(eg[k - 1] / eg[k]) / r, 1.8) << "H1 velocity, level " << k;
    EXPECT_GE(std::log(ep[k - 1] / ep[k]) / r, 1.8) << "L2 pressure, level " << k;
  }
}

TEST(Stokes, LinearInData) {
  const auto space = space_of(triangulate(annulus(), 0.15));
  auto tangential = [](double k) {
    return [k](const Point& x) {
      const double r = x.norm();
      return r > 0.65 ? Vec2(std::cos(k * std::atan2(x.y(), x.x())) * Vec2(-x.y(), x.x())) : Vec2::Zero();
    };
  };
  const auto g1 = interpolate_dirichlet(*space, tangential(1.0));
  const auto g2 = interpolate_dirichlet(*space, tangential(2.0));
  DirichletData mix{2.0 * g1.gx - 3.0 * g2.gx, 2.0 * g1.gy - 3.0 * g2.gy};
  const auto s1 = solve_dirichlet(space, g1);
  const auto s2 = solve_dirichlet(space, g2);
  const auto s = solve_dirichlet(space, mix);
  const double scale = s.velocity_vector().cwiseAbs().maxCoeff();
  EXPECT_LT((s.velocity_vector() - 2.0 * s1.velocity_vector() + 3.0 * s2.velocity_vector()).cwiseAbs().maxCoeff(),
            1e-10 * scale);
  EXPECT_LT((s.p - 2.0 * s1.p + 3.0 * s2.p).cwiseAbs().maxCoeff(), 1e-9 * s.p.cwiseAbs().maxCoeff());
}

TEST(Stokes, RotationCovariance) {
  // Rotating the mesh and the data by an angle rotates the velocity and keeps
  // the pressure.
  const Mesh base = unit_square(0.2);
  const Eigen::Rotation2Dd rot(0.7);
  Mesh turned = base;
  for (auto& x : turned.nodes) x = rot * x;
  auto data = [](const Point& x) { return Vec2(std::sin(3 * x.y()) + x.x(), std::cos(2 * x.x()) - x.y()); };
  const auto sa = space_of(base);
  const auto sb = space_of(turned);
  auto ga = interpolate_dirichlet(*sa, data);
  auto gb = interpolate_dirichlet(*sb, [&](const Point& x) { return Vec2(rot * data(rot.inverse() * x)); });
  StokesOptions opt;
  opt.flux_projection_tolerance = 1.0;
  const auto a = solve_dirichlet(sa, ga, {}, opt);
  const auto b = solve_dirichlet(sb, gb, {}, opt);
  double du = 0.0;
  for (int i = 0; i < sa->dof_count(); ++i) {
    const Vec2 va = rot * Vec2(a.ux[i], a.uy[i]);
    du = std::max(du, (va - Vec2(b.ux[i], b.uy[i])).norm());
  }
  EXPECT_LT(du, 1e-10);
  EXPECT_LT((a.p - b.p).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Stokes, FluxRejectionAndProjection) {
  const auto space = space_of(triangulate(annulus(), 0.2));
  // Radial outflow on the outer circle: flux 2 pi.
  const auto radial = interpolate_dirichlet(*space, [](const Point& x) { return x.norm() > 0.65 ? Vec2(x) : Vec2::Zero(); });
  try {
    solve_dirichlet(space, radial);
    FAIL() << "expected rejection";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
    EXPECT_NE(std::string(e.what()).find("flux"), std::string::npos);
  }
  // A tiny flux perturbation is projected away.
  auto g = interpolate_dirichlet(*space, [](const Point& x) { return x.norm() > 0.65 ? Vec2(-x.y(), x.x()) : Vec2::Zero(); });
  for (int i = 0; i < g.gx.size(); ++i) g.gx[i] += 1e-11 * g.gx[i] * std::abs(g.gx[i]);
  const FluxMeasure before = boundary_flux(*space, g);
  const auto sol = solve_dirichlet(space, g);
  EXPECT_NEAR(sol.flux_removed, before.flux, 1e-22);
  DirichletData out{sol.ux, sol.uy};
  EXPECT_LT(std::abs(boundary_flux(*space, out).flux), 1e-15);
}

TEST(Stokes, ObstacleNoSlipIsImposed) {
  const auto space = space_of(triangulate(annulus(), 0.2));
  const auto g = interpolate_dirichlet(*space, [](const Point& x) { return Vec2(-x.y(), x.x()); });
  const auto sol = solve_dirichlet(space, g);
  for (int d : space->dofs_on({BoundaryTag::obstacle})) {
    EXPECT_EQ(sol.ux[d], 0.0);
    EXPECT_EQ(sol.uy[d], 0.0);
  }
}

TEST(Leray, RandomFieldsSplitOrthogonally) {
  const auto space = space_of(triangulate(annulus(), 0.15));
  const LerayProjector proj(space);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  double worst_res = 0.0, worst_orth = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd v(2 * space->dof_count());
    for (int i = 0; i < v.size(); ++i) v[i] = nd(rng);
    const auto r = proj.project(v);
    worst_res = std::max(worst_res, r.residual);
    worst_orth = std::max(worst_orth, r.orthogonality);
    EXPECT_LT(r.divergence, 1e-10);
  }
  EXPECT_LT(worst_res, 1e-10);
  EXPECT_LT(worst_orth, 1e-10);
}

TEST(Leray, GradientOfLinearPotentialIsExact) {
  const auto space = space_of(triangulate(annulus(), 0.2));
  Eigen::VectorXd v(2 * space->dof_count());
  v << Eigen::VectorXd::Constant(space->dof_count(), 0.3), Eigen::VectorXd::Constant(space->dof_count(), -1.1);
  const auto r = leray_project(space, v);
  EXPECT_LT(r.h_part.cwiseAbs().maxCoeff(), 1e-11);
}

TEST(Leray, GradientOfQuadraticDecaysWithH) {
  Mesh m = triangulate(annulus(), 0.2);
  std::vector<double> norms;
  for (int level = 0; level < 3; ++level) {
    if (level > 0) m = refine(m);
    const auto space = space_of(m);
    Eigen::VectorXd v(2 * space->dof_count());
    for (int i = 0; i < space->dof_count(); ++i) {
      v[i] = 2 * space->dof_point(i).x();
      v[space->dof_count() + i] = 2 * space->dof_point(i).y();
    }
    const auto r = leray_project(space, v);
    const SparseMatrix M = assemble_vector_mass(*space);
    norms.push_back(std::sqrt(r.h_part.dot(M * r.h_part) / v.dot(M * v)));
  }
  for (int k = 1; k < 3; ++k) EXPECT_LT(norms[k], 0.55 * norms[k - 1]) << norms[k - 1] << " -> " << norms[k];
}

TEST(Poincare, ClampedSquareMatchesQuarterWave) {
  // Clamped on x = 0, natural elsewhere: lambda1 = pi^2 / 4.
  Mesh m = unit_square(0.25, {BoundaryTag::box, BoundaryTag::box, BoundaryTag::box, BoundaryTag::gamma});
  double prev = 0.0;
  for (int level = 0; level <= 3; ++level) {
    if (level > 0) m = refine(m);
    const P2Space space(std::make_shared<const Mesh>(m));
    const auto r = poincare_constant(space, {BoundaryTag::gamma}, 0.5);
    if (level > 0) EXPECT_LE(r.lambda1, prev * (1 + 1e-12));
    prev = r.lambda1;
    EXPECT_NEAR(r.constant, 1.0 / (0.5 * std::sqrt(r.lambda1)), 1e-14);
    if (level == 3) EXPECT_NEAR(r.lambda1, pi * pi / 4, 0.02 * pi * pi / 4);
  }
}

TEST(Poincare, SubspaceIterationMatchesDenseOracle) {
  const P2Space space(std::make_shared<const Mesh>(triangulate(annulus(), 0.25)));
  const auto r = poincare_constant(space, {BoundaryTag::obstacle});
  const double dense = poincare_lambda_dense(space, {BoundaryTag::obstacle});
  EXPECT_NEAR(r.lambda1, dense, 1e-8 * dense);
}

TEST(Poincare, EmptyClampedSetIsRejected) {
  const P2Space space(std::make_shared<const Mesh>(unit_square(0.3)));
  EXPECT_THROW(poincare_constant(space, {}), Error);
  EXPECT_THROW(poincare_constant(space, {BoundaryTag::obstacle}), Error);
}
