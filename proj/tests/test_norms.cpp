#include "stokeslab/error.hpp"
#include "stokeslab/norms.hpp"

#include <gtest/gtest.h>

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

DomainSpec disk(std::optional<BoundaryCurve> obstacle = std::nullopt) {
  return {BoundaryCurve::circle({0, 0}, 1.0), obstacle, ArcInterval{0.0, 0.5}, 0.25, 0.5, 3.0, 20.0, 1.0};
}

TraceField random_trace(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  TraceField g(n, 2);
  for (int i = 0; i < n; ++i) g.row(i) << nd(rng), nd(rng);
  return g;
}

// Dense oracle: |g|^2 = rho0^{-1} sum over components of
// (M^{1/2} g)^T (M^{-1/2} (M + rho0^2 K) M^{-1/2})^{s} (M^{1/2} g).
double dense_oracle(const BoundaryTraceSpace& t, const TraceField& g, double rho0, double s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ms(t.mass());
  const Eigen::MatrixXd half = ms.operatorSqrt();
  const Eigen::MatrixXd inv_half = ms.operatorInverseSqrt();
  const Eigen::MatrixXd a = inv_half * (t.mass() + rho0 * rho0 * t.stiffness()) * inv_half;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> as(a);
  const Eigen::MatrixXd power = as.eigenvectors() * as.eigenvalues().array().pow(s).matrix().asDiagonal() *
                                as.eigenvectors().transpose();
  const Eigen::MatrixXd y = half * g;
  return std::sqrt((y.transpose() * power * y).trace() / rho0);
}

}  // namespace

TEST(BoundaryNorms, ConstantOnFlatSegment) {
  const auto space = space_of(channel(0.2));
  const BoundaryTraceSpace gamma(space, {BoundaryTag::gamma});
  EXPECT_NEAR(gamma.length(), 2.0, 1e-14);
  TraceField g(gamma.size(), 2);
  g.col(0).setOnes();
  g.col(1).setZero();
  EXPECT_NEAR(boundary_l2_norm(gamma, g, 1.0), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(h_half_norm(gamma, g, 1.0), std::sqrt(2.0), 1e-10);
  EXPECT_NEAR(frequency_ratio(gamma, g, 1.0), 1.0, 1e-10);
  EXPECT_NEAR(h_minus_half_norm(gamma, g, 1.0), std::sqrt(2.0), 1e-10);
}

TEST(BoundaryNorms, ZeroFieldGivesZero) {
  const auto space = space_of(channel(0.25));
  const BoundaryTraceSpace gamma(space, {BoundaryTag::gamma});
  const TraceField z = TraceField::Zero(gamma.size(), 2);
  for (auto kind : {NormKind::l2, NormKind::h_half_boundary, NormKind::h_minus_half_boundary})
    EXPECT_EQ(norm(kind, gamma, z, 0.7).value, 0.0);
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(2 * space->dof_count());
  EXPECT_EQ(l2_norm(*space, u, 0.7), 0.0);
  EXPECT_EQ(h1_norm(*space, u, 0.7), 0.0);
  EXPECT_EQ(DualNorm(space, {BoundaryTag::box})(u), 0.0);
  EXPECT_THROW(frequency_ratio(gamma, z, 1.0), Error);
}

TEST(BoundaryNorms, MatchDenseOracleOnRandomData) {
  const auto space = space_of(triangulate(disk(), 0.15));
  for (const auto& tags : {std::set<BoundaryTag>{BoundaryTag::gamma}, std::set<BoundaryTag>{BoundaryTag::gamma, BoundaryTag::outer_rest}}) {
    const BoundaryTraceSpace t(space, tags);
    for (unsigned seed = 1; seed <= 5; ++seed) {
      const TraceField g = random_trace(t.size(), seed);
      for (double rho0 : {0.5, 1.0}) {
        const double h = h_half_norm(t, g, rho0), oh = dense_oracle(t, g, rho0, 0.5);
        const double m = h_minus_half_norm(t, g, rho0), om = dense_oracle(t, g, rho0, -0.5);
        EXPECT_NEAR(h, oh, 1e-9 * oh);
        EXPECT_NEAR(m, om, 1e-9 * om);
      }
    }
  }
}

TEST(BoundaryNorms, EigenmodeFrequencyIncreases) {
  const auto space = space_of(triangulate(disk(), 0.15));
  const BoundaryTraceSpace gamma(space, {BoundaryTag::gamma});
  const double rho0 = 0.5;
  double prev = 0.0;
  for (int k = 0; k < 8; ++k) {
    TraceField g = TraceField::Zero(gamma.size(), 2);
    g.col(0) = gamma.eigenvectors().col(k);
    const double f = frequency_ratio(gamma, g, rho0);
    EXPECT_NEAR(f, std::pow(1.0 + rho0 * rho0 * gamma.eigenvalues()[k], 0.25), 1e-10);
    if (k > 0) EXPECT_GT(f, prev);
    prev = f;
    EXPECT_NEAR(frequency_ratio(gamma, 2.0 * g, rho0), f, 1e-12);
  }
}

TEST(BoundaryNorms, HomogeneityDualityAndScaling) {
  const Mesh base = triangulate(disk(), 0.15);
  const auto space = space_of(base);
  const BoundaryTraceSpace t(space, {BoundaryTag::gamma});
  const TraceField g = random_trace(t.size(), 11), psi = random_trace(t.size(), 12);
  const double rho0 = 0.5;
  for (double a : {-3.0, 0.25}) {
    EXPECT_NEAR(h_half_norm(t, a * g, rho0), std::abs(a) * h_half_norm(t, g, rho0), 1e-12 * h_half_norm(t, a * g, rho0));
    EXPECT_NEAR(h_minus_half_norm(t, a * g, rho0), std::abs(a) * h_minus_half_norm(t, g, rho0),
                1e-12 * h_minus_half_norm(t, a * g, rho0));
  }
  for (unsigned s = 0; s < 20; ++s) {
    const TraceField v = random_trace(t.size(), 100 + s), w = random_trace(t.size(), 200 + s);
    EXPECT_LE(std::abs(boundary_pairing(t, w, v, rho0)),
              h_minus_half_norm(t, w, rho0) * h_half_norm(t, v, rho0) * (1 + 1e-8));
  }
  // Scale the domain and rho0 together.
  const double s = 3.0;
  Mesh scaled = base;
  for (auto& x : scaled.nodes) x *= s;
  const auto sspace = space_of(scaled);
  const BoundaryTraceSpace ts(sspace, {BoundaryTag::gamma});
  ASSERT_EQ(ts.size(), t.size());
  EXPECT_NEAR(h_half_norm(ts, g, s * rho0), h_half_norm(t, g, rho0), 1e-9 * h_half_norm(t, g, rho0));
  EXPECT_NEAR(h_minus_half_norm(ts, psi, s * rho0), h_minus_half_norm(t, psi, rho0), 1e-9 * h_minus_half_norm(t, psi, rho0));
  EXPECT_NEAR(boundary_l2_norm(ts, g, s * rho0), boundary_l2_norm(t, g, rho0), 1e-12);
  const Eigen::VectorXd u = space->interpolate([](const Point& x) { return std::sin(2 * x.x()) + x.y(); });
  EXPECT_NEAR(l2_norm(*sspace, u, s * rho0), l2_norm(*space, u, rho0), 1e-12);
  EXPECT_NEAR(h1_norm(*sspace, u, s * rho0), h1_norm(*space, u, rho0), 1e-12);
}

TEST(BoundaryNorms, RegionMismatchIsRejected) {
  const auto space = space_of(channel(0.25));
  const BoundaryTraceSpace gamma(space, {BoundaryTag::gamma});
  EXPECT_THROW(h_half_norm(gamma, TraceField::Zero(gamma.size() + 1, 2), 1.0), Error);
  EXPECT_THROW(BoundaryTraceSpace(space, {BoundaryTag::obstacle}), Error);
}

TEST(DomainNorms, L2AndH1Values) {
  const auto space = space_of(triangulate(rectangle_domain({0, 0}, {1, 1}, {BoundaryTag::box, BoundaryTag::box, BoundaryTag::box, BoundaryTag::box}), 0.2));
  const Eigen::VectorXd u = space->interpolate([](const Point& x) { return x.x() + 2 * x.y(); });
  // integral (x+2y)^2 = 1/3 + 4/3 + 1 = 8/3; integral |grad|^2 = 5.
  EXPECT_NEAR(l2_norm(*space, u, 0.5), std::sqrt(8.0 / 3.0) / 0.5, 1e-12);
  EXPECT_NEAR(h1_norm(*space, u, 0.5), std::sqrt(8.0 / 3.0 + 0.25 * 5.0) / 0.5, 1e-12);
}

TEST(DomainNorms, DualNormOfStiffnessImage) {
  const auto space = space_of(triangulate(disk(), 0.15));
  Eigen::VectorXd z = space->interpolate([](const Point& x) { return 1.0 - x.squaredNorm(); });
  for (int d = 0; d < space->dof_count(); ++d)
    if (space->boundary_mask()[d]) z[d] = 0.0;
  const Eigen::VectorXd b = space->stiffness() * z;
  const DualNorm dual(space, {BoundaryTag::gamma, BoundaryTag::outer_rest});
  // z vanishes on the boundary, so it is its own Riesz representative.
  EXPECT_NEAR(dual(b), std::sqrt(z.dot(b)), 1e-10 * std::sqrt(z.dot(b)));
  Eigen::VectorXd b2(2 * b.size());
  b2 << b, -2.0 * b;
  EXPECT_NEAR(dual(b2), std::sqrt(5.0) * dual(b), 1e-10 * dual(b2));
}

TEST(Equivalence, BumpInsideArcIsStable) {
  Mesh m = triangulate(disk(), 0.2);
  const auto bump = [](const Point& x) {
    // Gamma is the upper half circle, angle in [0, pi]; middle third (pi/3, 2pi/3).
    const double a = std::atan2(x.y(), x.x());
    if (a <= pi / 3 || a >= 2 * pi / 3) return Vec2(0, 0);
    const double s = std::sin(3 * (a - pi / 3));
    return Vec2(s * s * -x.y(), s * s * x.x());
  };
  std::vector<double> c;
  for (int level = 0; level < 3; ++level) {
    if (level > 0) m = refine(m);
    const auto space = space_of(m);
    const BoundaryTraceSpace gamma(space, {BoundaryTag::gamma});
    const BoundaryTraceSpace all(space, {BoundaryTag::gamma, BoundaryTag::outer_rest});
    const auto g = interpolate_dirichlet(*space, bump);
    const auto r = equivalence_check(gamma, all, g, 0.5);
    EXPECT_FALSE(r.touches_endpoint);
    EXPECT_LE(r.gamma_norm, r.boundary_norm * (1 + 1e-12));
    c.push_back(r.ratio);
  }
  for (size_t k = 1; k < c.size(); ++k) EXPECT_NEAR(c[k], c[k - 1], 0.2 * c[k - 1]);
  const auto space = space_of(m);
  const BoundaryTraceSpace gamma(space, {BoundaryTag::gamma});
  const BoundaryTraceSpace all(space, {BoundaryTag::gamma, BoundaryTag::outer_rest});
  const auto zero = equivalence_check(gamma, all, zero_dirichlet(*space), 0.5);
  EXPECT_EQ(zero.gamma_norm, 0.0);
  EXPECT_EQ(zero.boundary_norm, 0.0);
}

TEST(Equivalence, FullCircleArcCoincides) {
  DomainSpec d = disk();
  d.gamma = ArcInterval{0.0, 1.0};
  const auto space = space_of(triangulate(d, 0.2));
  const BoundaryTraceSpace gamma(space, {BoundaryTag::gamma});
  const BoundaryTraceSpace all(space, {BoundaryTag::gamma, BoundaryTag::outer_rest});
  const auto g = interpolate_dirichlet(*space, [](const Point& x) { return Vec2(std::cos(3 * x.x()), x.y()); });
  const auto r = equivalence_check(gamma, all, g, 0.5);
  EXPECT_NEAR(r.gamma_norm, r.boundary_norm, 1e-12 * r.boundary_norm);
}

TEST(EnergyEstimate, PoiseuilleStableAndHomogeneous) {
  Mesh m = channel(0.25);
  std::vector<double> ratios;
  for (int level = 0; level < 3; ++level) {
    if (level > 0) m = refine(m);
    const auto space = space_of(m);
    const auto g = interpolate_dirichlet(*space, [](const Point& x) { return Vec2(x.y() * (1 - x.y()), 0.0); });
    const auto sol = solve_dirichlet(space, g);
    const auto e = energy_estimate_check(sol, g, {}, 0.5);
    EXPECT_TRUE(std::isfinite(e.ratio));
    EXPECT_GT(e.ratio, 0.0);
    ratios.push_back(e.ratio);
    if (level == 0) {
      DirichletData g2{2.0 * g.gx, 2.0 * g.gy};
      const auto e2 = energy_estimate_check(solve_dirichlet(space, g2), g2, {}, 0.5);
      EXPECT_NEAR(e2.ratio, e.ratio, 1e-10 * e.ratio);
      const auto z = zero_dirichlet(*space);
      EXPECT_EQ(energy_estimate_check(solve_dirichlet(space, z), z, {}, 0.5).ratio, 0.0);
    }
  }
  for (size_t k = 1; k < ratios.size(); ++k) EXPECT_NEAR(ratios[k], ratios[0], 0.2 * ratios[0]);
}

TEST(EnergyEstimate, ZeroDataWithNonzeroSolutionIsViolation) {
  const auto space = space_of(channel(0.3));
  const auto g = interpolate_dirichlet(*space, [](const Point& x) { return Vec2(x.y() * (1 - x.y()), 0.0); });
  const auto sol = solve_dirichlet(space, g);
  EXPECT_THROW(energy_estimate_check(sol, zero_dirichlet(*space), {}, 0.5), Error);
}
