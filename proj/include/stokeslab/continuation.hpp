#pragma once

#include "stokeslab/cauchy.hpp"

#include <cmath>
#include <functional>

namespace stokeslab {

/// Integrand evaluated on triangle t at a physical point (the element
/// polynomial is evaluated outside its triangle as well).
using ElementIntegrand = std::function<double(int t, const Point& x)>;

/// Integral over the intersection of the mesh with the disk B_r(c). Each
/// triangle-disk piece is integrated through Green's theorem: straight
/// boundary parts with Gauss-Legendre (exact for polynomials up to degree 5),
/// circle arcs with a 24-point rule per arc.
double ball_integral(const Mesh& mesh, const Point& c, double r, const ElementIntegrand& f);

/// Integral of |grad u|^2 over B_r(c) intersected with the domain. In two
/// dimensions the rho0-scaled energy rho0^{n-2} integral |grad u|^2 is the
/// plain one.
double ball_energy(const StokesSolution& sol, const Point& c, double r);
double ball_l2(const StokesSolution& sol, const Point& c, double r);
double domain_energy(const StokesSolution& sol);

/// Distance from x to the non-interface boundary edges; negative when x lies
/// outside the mesh.
double distance_to_boundary(const Mesh& mesh, const Point& x);

struct ThreeSpheresOptions {
  double theta_star = 0.9 * std::exp(-0.5);
  /// Margin between B_{r3} and the boundary, in units of h_max.
  double margin_factor = 1.0;
};

struct ThreeSpheresReport {
  Point center;
  double r1, r2, r3;
  double N1, N2, N3;
  double delta_hat;
};

ThreeSpheresReport three_spheres_probe(const StokesSolution& sol, const Point& center, double r1, double r2, double r3,
                                       const ThreeSpheresOptions& options = {});

struct FamilySummary {
  double min;
  double median;
  double max;
};
FamilySummary summarize(std::vector<double> values);

struct SmallnessSample {
  Point center;
  double rho;
  double R;
};

/// log(1/R) ~ A (rho0/rho)^B fitted as a line in (log(rho0/rho), log log(1/R)).
struct SmallnessFit {
  double A = 0.0;
  double B = 0.0;
  double r_squared = 0.0;
  int points = 0;
};

struct SmallnessReport {
  std::vector<SmallnessSample> samples;
  /// Samples skipped because B_rho(x) left E_{s rho}.
  int skipped = 0;
  double total_energy = 0.0;
  SmallnessFit fit;
};

/// For every rho the fit uses the smallest R over admissible centers.
SmallnessReport smallness_probe(const StokesSolution& sol, const std::vector<double>& rho_grid,
                                const std::vector<Point>& centers, double rho0, double s = 2.0);

struct BoundarySmallnessSample {
  Point center;
  double rho;
  /// integral_{B_rho} |grad u|^2 / (rho0^{n-2} |g|^2_{1/2, Gamma})
  double ratio;
  /// Same energy over the whole-domain energy.
  double R;
};

struct BoundarySmallnessReport {
  std::vector<BoundarySmallnessSample> samples;
  int skipped = 0;
  double g_norm = 0.0;
  /// integral_E |grad u|^2 / |g|^2_{1/2}: ratio = factor * R on every sample.
  double factor = 0.0;
};

BoundarySmallnessReport boundary_smallness_probe(const StokesSolution& sol, const BoundaryTraceSpace& gamma,
                                                 const std::vector<double>& rho_grid, const std::vector<Point>& centers,
                                                 double rho0, double s = 2.0);

/// integral over D2 \ D1 of |grad u1|^2, u1 defined outside D1. Triangles
/// crossing either curve are subdivided and integrated with an indicator at
/// the quadrature points.
double energy_in_difference(const StokesSolution& sol1, const BoundaryCurve& d1, const BoundaryCurve& d2,
                            int max_depth = 5);

/// A field on a ball: value and gradient (Jacobian for vector fields).
struct BallField {
  std::function<Eigen::VectorXd(const Point&)> value;
  std::function<Eigen::MatrixXd(const Point&)> gradient;
};

struct InterpolationEstimate {
  double sup_value;
  double sup_gradient;
  double l2_squared;
  /// Smallest C with sup|v| <= C ((int v^2)^{1/4} sup|grad v|^{1/2} + t^{-1} (int v^2)^{1/2}).
  double constant;
  bool skipped;
};

InterpolationEstimate interpolation_probe(const BallField& field, const Point& center, double t);
/// Field view of a discrete velocity installed on its mesh.
BallField velocity_field(const StokesSolution& sol);

}  // namespace stokeslab
