#pragma once

#include "stokeslab/cauchy.hpp"

#include <memory>
#include <vector>

namespace stokeslab {

/// Boundary chart at P0: x' along the tangent, x_n along the inward normal.
struct ChartFrame {
  Point origin;
  Vec2 tangent;
  Vec2 inward;

  Point to_chart(const Point& x) const { return {(x - origin).dot(tangent), (x - origin).dot(inward)}; }
  Point from_chart(const Point& c) const { return origin + c.x() * tangent + c.y() * inward; }
};

/// Q(P0) = {|x'| <= rho00, |x_n| <= height} in the chart at P0, and
/// Gamma0 = dE inside Q, given by unwrapped outer-curve parameters.
struct BoxGeometry {
  ChartFrame frame;
  double anchor = 0.0;
  double rho00 = 0.0;
  double height = 0.0;
  double s_begin = 0.0;
  double s_end = 0.0;
  double gamma0_length = 0.0;
  /// P0 + (rho00 / 4) nu, nu the outer normal.
  Point p_star;
  /// E~ = E u E- u Gamma0 with Gamma0 as an interface; region 0 is E, region 1 is E-.
  PlanarDomain extended;
};

/// Throws when P0 is not on Gamma, Gamma0 leaves Gamma, the boundary is not a
/// graph over the chart inside Q, or other boundary parts enter Q.
BoxGeometry build_box(const DomainSpec& domain, double anchor);
BoxGeometry build_box(const DomainSpec& domain);

/// Conforming meshes of E~ and its two parts, with P2 dof maps into E~.
struct ExtendedDomain {
  BoxGeometry box;
  double rho0 = 1.0;
  std::shared_ptr<const P2Space> tilde;
  std::shared_ptr<const P2Space> inner;
  std::shared_ptr<const P2Space> minus;
  std::vector<int> inner_to_tilde;
  std::vector<int> minus_to_tilde;
};

ExtendedDomain mesh_extended_domain(const DomainSpec& domain, const BoxGeometry& box, double h_target,
                                    int refinements = 0);

struct VelocityExtension {
  StokesSolution u_minus;
  /// Flux of g through Gamma0 compensated on the bottom side of the box.
  double compensated_flux = 0.0;
  /// |u-|_{1,E-} / |g|_{1/2,Gamma}; zero for g = 0.
  double kappa = 0.0;
};

/// Stokes lift on E- with u- = g on Gamma0 and zero on the box sides, g read
/// from the solution on E.
VelocityExtension extend_velocity(const ExtendedDomain& ext, const StokesSolution& u);

/// F- (v) = integral_{dE-} (grad u- + grad u-^T) nu . v - integral (grad u- + grad u-^T) : grad v,
/// represented by its L2 Riesz field Fhat in P2. p- in P1 vanishes on dE- and
/// solves integral grad p- . grad q = integral Fhat . grad q; X- = Fhat - grad p-.
struct PressureCorrection {
  Eigen::VectorXd functional;  // F-, [2n]
  Eigen::VectorXd fx, fy;      // Fhat
  Eigen::VectorXd p;           // p-, one value per vertex
  double x_l2 = 0.0;
  /// max_q |integral X- . grad q| / (|X-|_0 |grad q|_0) over the interior P1 basis.
  double weak_divergence = 0.0;

  /// X- on triangle t of the E- mesh.
  Vec2 x_minus(const P2Space& space, int t, const std::array<double, 3>& l) const;
};

PressureCorrection pressure_correction(const StokesSolution& u_minus);

/// Phi on the P2 dofs of E~ ([2n] layout), clamped dofs zeroed.
struct PhiCertificate {
  Eigen::VectorXd phi1, phi2, phi3, phi;
  /// Riesz representative of Phi, per component [2n].
  Eigen::VectorXd z;
  double phi_norm = 0.0;
  std::array<double, 3> part_norms{};
  double g_norm = 0.0;
  double psi_norm = 0.0;
  /// |g|_{1/2,Gamma} + rho0 |psi|_{-1/2,Gamma}
  double eta = 0.0;
  /// |Phi|_{-1} rho0 / eta, zero when eta = 0.
  double bound_ratio = 0.0;
  std::array<double, 3> part_ratios{};
  /// |a~(u~, p~; v) - Phi(v)| over |Phi| on the interior dofs of E~.
  double interface_residual = 0.0;
};

PhiCertificate build_phi(const ExtendedDomain& ext, const StokesSolution& u, const CauchyData& cauchy,
                         const VelocityExtension& extension, const PressureCorrection& correction);

struct ExtensionResult {
  VelocityExtension velocity;
  PressureCorrection pressure;
  PhiCertificate phi;
};

/// Full pipeline for a solution on ext.inner; Cauchy data measured on Gamma.
ExtensionResult extend_cauchy_data(const ExtendedDomain& ext, const StokesSolution& u);

struct InteriorSmallnessSample {
  double sup = 0.0;
  double l2 = 0.0;
  double psi_norm = 0.0;
};

/// log(rho0 sup / |u|_0) = log C + tau log(rho0 |psi|_{-1/2} / |u|_0) fitted
/// over a family with u = 0 on Gamma; sup over E n B_{3 rho00/8}(P*). In two
/// dimensions rho0^{n/2} = rho0.
struct InteriorSmallnessFit {
  std::vector<InteriorSmallnessSample> samples;
  double tau = 0.0;
  double log_c = 0.0;
  double r_squared = 0.0;
};

/// Sup of |u| over E n B_r(c), sampled on a polar grid plus the dof points.
double ball_sup(const StokesSolution& sol, const Point& c, double r);

InteriorSmallnessFit interior_smallness_estimate(const std::vector<StokesSolution>& family, const BoxGeometry& box,
                                                 double rho0);

void write_extension(const std::filesystem::path& dir, const ExtendedDomain& ext, const ExtensionResult& result);

}  // namespace stokeslab
