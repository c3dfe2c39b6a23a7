#pragma once

#include "stokeslab/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <vector>

namespace stokeslab {

using SparseMatrix = Eigen::SparseMatrix<double>;
using VectorField = std::function<Vec2(const Point&)>;
using ScalarField = std::function<double(const Point&)>;

/// Quadratic Lagrange shape functions in barycentric coordinates. Local order:
/// vertices 0,1,2 then edges (0,1), (1,2), (2,0).
std::array<double, 6> p2_values(const std::array<double, 3>& l);
std::array<Vec2, 6> p2_gradients(const std::array<double, 3>& l, const std::array<Vec2, 3>& grad_lambda);

struct ElementGeometry {
  std::array<Point, 3> x;
  std::array<Vec2, 3> grad_lambda;
  double area;

  Point point(const std::array<double, 3>& l) const { return l[0] * x[0] + l[1] * x[1] + l[2] * x[2]; }
};

/// Boundary edge seen by a P2 field: dofs in 1D order (start, midpoint, end).
struct BoundaryEdgeDofs {
  std::array<int, 3> dofs;
  int mesh_edge;
  BoundaryTag tag;
  bool interface;
  Vec2 normal;
  double length;
};

/// Continuous P2 scalar space on a mesh. Vertex dofs share the node ids of
/// the mesh; edge dofs follow. P1 fields use the vertex dofs alone.
class P2Space {
 public:
  explicit P2Space(std::shared_ptr<const Mesh> mesh);

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  int dof_count() const { return static_cast<int>(dof_points_.size()); }
  int vertex_count() const { return mesh_->node_count(); }
  const std::array<int, 6>& element(int t) const { return elements_[t]; }
  const Point& dof_point(int d) const { return dof_points_[d]; }
  ElementGeometry geometry(int t) const;

  /// All tagged mesh edges, interfaces included.
  const std::vector<BoundaryEdgeDofs>& boundary_edges() const { return boundary_edges_; }
  /// Dofs on non-interface boundary edges.
  const std::vector<char>& boundary_mask() const { return boundary_mask_; }
  std::vector<int> dofs_on(const std::set<BoundaryTag>& tags, bool include_interface = false) const;

  Eigen::VectorXd interpolate(const ScalarField& f) const;
  SparseMatrix mass() const;
  SparseMatrix stiffness() const;
  SparseMatrix p1_mass() const;
  SparseMatrix p1_stiffness() const;
  /// Entries: integral of each P1 basis function.
  Eigen::VectorXd p1_integrals() const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  std::vector<std::array<int, 6>> elements_;
  std::vector<Point> dof_points_;
  std::vector<BoundaryEdgeDofs> boundary_edges_;
  std::vector<char> boundary_mask_;
};

/// Velocity dof layout used by all vector operators: [ux (n), uy (n)].
SparseMatrix assemble_strain_stiffness(const P2Space& space);
/// B(k, j) = -integral q_k div phi_j, q_k in P1.
SparseMatrix assemble_divergence(const P2Space& space);
SparseMatrix assemble_vector_mass(const P2Space& space);
Eigen::VectorXd assemble_load(const P2Space& space, const VectorField& f);

struct BodyForce {
  VectorField field;

  static BodyForce zero() { return {}; }
  bool is_zero() const { return !field; }
  Vec2 operator()(const Point& x) const { return field ? field(x) : Vec2::Zero(); }
};

/// Velocity values on P2 dofs; only boundary entries enter a Dirichlet solve.
struct DirichletData {
  Eigen::VectorXd gx;
  Eigen::VectorXd gy;
};

DirichletData interpolate_dirichlet(const P2Space& space, const VectorField& g);
DirichletData zero_dirichlet(const P2Space& space);

/// Exact flux of the P2 boundary interpolant through the non-interface
/// boundary, and the scale sum |g_i| |w_i| used to judge it.
struct FluxMeasure {
  double flux;
  double scale;
  double relative() const { return scale > 0.0 ? std::abs(flux) / scale : 0.0; }
};
FluxMeasure boundary_flux(const P2Space& space, const DirichletData& g);
/// Removes the flux with a correction proportional to |g_i| so the support of
/// g is preserved.
void remove_flux(const P2Space& space, DirichletData& g);

struct StokesOptions {
  /// Relative flux below which the data is projected to zero flux; larger
  /// fluxes are rejected.
  double flux_projection_tolerance = 1e-8;
  /// Impose u = 0 on OBSTACLE edges regardless of the supplied data.
  bool no_slip_on_obstacle = true;
};

struct StokesSolution {
  std::shared_ptr<const P2Space> space;
  Eigen::VectorXd ux;
  Eigen::VectorXd uy;
  Eigen::VectorXd p;
  double residual = 0.0;
  double divergence = 0.0;
  double pressure_mean = 0.0;
  double flux_removed = 0.0;

  Vec2 velocity(int t, const std::array<double, 3>& l) const;
  /// G(c, d) = d u_c / d x_d.
  Eigen::Matrix2d velocity_gradient(int t, const std::array<double, 3>& l) const;
  double pressure(int t, const std::array<double, 3>& l) const;
  Eigen::VectorXd velocity_vector() const;
};

StokesSolution solve_dirichlet(std::shared_ptr<const P2Space> space, DirichletData g, const BodyForce& f = {},
                               const StokesOptions& options = {});

/// Weak residual R(v) = a(u,v) - integral p div v + integral f.v on every
/// velocity dof. At boundary dofs it is the discrete traction functional.
Eigen::VectorXd stokes_residual(const StokesSolution& sol, const BodyForce& f = {});

struct ErrorNorms {
  double velocity_l2;
  double velocity_h1_semi;
  double pressure_l2;
};
/// Errors against an exact solution; the pressure error is measured after
/// removing the mean difference.
ErrorNorms solution_errors(const StokesSolution& sol, const VectorField& u, const std::function<Eigen::Matrix2d(const Point&)>& grad_u,
                           const ScalarField& p, int quadrature_degree = 10);

struct EnergyEstimate {
  double ratio;
  double solution_norm;
  double data_norm;
};
/// (|u|_1 + rho0 |p - p_E|_0) / (rho0 |f|_{-1} + |g|_{1/2, boundary}) with the
/// scaled norms. Zero data gives ratio 0; zero data with a nonzero solution
/// is an invariant violation.
EnergyEstimate energy_estimate_check(const StokesSolution& sol, const DirichletData& g, const BodyForce& f,
                                     double rho0);

/// Discrete Helmholtz splitting v = h + grad_part, h discretely divergence
/// free with zero trace, grad_part L2-orthogonal to all such fields.
struct LerayResult {
  Eigen::VectorXd h_part;
  Eigen::VectorXd grad_part;
  Eigen::VectorXd potential;
  double residual;
  double orthogonality;
  double divergence;
};

class LerayProjector {
 public:
  explicit LerayProjector(std::shared_ptr<const P2Space> space);
  ~LerayProjector();
  LerayResult project(const Eigen::VectorXd& v) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

LerayResult leray_project(std::shared_ptr<const P2Space> space, const Eigen::VectorXd& v);

struct PoincareResult {
  double lambda1;
  /// 1 / (rho0 sqrt(lambda1))
  double constant;
  int iterations;
};
PoincareResult poincare_constant(const P2Space& space, const std::set<BoundaryTag>& clamped, double rho0 = 1.0);
/// Dense generalized eigensolver reference for small meshes.
double poincare_lambda_dense(const P2Space& space, const std::set<BoundaryTag>& clamped);

void write_solution(const std::filesystem::path& velocity_path, const std::filesystem::path& pressure_path,
                    const StokesSolution& sol);

}  // namespace stokeslab
