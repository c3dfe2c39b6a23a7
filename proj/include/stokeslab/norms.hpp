#pragma once

#include "stokeslab/fem.hpp"

#include <Eigen/Dense>

#include <mutex>
#include <set>
#include <string>

namespace stokeslab {

enum class NormKind { l2, h1, h_half_boundary, h_minus_half_boundary, h_minus_one };
std::string to_string(NormKind kind);

struct NormReport {
  NormKind kind;
  double value;
  double rho0;
  std::string object;
};

/// P2 traces on a set of tagged boundary edges, with the 1D mass and
/// stiffness (natural endpoints) and their generalized eigenpairs.
class BoundaryTraceSpace {
 public:
  BoundaryTraceSpace(std::shared_ptr<const P2Space> space, std::set<BoundaryTag> tags, bool include_interface = false);

  const P2Space& space() const { return *space_; }
  const std::set<BoundaryTag>& tags() const { return tags_; }
  int size() const { return static_cast<int>(dofs_.size()); }
  /// Global P2 dofs, ordered along the boundary chains.
  const std::vector<int>& dofs() const { return dofs_; }
  /// Arclength coordinate of each trace dof.
  const std::vector<double>& arclength() const { return arclength_; }
  double length() const { return length_; }
  /// Edges used, in chain order.
  const std::vector<BoundaryEdgeDofs>& edges() const { return edges_; }
  /// Local index of a global dof, or -1.
  int local(int global_dof) const;

  const Eigen::MatrixXd& mass() const { return mass_; }
  const Eigen::MatrixXd& stiffness() const { return stiffness_; }
  /// Eigenvalues ascending; eigenvector columns are mass-orthonormal.
  const Eigen::VectorXd& eigenvalues() const;
  const Eigen::MatrixXd& eigenvectors() const;

  Eigen::VectorXd restrict(const Eigen::VectorXd& global) const;

 private:
  void decompose() const;

  std::shared_ptr<const P2Space> space_;
  std::set<BoundaryTag> tags_;
  std::vector<int> dofs_;
  std::vector<int> local_;
  std::vector<double> arclength_;
  double length_ = 0.0;
  std::vector<BoundaryEdgeDofs> edges_;
  Eigen::MatrixXd mass_;
  Eigen::MatrixXd stiffness_;
  mutable std::once_flag once_;
  mutable Eigen::VectorXd eigenvalues_;
  mutable Eigen::MatrixXd eigenvectors_;
};

/// Vector trace restricted to a trace space: one column per component.
using TraceField = Eigen::Matrix<double, Eigen::Dynamic, 2>;
TraceField restrict_trace(const BoundaryTraceSpace& trace, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Domain norms. Vector fields use the [ux, uy] layout.
double l2_norm(const P2Space& space, const Eigen::VectorXd& u, double rho0);
double h1_norm(const P2Space& space, const Eigen::VectorXd& u, double rho0);
double l2_norm_p1(const P2Space& space, const Eigen::VectorXd& p, double rho0);

double boundary_l2_norm(const BoundaryTraceSpace& trace, const TraceField& g, double rho0);
double h_half_norm(const BoundaryTraceSpace& trace, const TraceField& g, double rho0);
double h_minus_half_norm(const BoundaryTraceSpace& trace, const TraceField& psi, double rho0);
/// Scaled pairing rho0^{-1} integral psi.v, bounded by the product of the
/// H^{-1/2} and H^{1/2} norms.
double boundary_pairing(const BoundaryTraceSpace& trace, const TraceField& psi, const TraceField& v, double rho0);

/// Riesz norm |grad z| of a functional given by its values on the P2 dofs of
/// each component ([n] or [2n] layout), z vanishing on the clamped tags.
class DualNorm {
 public:
  DualNorm(std::shared_ptr<const P2Space> space, const std::set<BoundaryTag>& clamped);
  ~DualNorm();
  double operator()(const Eigen::VectorXd& functional) const;
  /// Riesz representative of one scalar functional (zero on clamped dofs).
  Eigen::VectorXd riesz(const Eigen::VectorXd& scalar_functional) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

NormReport norm(NormKind kind, const BoundaryTraceSpace& trace, const TraceField& g, double rho0,
                const std::string& object = {});
NormReport norm(NormKind kind, const P2Space& space, const Eigen::VectorXd& u, double rho0,
                const std::string& object = {});

/// |g|_{1/2} / |g|_0 on the trace space.
double frequency_ratio(const BoundaryTraceSpace& trace, const TraceField& g, double rho0);

struct EquivalenceReport {
  double gamma_norm;
  double boundary_norm;
  double ratio;
  bool touches_endpoint;
};
/// H^{1/2} norm of g on the arc versus on the full boundary loop.
EquivalenceReport equivalence_check(const BoundaryTraceSpace& gamma, const BoundaryTraceSpace& boundary,
                                    const DirichletData& g, double rho0);

}  // namespace stokeslab
