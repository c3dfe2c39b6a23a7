#include "stokeslab/fem.hpp"

#include "stokeslab/error.hpp"
#include "stokeslab/quadrature.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <unordered_map>

namespace stokeslab {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

constexpr std::array<std::array<int, 2>, 3> local_edges{{{0, 1}, {1, 2}, {2, 0}}};

}  // namespace

std::array<double, 6> p2_values(const std::array<double, 3>& l) {
  return {l[0] * (2.0 * l[0] - 1.0), l[1] * (2.0 * l[1] - 1.0), l[2] * (2.0 * l[2] - 1.0),
          4.0 * l[0] * l[1],         4.0 * l[1] * l[2],         4.0 * l[2] * l[0]};
}

std::array<Vec2, 6> p2_gradients(const std::array<double, 3>& l, const std::array<Vec2, 3>& g) {
  return {(4.0 * l[0] - 1.0) * g[0],           (4.0 * l[1] - 1.0) * g[1],
          (4.0 * l[2] - 1.0) * g[2],           4.0 * (l[0] * g[1] + l[1] * g[0]),
          4.0 * (l[1] * g[2] + l[2] * g[1]),   4.0 * (l[2] * g[0] + l[0] * g[2])};
}

// ---------------------------------------------------------------------------
// P2Space

P2Space::P2Space(std::shared_ptr<const Mesh> mesh) : mesh_(std::move(mesh)) {
  require(mesh_ != nullptr && mesh_->triangle_count() > 0, ErrorKind::invalid_argument,
          "finite element space needs a nonempty mesh");
  const Mesh& m = *mesh_;
  dof_points_ = m.nodes;
  std::unordered_map<std::uint64_t, int> edge_dof;
  elements_.resize(m.triangles.size());
  for (int t = 0; t < m.triangle_count(); ++t) {
    const auto& tri = m.triangles[t];
    auto& el = elements_[t];
    for (int i = 0; i < 3; ++i) el[i] = tri[i];
    for (int k = 0; k < 3; ++k) {
      const int a = tri[local_edges[k][0]], b = tri[local_edges[k][1]];
      const auto key = edge_key(a, b);
      auto it = edge_dof.find(key);
      if (it == edge_dof.end()) {
        it = edge_dof.emplace(key, static_cast<int>(dof_points_.size())).first;
        dof_points_.push_back(0.5 * (m.nodes[a] + m.nodes[b]));
      }
      el[3 + k] = it->second;
    }
  }
  boundary_mask_.assign(dof_points_.size(), 0);
  for (int e = 0; e < static_cast<int>(m.edges.size()); ++e) {
    const MeshEdge& me = m.edges[e];
    const auto it = edge_dof.find(edge_key(me.a, me.b));
    require(it != edge_dof.end(), ErrorKind::invalid_argument, "tagged edge is not an edge of the mesh");
    const Vec2 d = m.nodes[me.b] - m.nodes[me.a];
    const double len = d.norm();
    boundary_edges_.push_back({{me.a, it->second, me.b}, e, me.tag, me.interface, Vec2(d.y(), -d.x()) / len, len});
    if (!me.interface) boundary_mask_[me.a] = boundary_mask_[me.b] = boundary_mask_[it->second] = 1;
  }
}

ElementGeometry P2Space::geometry(int t) const {
  const auto& tri = mesh_->triangles[t];
  ElementGeometry g;
  for (int i = 0; i < 3; ++i) g.x[i] = mesh_->nodes[tri[i]];
  const double det = cross(g.x[1] - g.x[0], g.x[2] - g.x[0]);
  g.area = 0.5 * det;
  g.grad_lambda[0] = Vec2(g.x[1].y() - g.x[2].y(), g.x[2].x() - g.x[1].x()) / det;
  g.grad_lambda[1] = Vec2(g.x[2].y() - g.x[0].y(), g.x[0].x() - g.x[2].x()) / det;
  g.grad_lambda[2] = Vec2(g.x[0].y() - g.x[1].y(), g.x[1].x() - g.x[0].x()) / det;
  return g;
}

std::vector<int> P2Space::dofs_on(const std::set<BoundaryTag>& tags, bool include_interface) const {
  std::vector<char> on(dof_points_.size(), 0);
  for (const auto& e : boundary_edges_)
    if (tags.count(e.tag) && (include_interface || !e.interface))
      for (int d : e.dofs) on[d] = 1;
  std::vector<int> out;
  for (int d = 0; d < dof_count(); ++d)
    if (on[d]) out.push_back(d);
  return out;
}

Eigen::VectorXd P2Space::interpolate(const ScalarField& f) const {
  Eigen::VectorXd v(dof_count());
  for (int d = 0; d < dof_count(); ++d) v[d] = f(dof_points_[d]);
  return v;
}

SparseMatrix P2Space::mass() const {
  const TriangleRule& q = triangle_rule(4);
  Triplets trip;
  trip.reserve(36 * elements_.size());
  for (int t = 0; t < mesh_->triangle_count(); ++t) {
    const ElementGeometry g = geometry(t);
    Eigen::Matrix<double, 6, 6> local = Eigen::Matrix<double, 6, 6>::Zero();
    for (size_t k = 0; k < q.w.size(); ++k) {
      const auto phi = p2_values(q.bary[k]);
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) local(i, j) += q.w[k] * g.area * phi[i] * phi[j];
    }
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) trip.emplace_back(elements_[t][i], elements_[t][j], local(i, j));
  }
  SparseMatrix m(dof_count(), dof_count());
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

SparseMatrix P2Space::stiffness() const {
  const TriangleRule& q = triangle_rule(4);
  Triplets trip;
  trip.reserve(36 * elements_.size());
  for (int t = 0; t < mesh_->triangle_count(); ++t) {
    const ElementGeometry g = geometry(t);
    Eigen::Matrix<double, 6, 6> local = Eigen::Matrix<double, 6, 6>::Zero();
    for (size_t k = 0; k < q.w.size(); ++k) {
      const auto grad = p2_gradients(q.bary[k], g.grad_lambda);
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) local(i, j) += q.w[k] * g.area * grad[i].dot(grad[j]);
    }
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) trip.emplace_back(elements_[t][i], elements_[t][j], local(i, j));
  }
  SparseMatrix m(dof_count(), dof_count());
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

SparseMatrix P2Space::p1_mass() const {
  Triplets trip;
  for (int t = 0; t < mesh_->triangle_count(); ++t) {
    const ElementGeometry g = geometry(t);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trip.emplace_back(elements_[t][i], elements_[t][j], g.area * (i == j ? 2.0 : 1.0) / 12.0);
  }
  SparseMatrix m(vertex_count(), vertex_count());
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

SparseMatrix P2Space::p1_stiffness() const {
  Triplets trip;
  for (int t = 0; t < mesh_->triangle_count(); ++t) {
    const ElementGeometry g = geometry(t);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trip.emplace_back(elements_[t][i], elements_[t][j], g.area * g.grad_lambda[i].dot(g.grad_lambda[j]));
  }
  SparseMatrix m(vertex_count(), vertex_count());
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

Eigen::VectorXd P2Space::p1_integrals() const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(vertex_count());
  for (int t = 0; t < mesh_->triangle_count(); ++t) {
    const double a = mesh_->triangle_area(t);
    for (int i = 0; i < 3; ++i) v[elements_[t][i]] += a / 3.0;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Vector operators

SparseMatrix assemble_strain_stiffness(const P2Space& space) {
  const int n = space.dof_count();
  const TriangleRule& q = triangle_rule(4);
  Triplets trip;
  trip.reserve(144 * static_cast<size_t>(space.mesh().triangle_count()));
  for (int t = 0; t < space.mesh().triangle_count(); ++t) {
    const ElementGeometry g = space.geometry(t);
    Eigen::Matrix<double, 12, 12> local = Eigen::Matrix<double, 12, 12>::Zero();
    for (size_t k = 0; k < q.w.size(); ++k) {
      const auto grad = p2_gradients(q.bary[k], g.grad_lambda);
      const double w = q.w[k] * g.area;
      for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
          const double lap = grad[i].dot(grad[j]);
          for (int c = 0; c < 2; ++c) {
            local(6 * c + i, 6 * c + j) += w * lap;
            for (int d = 0; d < 2; ++d) local(6 * c + i, 6 * d + j) += w * grad[i][d] * grad[j][c];
          }
        }
      }
    }
    const auto& el = space.element(t);
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 6; ++i)
        for (int d = 0; d < 2; ++d)
          for (int j = 0; j < 6; ++j)
            trip.emplace_back(c * n + el[i], d * n + el[j], local(6 * c + i, 6 * d + j));
  }
  SparseMatrix a(2 * n, 2 * n);
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

SparseMatrix assemble_divergence(const P2Space& space) {
  const int n = space.dof_count();
  const TriangleRule& q = triangle_rule(4);
  Triplets trip;
  trip.reserve(36 * static_cast<size_t>(space.mesh().triangle_count()));
  for (int t = 0; t < space.mesh().triangle_count(); ++t) {
    const ElementGeometry g = space.geometry(t);
    Eigen::Matrix<double, 3, 12> local = Eigen::Matrix<double, 3, 12>::Zero();
    for (size_t k = 0; k < q.w.size(); ++k) {
      const auto grad = p2_gradients(q.bary[k], g.grad_lambda);
      const double w = q.w[k] * g.area;
      for (int r = 0; r < 3; ++r)
        for (int j = 0; j < 6; ++j)
          for (int d = 0; d < 2; ++d) local(r, 6 * d + j) -= w * q.bary[k][r] * grad[j][d];
    }
    const auto& el = space.element(t);
    for (int r = 0; r < 3; ++r)
      for (int d = 0; d < 2; ++d)
        for (int j = 0; j < 6; ++j) trip.emplace_back(el[r], d * n + el[j], local(r, 6 * d + j));
  }
  SparseMatrix b(space.vertex_count(), 2 * n);
  b.setFromTriplets(trip.begin(), trip.end());
  return b;
}

SparseMatrix assemble_vector_mass(const P2Space& space) {
  const SparseMatrix m = space.mass();
  const int n = space.dof_count();
  Triplets trip;
  trip.reserve(2 * m.nonZeros());
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      trip.emplace_back(it.row(), it.col(), it.value());
      trip.emplace_back(n + it.row(), n + it.col(), it.value());
    }
  SparseMatrix out(2 * n, 2 * n);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

Eigen::VectorXd assemble_load(const P2Space& space, const VectorField& f) {
  const int n = space.dof_count();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(2 * n);
  if (!f) return b;
  const TriangleRule& q = triangle_rule(6);
  for (int t = 0; t < space.mesh().triangle_count(); ++t) {
    const ElementGeometry g = space.geometry(t);
    const auto& el = space.element(t);
    for (size_t k = 0; k < q.w.size(); ++k) {
      const Vec2 fv = f(g.point(q.bary[k]));
      const auto phi = p2_values(q.bary[k]);
      const double w = q.w[k] * g.area;
      for (int i = 0; i < 6; ++i) {
        b[el[i]] += w * fv.x() * phi[i];
        b[n + el[i]] += w * fv.y() * phi[i];
      }
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Dirichlet data

DirichletData interpolate_dirichlet(const P2Space& space, const VectorField& g) {
  DirichletData d = zero_dirichlet(space);
  const auto& mask = space.boundary_mask();
  for (int i = 0; i < space.dof_count(); ++i) {
    if (!mask[i]) continue;
    const Vec2 v = g(space.dof_point(i));
    d.gx[i] = v.x();
    d.gy[i] = v.y();
  }
  return d;
}

DirichletData zero_dirichlet(const P2Space& space) {
  return {Eigen::VectorXd::Zero(space.dof_count()), Eigen::VectorXd::Zero(space.dof_count())};
}

namespace {

// w_i = integral over the boundary of phi_i times the outward normal.
std::vector<Vec2> flux_weights(const P2Space& space) {
  std::vector<Vec2> w(static_cast<size_t>(space.dof_count()), Vec2::Zero());
  for (const auto& e : space.boundary_edges()) {
    if (e.interface) continue;
    w[e.dofs[0]] += e.length / 6.0 * e.normal;
    w[e.dofs[1]] += 2.0 * e.length / 3.0 * e.normal;
    w[e.dofs[2]] += e.length / 6.0 * e.normal;
  }
  return w;
}

}  // namespace

FluxMeasure boundary_flux(const P2Space& space, const DirichletData& g) {
  const auto w = flux_weights(space);
  FluxMeasure m{0.0, 0.0};
  const auto& mask = space.boundary_mask();
  for (int i = 0; i < space.dof_count(); ++i) {
    if (!mask[i]) continue;
    const Vec2 gi(g.gx[i], g.gy[i]);
    m.flux += gi.dot(w[i]);
    m.scale += gi.norm() * w[i].norm();
  }
  return m;
}

void remove_flux(const P2Space& space, DirichletData& g) {
  const auto w = flux_weights(space);
  const auto& mask = space.boundary_mask();
  double flux = 0.0, denom = 0.0;
  for (int i = 0; i < space.dof_count(); ++i) {
    if (!mask[i]) continue;
    const Vec2 gi(g.gx[i], g.gy[i]);
    flux += gi.dot(w[i]);
    denom += gi.norm() * w[i].squaredNorm();
  }
  if (flux == 0.0) return;
  require(denom > 0.0, ErrorKind::invalid_argument, "cannot remove boundary flux from zero data");
  const double c = flux / denom;
  for (int i = 0; i < space.dof_count(); ++i) {
    if (!mask[i]) continue;
    const double s = std::hypot(g.gx[i], g.gy[i]);
    g.gx[i] -= c * s * w[i].x();
    g.gy[i] -= c * s * w[i].y();
  }
}

// ---------------------------------------------------------------------------
// Stokes solve

Vec2 StokesSolution::velocity(int t, const std::array<double, 3>& l) const {
  const auto phi = p2_values(l);
  const auto& el = space->element(t);
  Vec2 v = Vec2::Zero();
  for (int i = 0; i < 6; ++i) v += phi[i] * Vec2(ux[el[i]], uy[el[i]]);
  return v;
}

Eigen::Matrix2d StokesSolution::velocity_gradient(int t, const std::array<double, 3>& l) const {
  const ElementGeometry g = space->geometry(t);
  const auto grad = p2_gradients(l, g.grad_lambda);
  const auto& el = space->element(t);
  Eigen::Matrix2d G = Eigen::Matrix2d::Zero();
  for (int i = 0; i < 6; ++i) {
    G.row(0) += ux[el[i]] * grad[i].transpose();
    G.row(1) += uy[el[i]] * grad[i].transpose();
  }
  return G;
}

double StokesSolution::pressure(int t, const std::array<double, 3>& l) const {
  const auto& el = space->element(t);
  return l[0] * p[el[0]] + l[1] * p[el[1]] + l[2] * p[el[2]];
}

Eigen::VectorXd StokesSolution::velocity_vector() const {
  Eigen::VectorXd v(ux.size() + uy.size());
  v << ux, uy;
  return v;
}

StokesSolution solve_dirichlet(std::shared_ptr<const P2Space> space, DirichletData g, const BodyForce& f,
                               const StokesOptions& options) {
  require(space != nullptr, ErrorKind::invalid_argument, "solve needs a finite element space");
  const int n = space->dof_count();
  const int nv = space->vertex_count();
  require(g.gx.size() == n && g.gy.size() == n, ErrorKind::invalid_argument,
          "Dirichlet data does not match the finite element space");
  require(g.gx.allFinite() && g.gy.allFinite(), ErrorKind::invalid_argument, "Dirichlet data is not finite");
  const auto& mask = space->boundary_mask();
  for (int i = 0; i < n; ++i)
    if (!mask[i]) g.gx[i] = g.gy[i] = 0.0;
  if (options.no_slip_on_obstacle)
    for (int d : space->dofs_on({BoundaryTag::obstacle})) g.gx[d] = g.gy[d] = 0.0;

  StokesSolution sol;
  sol.space = space;
  const FluxMeasure flux = boundary_flux(*space, g);
  if (flux.relative() > options.flux_projection_tolerance) {
    std::ostringstream msg;
    msg << std::setprecision(6) << "incompatible boundary data: net flux " << flux.flux << " (relative "
        << flux.relative() << ")";
    fail(ErrorKind::invalid_argument, msg.str());
  }
  if (flux.flux != 0.0) {
    remove_flux(*space, g);
    sol.flux_removed = flux.flux;
  }

  std::vector<int> index(2 * static_cast<size_t>(n), -1);
  int free_count = 0;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < n; ++i)
      if (!mask[i]) index[c * n + i] = free_count++;
  Eigen::VectorXd gfull(2 * n);
  gfull << g.gx, g.gy;
  const int total = free_count + nv + 1;

  const SparseMatrix A = assemble_strain_stiffness(*space);
  const SparseMatrix B = assemble_divergence(*space);
  const Eigen::VectorXd load = assemble_load(*space, f.field);
  const Eigen::VectorXd m = space->p1_integrals();

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(total);
  for (int r = 0; r < 2 * n; ++r)
    if (index[r] >= 0) rhs[index[r]] = -load[r];
  Triplets trip;
  trip.reserve(A.nonZeros() + 2 * B.nonZeros() + 2 * nv);
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
      const int r = index[it.row()];
      if (r < 0) continue;
      const int c = index[it.col()];
      if (c >= 0)
        trip.emplace_back(r, c, it.value());
      else
        rhs[r] -= it.value() * gfull[it.col()];
    }
  for (int k = 0; k < B.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(B, k); it; ++it) {
      const int pr = free_count + static_cast<int>(it.row());
      const int c = index[it.col()];
      if (c >= 0) {
        trip.emplace_back(pr, c, it.value());
        trip.emplace_back(c, pr, it.value());
      } else {
        rhs[pr] -= it.value() * gfull[it.col()];
      }
    }
  for (int k = 0; k < nv; ++k) {
    trip.emplace_back(free_count + k, total - 1, m[k]);
    trip.emplace_back(total - 1, free_count + k, m[k]);
  }
  SparseMatrix K(total, total);
  K.setFromTriplets(trip.begin(), trip.end());
  K.makeCompressed();

  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(K);
  if (lu.info() != Eigen::Success) fail(ErrorKind::solver, "singular Stokes saddle-point system: " + lu.lastErrorMessage());
  Eigen::VectorXd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) fail(ErrorKind::solver, "Stokes solve failed");
  const double bnorm = rhs.norm();
  sol.residual = (K * x - rhs).norm() / (bnorm > 0.0 ? bnorm : 1.0);

  sol.ux = g.gx;
  sol.uy = g.gy;
  for (int i = 0; i < n; ++i) {
    if (index[i] >= 0) sol.ux[i] = x[index[i]];
    if (index[n + i] >= 0) sol.uy[i] = x[index[n + i]];
  }
  sol.p = x.segment(free_count, nv);
  const double area = m.sum();
  sol.pressure_mean = m.dot(sol.p) / area;

  const Eigen::VectorXd u = sol.velocity_vector();
  const SparseMatrix S = space->stiffness();
  const double h1 = std::sqrt(u.dot(assemble_vector_mass(*space) * u) + sol.ux.dot(S * sol.ux) + sol.uy.dot(S * sol.uy));
  const Eigen::VectorXd div = B * u;
  sol.divergence = h1 > 0.0 ? div.cwiseAbs().maxCoeff() / h1 : div.cwiseAbs().maxCoeff();
  return sol;
}

Eigen::VectorXd stokes_residual(const StokesSolution& sol, const BodyForce& f) {
  const P2Space& space = *sol.space;
  const Eigen::VectorXd u = sol.velocity_vector();
  return assemble_strain_stiffness(space) * u + assemble_divergence(space).transpose() * sol.p +
         assemble_load(space, f.field);
}

ErrorNorms solution_errors(const StokesSolution& sol, const VectorField& u,
                           const std::function<Eigen::Matrix2d(const Point&)>& grad_u, const ScalarField& p,
                           int quadrature_degree) {
  const TriangleRule& q = triangle_rule(quadrature_degree);
  const P2Space& space = *sol.space;
  double eu = 0.0, eg = 0.0, dp_mean = 0.0, area = 0.0;
  for (int t = 0; t < space.mesh().triangle_count(); ++t) {
    const ElementGeometry g = space.geometry(t);
    for (size_t k = 0; k < q.w.size(); ++k) {
      const double w = q.w[k] * g.area;
      const Point x = g.point(q.bary[k]);
      dp_mean += w * (sol.pressure(t, q.bary[k]) - p(x));
      area += w;
    }
  }
  dp_mean /= area;
  double ep = 0.0;
  for (int t = 0; t < space.mesh().triangle_count(); ++t) {
    const ElementGeometry g = space.geometry(t);
    for (size_t k = 0; k < q.w.size(); ++k) {
      const double w = q.w[k] * g.area;
      const Point x = g.point(q.bary[k]);
      eu += w * (sol.velocity(t, q.bary[k]) - u(x)).squaredNorm();
      eg += w * (sol.velocity_gradient(t, q.bary[k]) - grad_u(x)).squaredNorm();
      const double dp = sol.pressure(t, q.bary[k]) - p(x) - dp_mean;
      ep += w * dp * dp;
    }
  }
  return {std::sqrt(eu), std::sqrt(eg), std::sqrt(ep)};
}

// ---------------------------------------------------------------------------
// Leray projection

struct LerayProjector::Impl {
  std::shared_ptr<const P2Space> space;
  SparseMatrix M;
  SparseMatrix B;
  std::vector<int> index;
  int free_count = 0;
  int total = 0;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
};

LerayProjector::LerayProjector(std::shared_ptr<const P2Space> space) : impl_(std::make_unique<Impl>()) {
  require(space != nullptr, ErrorKind::invalid_argument, "Leray projection needs a finite element space");
  Impl& im = *impl_;
  im.space = space;
  const int n = space->dof_count(), nv = space->vertex_count();
  im.M = assemble_vector_mass(*space);
  im.B = assemble_divergence(*space);
  const auto& mask = space->boundary_mask();
  im.index.assign(2 * static_cast<size_t>(n), -1);
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < n; ++i)
      if (!mask[i]) im.index[c * n + i] = im.free_count++;
  im.total = im.free_count + nv + 1;
  const Eigen::VectorXd m = space->p1_integrals();
  Triplets trip;
  for (int k = 0; k < im.M.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(im.M, k); it; ++it) {
      const int r = im.index[it.row()], c = im.index[it.col()];
      if (r >= 0 && c >= 0) trip.emplace_back(r, c, it.value());
    }
  for (int k = 0; k < im.B.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(im.B, k); it; ++it) {
      const int c = im.index[it.col()];
      if (c < 0) continue;
      trip.emplace_back(im.free_count + static_cast<int>(it.row()), c, it.value());
      trip.emplace_back(c, im.free_count + static_cast<int>(it.row()), it.value());
    }
  for (int k = 0; k < nv; ++k) {
    trip.emplace_back(im.free_count + k, im.total - 1, m[k]);
    trip.emplace_back(im.total - 1, im.free_count + k, m[k]);
  }
  SparseMatrix K(im.total, im.total);
  K.setFromTriplets(trip.begin(), trip.end());
  K.makeCompressed();
  im.lu.compute(K);
  if (im.lu.info() != Eigen::Success) fail(ErrorKind::solver, "singular Leray projection system");
}

LerayProjector::~LerayProjector() = default;

LerayResult LerayProjector::project(const Eigen::VectorXd& v) const {
  const Impl& im = *impl_;
  const int n = im.space->dof_count(), nv = im.space->vertex_count();
  require(v.size() == 2 * n, ErrorKind::invalid_argument, "Leray projection: field size mismatch");
  require(v.allFinite(), ErrorKind::invalid_argument, "Leray projection: field is not finite");
  const Eigen::VectorXd Mv = im.M * v;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(im.total);
  for (int r = 0; r < 2 * n; ++r)
    if (im.index[r] >= 0) rhs[im.index[r]] = Mv[r];
  const Eigen::VectorXd x = im.lu.solve(rhs);
  LerayResult out;
  out.h_part = Eigen::VectorXd::Zero(2 * n);
  for (int r = 0; r < 2 * n; ++r)
    if (im.index[r] >= 0) out.h_part[r] = x[im.index[r]];
  out.potential = x.segment(im.free_count, nv);
  out.grad_part = v - out.h_part;
  // Interior rows of M (v - h) must equal B^T q.
  const Eigen::VectorXd lhs = im.M * out.grad_part;
  const Eigen::VectorXd btq = im.B.transpose() * out.potential;
  double res = 0.0;
  for (int r = 0; r < 2 * n; ++r)
    if (im.index[r] >= 0) res = std::max(res, std::abs(lhs[r] - btq[r]));
  const double vv = v.dot(Mv);
  const double scale = Mv.cwiseAbs().maxCoeff();
  out.residual = scale > 0.0 ? res / scale : res;
  out.orthogonality = vv > 0.0 ? std::abs(out.h_part.dot(lhs)) / vv : 0.0;
  const Eigen::VectorXd div = im.B * out.h_part;
  out.divergence = scale > 0.0 ? div.cwiseAbs().maxCoeff() / std::sqrt(vv) : 0.0;
  return out;
}

LerayResult leray_project(std::shared_ptr<const P2Space> space, const Eigen::VectorXd& v) {
  return LerayProjector(std::move(space)).project(v);
}

// ---------------------------------------------------------------------------
// Poincare eigenprobe

namespace {

struct ClampedOperators {
  SparseMatrix K;
  SparseMatrix M;
};

ClampedOperators clamped_operators(const P2Space& space, const std::set<BoundaryTag>& clamped) {
  require(!clamped.empty(), ErrorKind::invalid_argument, "Poincare probe needs a nonempty clamped edge set");
  const auto fixed = space.dofs_on(clamped);
  require(!fixed.empty(), ErrorKind::invalid_argument,
          "Poincare probe: no mesh edges carry the clamped tags (constant would be infinite)");
  std::vector<int> index(static_cast<size_t>(space.dof_count()), 0);
  for (int d : fixed) index[d] = -1;
  int count = 0;
  for (auto& i : index)
    if (i == 0) i = count++;
  auto restrict_matrix = [&](const SparseMatrix& a) {
    Triplets trip;
    for (int k = 0; k < a.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
        const int r = index[it.row()], c = index[it.col()];
        if (r >= 0 && c >= 0) trip.emplace_back(r, c, it.value());
      }
    SparseMatrix out(count, count);
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
  };
  return {restrict_matrix(space.stiffness()), restrict_matrix(space.mass())};
}

}  // namespace

PoincareResult poincare_constant(const P2Space& space, const std::set<BoundaryTag>& clamped, double rho0) {
  require(rho0 > 0.0, ErrorKind::invalid_argument, "rho0 must be positive");
  const ClampedOperators ops = clamped_operators(space, clamped);
  const int n = static_cast<int>(ops.K.rows());
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(ops.K);
  if (ldlt.info() != Eigen::Success) fail(ErrorKind::solver, "clamped stiffness factorization failed");
  const int block = std::min(6, n);
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd X(n, block);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < block; ++j) X(i, j) = j == 0 ? 1.0 : u(rng);
  double lambda = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < 1000; ++it) {
    const Eigen::MatrixXd Y = ldlt.solve(ops.M * X);
    const Eigen::MatrixXd Kr = Y.transpose() * (ops.K * Y);
    const Eigen::MatrixXd Mr = Y.transpose() * (ops.M * Y);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Kr, Mr);
    if (es.info() != Eigen::Success) fail(ErrorKind::solver, "Rayleigh-Ritz step failed");
    X = Y * es.eigenvectors();
    const double next = es.eigenvalues()[0];
    const bool done = std::abs(next - lambda) <= 1e-14 * std::abs(next);
    lambda = next;
    if (done) break;
  }
  return {lambda, 1.0 / (rho0 * std::sqrt(lambda)), it + 1};
}

double poincare_lambda_dense(const P2Space& space, const std::set<BoundaryTag>& clamped) {
  const ClampedOperators ops = clamped_operators(space, clamped);
  require(ops.K.rows() <= 4000, ErrorKind::invalid_argument, "dense eigen reference limited to 4000 dofs");
  const Eigen::MatrixXd K(ops.K), M(ops.M);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, M, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) fail(ErrorKind::solver, "dense generalized eigensolver failed");
  return es.eigenvalues()[0];
}

void write_solution(const std::filesystem::path& velocity_path, const std::filesystem::path& pressure_path,
                    const StokesSolution& sol) {
  std::ofstream v(velocity_path);
  require(static_cast<bool>(v), ErrorKind::io, "cannot write " + velocity_path.string());
  v << std::setprecision(17);
  for (int i = 0; i < sol.ux.size(); ++i) v << i << ' ' << sol.ux[i] << ' ' << sol.uy[i] << '\n';
  std::ofstream p(pressure_path);
  require(static_cast<bool>(p), ErrorKind::io, "cannot write " + pressure_path.string());
  p << std::setprecision(17);
  for (int i = 0; i < sol.p.size(); ++i) p << i << ' ' << sol.p[i] << '\n';
}

}  // namespace stokeslab
