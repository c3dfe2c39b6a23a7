#include "stokeslab/norms.hpp"

#include "stokeslab/error.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <map>

namespace stokeslab {

std::string to_string(NormKind kind) {
  switch (kind) {
    case NormKind::l2: return "L2";
    case NormKind::h1: return "H1";
    case NormKind::h_half_boundary: return "H_half_boundary";
    case NormKind::h_minus_half_boundary: return "H_minus_half_boundary";
    case NormKind::h_minus_one: return "H_minus_one";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// BoundaryTraceSpace

BoundaryTraceSpace::BoundaryTraceSpace(std::shared_ptr<const P2Space> space, std::set<BoundaryTag> tags,
                                       bool include_interface)
    : space_(std::move(space)), tags_(std::move(tags)) {
  require(space_ != nullptr, ErrorKind::invalid_argument, "trace space needs a finite element space");
  std::vector<BoundaryEdgeDofs> chosen;
  for (const auto& e : space_->boundary_edges())
    if (tags_.count(e.tag) && (include_interface || !e.interface)) chosen.push_back(e);
  require(!chosen.empty(), ErrorKind::invalid_argument, "no boundary edges carry the requested tags");

  // Order the edges into chains: open chains first, then closed loops.
  std::map<int, int> by_start;
  std::set<int> ends;
  for (int i = 0; i < static_cast<int>(chosen.size()); ++i) {
    require(!by_start.count(chosen[i].dofs[0]), ErrorKind::invariant_violation, "boundary edges branch");
    by_start[chosen[i].dofs[0]] = i;
    ends.insert(chosen[i].dofs[2]);
  }
  std::vector<char> used(chosen.size(), 0);
  auto walk = [&](int first) {
    for (int i = first; i >= 0 && !used[i];) {
      used[i] = 1;
      edges_.push_back(chosen[i]);
      const auto it = by_start.find(chosen[i].dofs[2]);
      i = it == by_start.end() ? -1 : it->second;
    }
  };
  for (int i = 0; i < static_cast<int>(chosen.size()); ++i)
    if (!ends.count(chosen[i].dofs[0])) walk(i);
  for (int i = 0; i < static_cast<int>(chosen.size()); ++i)
    if (!used[i]) walk(i);

  local_.assign(static_cast<size_t>(space_->dof_count()), -1);
  auto add = [&](int d, double s) {
    if (local_[d] >= 0) return local_[d];
    local_[d] = static_cast<int>(dofs_.size());
    dofs_.push_back(d);
    arclength_.push_back(s);
    return local_[d];
  };
  const int approx = static_cast<int>(2 * edges_.size() + 2);
  dofs_.reserve(approx);
  std::vector<std::array<int, 3>> loc;
  for (const auto& e : edges_) {
    const int a = add(e.dofs[0], length_);
    const int m = add(e.dofs[1], length_ + 0.5 * e.length);
    const int b = add(e.dofs[2], length_ + e.length);
    loc.push_back({a, m, b});
    length_ += e.length;
  }
  const int n = size();
  mass_ = Eigen::MatrixXd::Zero(n, n);
  stiffness_ = Eigen::MatrixXd::Zero(n, n);
  Eigen::Matrix3d mref, kref;
  mref << 4, 2, -1, 2, 16, 2, -1, 2, 4;
  kref << 7, -8, 1, -8, 16, -8, 1, -8, 7;
  for (size_t k = 0; k < edges_.size(); ++k) {
    const double len = edges_[k].length;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        mass_(loc[k][i], loc[k][j]) += len / 30.0 * mref(i, j);
        stiffness_(loc[k][i], loc[k][j]) += kref(i, j) / (3.0 * len);
      }
  }
}

int BoundaryTraceSpace::local(int global_dof) const {
  return global_dof >= 0 && global_dof < static_cast<int>(local_.size()) ? local_[global_dof] : -1;
}

void BoundaryTraceSpace::decompose() const {
  std::call_once(once_, [this] {
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(stiffness_, mass_);
    if (es.info() != Eigen::Success) fail(ErrorKind::solver, "boundary eigendecomposition failed");
    eigenvalues_ = es.eigenvalues().cwiseMax(0.0);
    eigenvectors_ = es.eigenvectors();
  });
}

const Eigen::VectorXd& BoundaryTraceSpace::eigenvalues() const {
  decompose();
  return eigenvalues_;
}

const Eigen::MatrixXd& BoundaryTraceSpace::eigenvectors() const {
  decompose();
  return eigenvectors_;
}

Eigen::VectorXd BoundaryTraceSpace::restrict(const Eigen::VectorXd& global) const {
  require(global.size() == space_->dof_count(), ErrorKind::invalid_argument,
          "field does not live on the trace space's mesh");
  Eigen::VectorXd out(size());
  for (int i = 0; i < size(); ++i) out[i] = global[dofs_[i]];
  return out;
}

TraceField restrict_trace(const BoundaryTraceSpace& trace, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  TraceField g(trace.size(), 2);
  g.col(0) = trace.restrict(x);
  g.col(1) = trace.restrict(y);
  return g;
}

// ---------------------------------------------------------------------------
// Norms

namespace {

void check_rho0(double rho0) {
  require(rho0 > 0.0 && std::isfinite(rho0), ErrorKind::invalid_argument, "rho0 must be positive");
}

void check_trace(const BoundaryTraceSpace& trace, const TraceField& g) {
  require(g.rows() == trace.size(), ErrorKind::invalid_argument,
          "trace field does not match the boundary region (" + std::to_string(g.rows()) + " vs " +
              std::to_string(trace.size()) + " dofs)");
}

double spectral(const BoundaryTraceSpace& trace, const TraceField& g, double rho0, double exponent) {
  check_rho0(rho0);
  check_trace(trace, g);
  const Eigen::MatrixXd c = trace.eigenvectors().transpose() * (trace.mass() * g);
  const Eigen::VectorXd& lam = trace.eigenvalues();
  double s = 0.0;
  for (int k = 0; k < lam.size(); ++k)
    s += std::pow(1.0 + rho0 * rho0 * lam[k], exponent) * c.row(k).squaredNorm();
  return std::sqrt(s / rho0);
}

// Componentwise quadratic form with a scalar matrix.
double vector_form(const Eigen::VectorXd& u, const SparseMatrix& a) {
  const int n = static_cast<int>(a.rows());
  if (u.size() == n) return u.dot(a * u);
  require(u.size() == 2 * n, ErrorKind::invalid_argument, "field does not live on the mesh");
  const auto x = u.head(n), y = u.tail(n);
  return x.dot(a * x) + y.dot(a * y);
}

}  // namespace

double l2_norm(const P2Space& space, const Eigen::VectorXd& u, double rho0) {
  check_rho0(rho0);
  return std::sqrt(std::max(0.0, vector_form(u, space.mass()))) / rho0;
}

double h1_norm(const P2Space& space, const Eigen::VectorXd& u, double rho0) {
  check_rho0(rho0);
  const double m = vector_form(u, space.mass());
  const double k = vector_form(u, space.stiffness());
  return std::sqrt(std::max(0.0, m + rho0 * rho0 * k)) / rho0;
}

double l2_norm_p1(const P2Space& space, const Eigen::VectorXd& p, double rho0) {
  check_rho0(rho0);
  require(p.size() == space.vertex_count(), ErrorKind::invalid_argument, "pressure does not live on the mesh");
  return std::sqrt(std::max(0.0, p.dot(space.p1_mass() * p))) / rho0;
}

double boundary_l2_norm(const BoundaryTraceSpace& trace, const TraceField& g, double rho0) {
  check_rho0(rho0);
  check_trace(trace, g);
  const double s = (g.transpose() * trace.mass() * g).trace();
  return std::sqrt(std::max(0.0, s) / rho0);
}

double h_half_norm(const BoundaryTraceSpace& trace, const TraceField& g, double rho0) {
  return spectral(trace, g, rho0, 0.5);
}

double h_minus_half_norm(const BoundaryTraceSpace& trace, const TraceField& psi, double rho0) {
  return spectral(trace, psi, rho0, -0.5);
}

double boundary_pairing(const BoundaryTraceSpace& trace, const TraceField& psi, const TraceField& v, double rho0) {
  check_rho0(rho0);
  check_trace(trace, psi);
  check_trace(trace, v);
  return (psi.transpose() * trace.mass() * v).trace() / rho0;
}

struct DualNorm::Impl {
  std::vector<int> index;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  int n = 0;
};

DualNorm::DualNorm(std::shared_ptr<const P2Space> space, const std::set<BoundaryTag>& clamped)
    : impl_(std::make_unique<Impl>()) {
  require(space != nullptr, ErrorKind::invalid_argument, "dual norm needs a finite element space");
  const auto fixed = space->dofs_on(clamped);
  require(!fixed.empty(), ErrorKind::invalid_argument, "dual norm needs clamped boundary dofs");
  Impl& im = *impl_;
  im.n = space->dof_count();
  im.index.assign(static_cast<size_t>(im.n), 0);
  for (int d : fixed) im.index[d] = -1;
  int count = 0;
  for (auto& i : im.index)
    if (i == 0) i = count++;
  const SparseMatrix k = space->stiffness();
  std::vector<Eigen::Triplet<double>> trip;
  for (int c = 0; c < k.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(k, c); it; ++it) {
      const int r = im.index[it.row()], s = im.index[it.col()];
      if (r >= 0 && s >= 0) trip.emplace_back(r, s, it.value());
    }
  SparseMatrix kr(count, count);
  kr.setFromTriplets(trip.begin(), trip.end());
  im.ldlt.compute(kr);
  if (im.ldlt.info() != Eigen::Success) fail(ErrorKind::solver, "clamped Poisson factorization failed");
}

DualNorm::~DualNorm() = default;

Eigen::VectorXd DualNorm::riesz(const Eigen::VectorXd& b) const {
  const Impl& im = *impl_;
  require(b.size() == im.n, ErrorKind::invalid_argument, "functional does not live on the mesh");
  Eigen::VectorXd br(im.ldlt.rows());
  for (int i = 0; i < im.n; ++i)
    if (im.index[i] >= 0) br[im.index[i]] = b[i];
  const Eigen::VectorXd zr = im.ldlt.solve(br);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(im.n);
  for (int i = 0; i < im.n; ++i)
    if (im.index[i] >= 0) z[i] = zr[im.index[i]];
  return z;
}

double DualNorm::operator()(const Eigen::VectorXd& b) const {
  const int n = impl_->n;
  require(b.size() == n || b.size() == 2 * n, ErrorKind::invalid_argument, "functional does not live on the mesh");
  double s = 0.0;
  for (int c = 0; c < b.size() / n; ++c) {
    const Eigen::VectorXd bc = b.segment(c * n, n);
    s += bc.dot(riesz(bc));
  }
  return std::sqrt(std::max(0.0, s));
}

NormReport norm(NormKind kind, const BoundaryTraceSpace& trace, const TraceField& g, double rho0,
                const std::string& object) {
  double v = 0.0;
  switch (kind) {
    case NormKind::l2: v = boundary_l2_norm(trace, g, rho0); break;
    case NormKind::h_half_boundary: v = h_half_norm(trace, g, rho0); break;
    case NormKind::h_minus_half_boundary: v = h_minus_half_norm(trace, g, rho0); break;
    default: fail(ErrorKind::invalid_argument, to_string(kind) + " is not a boundary norm");
  }
  return {kind, v, rho0, object};
}

NormReport norm(NormKind kind, const P2Space& space, const Eigen::VectorXd& u, double rho0,
                const std::string& object) {
  double v = 0.0;
  switch (kind) {
    case NormKind::l2: v = l2_norm(space, u, rho0); break;
    case NormKind::h1: v = h1_norm(space, u, rho0); break;
    default: fail(ErrorKind::invalid_argument, to_string(kind) + " is not a domain norm on P2 fields");
  }
  return {kind, v, rho0, object};
}

double frequency_ratio(const BoundaryTraceSpace& trace, const TraceField& g, double rho0) {
  const double l2 = boundary_l2_norm(trace, g, rho0);
  require(l2 > 0.0, ErrorKind::invalid_argument, "frequency ratio undefined for zero data");
  return h_half_norm(trace, g, rho0) / l2;
}

EquivalenceReport equivalence_check(const BoundaryTraceSpace& gamma, const BoundaryTraceSpace& boundary,
                                    const DirichletData& g, double rho0) {
  require(&gamma.space() == &boundary.space(), ErrorKind::invalid_argument,
          "equivalence check needs both traces on the same mesh");
  const TraceField on_gamma = restrict_trace(gamma, g.gx, g.gy);
  const TraceField on_boundary = restrict_trace(boundary, g.gx, g.gy);
  EquivalenceReport r{h_half_norm(gamma, on_gamma, rho0), h_half_norm(boundary, on_boundary, rho0), 0.0, false};
  r.ratio = r.gamma_norm > 0.0 ? r.boundary_norm / r.gamma_norm : 0.0;
  // Values of g off the arc, or on the arc's end edges, mean the support is
  // not compactly inside it.
  for (int i = 0; i < boundary.size(); ++i) {
    const int d = boundary.dofs()[i];
    if (gamma.local(d) < 0 && on_boundary.row(i).squaredNorm() > 0.0) r.touches_endpoint = true;
  }
  std::set<int> starts, ends;
  for (const auto& e : gamma.edges()) {
    starts.insert(e.dofs[0]);
    ends.insert(e.dofs[2]);
  }
  for (const auto& e : gamma.edges()) {
    const bool open_end = !ends.count(e.dofs[0]) || !starts.count(e.dofs[2]);
    if (!open_end) continue;
    for (int d : e.dofs)
      if (std::hypot(g.gx[d], g.gy[d]) > 0.0) r.touches_endpoint = true;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Energy estimate (declared with the solver)

EnergyEstimate energy_estimate_check(const StokesSolution& sol, const DirichletData& g, const BodyForce& f,
                                     double rho0) {
  check_rho0(rho0);
  const auto& space = sol.space;
  std::set<BoundaryTag> all;
  for (const auto& e : space->boundary_edges())
    if (!e.interface) all.insert(e.tag);
  const BoundaryTraceSpace boundary(space, all);
  const double gnorm = h_half_norm(boundary, restrict_trace(boundary, g.gx, g.gy), rho0);
  double fnorm = 0.0;
  if (!f.is_zero()) fnorm = DualNorm(space, all)(assemble_load(*space, f.field));
  const Eigen::VectorXd m = space->p1_integrals();
  const Eigen::VectorXd centered = sol.p - Eigen::VectorXd::Constant(sol.p.size(), m.dot(sol.p) / m.sum());
  const double unorm = h1_norm(*space, sol.velocity_vector(), rho0) + rho0 * l2_norm_p1(*space, centered, rho0);
  require(std::isfinite(unorm) && std::isfinite(gnorm) && std::isfinite(fnorm), ErrorKind::invariant_violation,
          "energy estimate produced a non-finite value");
  const double data = rho0 * fnorm + gnorm;
  if (data == 0.0) {
    require(unorm <= 1e-12, ErrorKind::invariant_violation, "zero data produced a nonzero solution");
    return {0.0, unorm, 0.0};
  }
  return {unorm / data, unorm, data};
}

}  // namespace stokeslab
