#include "stokeslab/cauchy.hpp"

#include "stokeslab/error.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <unordered_map>

namespace stokeslab {

namespace {

// Local trace indices of open chain ends, flagged true at chain starts.
std::vector<std::pair<int, bool>> chain_ends(const BoundaryTraceSpace& gamma) {
  std::unordered_map<int, int> as_start, as_end;
  for (const auto& e : gamma.edges()) {
    ++as_start[e.dofs[0]];
    ++as_end[e.dofs[2]];
  }
  std::vector<std::pair<int, bool>> ends;
  for (const auto& e : gamma.edges()) {
    if (!as_end.count(e.dofs[0])) ends.emplace_back(gamma.local(e.dofs[0]), true);
    if (!as_start.count(e.dofs[2])) ends.emplace_back(gamma.local(e.dofs[2]), false);
  }
  return ends;
}

}  // namespace

TraceField stress_trace(const StokesSolution& sol, const BoundaryTraceSpace& gamma, const BodyForce& f) {
  require(&gamma.space() == sol.space.get(), ErrorKind::invalid_argument,
          "stress trace: the arc does not belong to the solution's mesh");
  require(gamma.size() > 0, ErrorKind::invalid_argument, "stress trace: empty arc");
  const int n = sol.space->dof_count();
  const int m = gamma.size();
  const Eigen::VectorXd r = stokes_residual(sol, f);
  Eigen::MatrixXd a = gamma.mass();
  TraceField rhs(m, 2);
  for (int i = 0; i < m; ++i) {
    rhs(i, 0) = r[gamma.dofs()[i]];
    rhs(i, 1) = r[n + gamma.dofs()[i]];
  }
  const auto& s = gamma.arclength();
  // Trace dofs are numbered along each chain, so the neighbours of an end are
  // the next three indices inward.
  for (const auto& [end, first] : chain_ends(gamma)) {
    std::array<int, 3> nb{};
    for (int k = 0; k < 3; ++k) nb[k] = first ? end + 1 + k : end - 1 - k;
    for (int k : nb)
      require(k >= 0 && k < m, ErrorKind::invalid_argument, "stress trace: arc needs at least two edges");
    a.row(end).setZero();
    a(end, end) = 1.0;
    for (int k = 0; k < 3; ++k) {
      double l = 1.0;
      for (int j = 0; j < 3; ++j)
        if (j != k) l *= (s[end] - s[nb[j]]) / (s[nb[k]] - s[nb[j]]);
      a(end, nb[k]) = -l;
    }
    rhs.row(end).setZero();
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  TraceField psi = lu.solve(rhs);
  require(psi.allFinite(), ErrorKind::solver, "stress trace system is singular");
  return psi;
}

TraceField pointwise_stress_trace(const StokesSolution& sol, const BoundaryTraceSpace& gamma) {
  const Mesh& mesh = sol.space->mesh();
  std::unordered_map<std::uint64_t, std::pair<int, int>> owner;  // edge -> (triangle, local start)
  for (int t = 0; t < mesh.triangle_count(); ++t)
    for (int k = 0; k < 3; ++k) {
      const auto a = static_cast<std::uint64_t>(mesh.triangles[t][k]);
      const auto b = static_cast<std::uint64_t>(mesh.triangles[t][(k + 1) % 3]);
      owner[(a << 32) | b] = {t, k};
      owner[(b << 32) | a] = {t, k};
    }
  TraceField psi = TraceField::Zero(gamma.size(), 2);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(gamma.size());
  for (const auto& e : gamma.edges()) {
    const auto key = (static_cast<std::uint64_t>(e.dofs[0]) << 32) | static_cast<std::uint64_t>(e.dofs[2]);
    const auto it = owner.find(key);
    require(it != owner.end(), ErrorKind::invariant_violation, "boundary edge without a triangle");
    const int t = it->second.first;
    const auto& tri = mesh.triangles[t];
    int ia = -1, ib = -1;
    for (int k = 0; k < 3; ++k) {
      if (tri[k] == e.dofs[0]) ia = k;
      if (tri[k] == e.dofs[2]) ib = k;
    }
    for (int j = 0; j < 3; ++j) {
      std::array<double, 3> l{0, 0, 0};
      if (j == 0) l[ia] = 1.0;
      if (j == 2) l[ib] = 1.0;
      if (j == 1) l[ia] = l[ib] = 0.5;
      const Eigen::Matrix2d g = sol.velocity_gradient(t, l);
      const Eigen::Matrix2d sigma = g + g.transpose() - sol.pressure(t, l) * Eigen::Matrix2d::Identity();
      const int loc = gamma.local(e.dofs[j]);
      psi.row(loc) += (sigma * e.normal).transpose();
      count[loc] += 1.0;
    }
  }
  for (int i = 0; i < gamma.size(); ++i) psi.row(i) /= count[i];
  return psi;
}

CauchyData measure_cauchy(const StokesSolution& sol, std::shared_ptr<const BoundaryTraceSpace> gamma, double rho0,
                          const BodyForce& f) {
  CauchyData c;
  c.g = restrict_trace(*gamma, sol.ux, sol.uy);
  c.psi = stress_trace(sol, *gamma, f);
  c.F = boundary_l2_norm(*gamma, c.g, rho0) > 0.0 ? frequency_ratio(*gamma, c.g, rho0) : 0.0;
  c.gamma = std::move(gamma);
  return c;
}

Vec2 evaluate_trace(const BoundaryTraceSpace& gamma, const TraceField& v, double s) {
  require(v.rows() == gamma.size(), ErrorKind::invalid_argument, "trace size mismatch");
  double start = 0.0;
  const auto& edges = gamma.edges();
  for (size_t k = 0; k < edges.size(); ++k) {
    const double len = edges[k].length;
    if (s <= start + len || k + 1 == edges.size()) {
      const double t = std::clamp((s - start) / len, 0.0, 1.0);
      const double n0 = (1 - t) * (1 - 2 * t), nm = 4 * t * (1 - t), n1 = t * (2 * t - 1);
      const auto& d = edges[k].dofs;
      return n0 * v.row(gamma.local(d[0])).transpose() + nm * v.row(gamma.local(d[1])).transpose() +
             n1 * v.row(gamma.local(d[2])).transpose();
    }
    start += len;
  }
  fail(ErrorKind::invalid_argument, "empty trace");
}

TraceField transfer_trace(const BoundaryTraceSpace& from, const TraceField& v, const BoundaryTraceSpace& to) {
  const double lf = from.length(), lt = to.length();
  require(std::abs(lf - lt) <= 1e-2 * std::max(lf, lt), ErrorKind::invalid_argument,
          "mismatched arc discretizations (lengths differ by more than 1%)");
  TraceField out(to.size(), 2);
  for (int i = 0; i < to.size(); ++i) out.row(i) = evaluate_trace(from, v, to.arclength()[i] * lf / lt).transpose();
  return out;
}

namespace {

bool same_discretization(const BoundaryTraceSpace& a, const BoundaryTraceSpace& b) {
  if (&a == &b) return true;
  if (a.size() != b.size()) return false;
  for (int i = 0; i < a.size(); ++i)
    if ((a.space().dof_point(a.dofs()[i]) - b.space().dof_point(b.dofs()[i])).norm() > 1e-12) return false;
  return true;
}

}  // namespace

double epsilon_discrepancy(const CauchyData& a, const CauchyData& b, double rho0) {
  require(a.gamma && b.gamma, ErrorKind::invalid_argument, "Cauchy data without an arc");
  if (same_discretization(*a.gamma, *b.gamma)) return rho0 * h_minus_half_norm(*a.gamma, a.psi - b.psi, rho0);
  const bool a_coarse = a.gamma->size() <= b.gamma->size();
  const CauchyData& coarse = a_coarse ? a : b;
  const CauchyData& fine = a_coarse ? b : a;
  const TraceField moved = transfer_trace(*fine.gamma, fine.psi, *coarse.gamma);
  return rho0 * h_minus_half_norm(*coarse.gamma, coarse.psi - moved, rho0);
}

void write_stress_trace(const std::filesystem::path& path, const BoundaryTraceSpace& gamma, const TraceField& psi) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
  std::vector<int> order(gamma.size());
  for (int i = 0; i < gamma.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return gamma.arclength()[x] < gamma.arclength()[y]; });
  out << std::setprecision(17);
  for (int i : order) out << gamma.arclength()[i] << ' ' << psi(i, 0) << ' ' << psi(i, 1) << '\n';
}

}  // namespace stokeslab
