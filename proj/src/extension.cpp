#include "stokeslab/extension.hpp"

#include "stokeslab/error.hpp"
#include "stokeslab/quadrature.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace stokeslab {

namespace {

double wrap(double s) { return s - std::floor(s); }

// Arc pieces of a sampled polygon are split at its corners so the mesher keeps them.
void add_arc(PlanarDomain& d, const std::shared_ptr<const BoundaryCurve>& c, double s0, double s1, BoundaryTag tag) {
  if (s1 - s0 <= 1e-12) return;
  std::vector<double> cuts{s0};
  if (!c->is_analytic()) {
    const auto pts = c->samples();
    const int n = c->sample_count();
    for (int i = 0; i < n; ++i) {
      const Vec2 in = pts[i] - pts[(i + n - 1) % n], out = pts[i + 1] - pts[i];
      if (std::abs(std::atan2(cross(in, out), in.dot(out))) < 0.1) continue;
      for (int k = -1; k <= 2; ++k) {
        const double q = c->sample_param(i) + k;
        if (q > s0 + 1e-9 && q < s1 - 1e-9) cuts.push_back(q);
      }
    }
    std::sort(cuts.begin(), cuts.end());
  }
  cuts.push_back(s1);
  for (size_t k = 0; k + 1 < cuts.size(); ++k) d.pieces.push_back(BoundaryPiece::arc(c, cuts[k], cuts[k + 1], tag));
}

double arc_length_between(const BoundaryCurve& c, double s0, double s1) {
  double len = c.arclength_at(wrap(s1)) - c.arclength_at(wrap(s0));
  if (len < 0.0 || (len == 0.0 && s1 > s0)) len += c.length();
  return len;
}

// Walks from the anchor until the chart coordinate x' reaches +-rho00.
double chart_crossing(const DomainSpec& dom, const ChartFrame& frame, double anchor, double rho00, double height,
                      int direction) {
  const BoundaryCurve& c = dom.outer;
  const double ds = rho00 / (64.0 * c.length());
  double s = anchor, prev = 0.0;
  for (int it = 0; it < 1000000; ++it) {
    const double next = s + direction * ds;
    require(dom.gamma.contains(wrap(next)), ErrorKind::geometry, "Gamma0 leaves Gamma: Gamma must contain the chart box");
    const Point x = frame.to_chart(c.point(next));
    require(std::abs(x.y()) < height, ErrorKind::geometry, "boundary leaves the box height: chart construction failed");
    require(direction * x.x() > prev, ErrorKind::geometry, "boundary is not a graph over the chart at P0");
    if (direction * x.x() >= rho00) {
      double lo = s, hi = next;
      for (int k = 0; k < 80; ++k) {
        const double mid = 0.5 * (lo + hi);
        (direction * frame.to_chart(c.point(mid)).x() < rho00 ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    prev = direction * x.x();
    s = next;
  }
  fail(ErrorKind::geometry, "chart crossing not found");
}

std::vector<int> region_triangles(const Mesh& m, int region) {
  std::vector<int> t;
  for (int k = 0; k < m.triangle_count(); ++k)
    if ((m.regions.empty() ? 0 : m.regions[k]) == region) t.push_back(k);
  return t;
}

std::vector<int> dof_map(const P2Space& sub, const P2Space& parent, const std::vector<int>& parent_triangles) {
  std::vector<int> map(static_cast<size_t>(sub.dof_count()), -1);
  for (size_t k = 0; k < parent_triangles.size(); ++k) {
    const auto& a = sub.element(static_cast<int>(k));
    const auto& b = parent.element(parent_triangles[k]);
    for (int i = 0; i < 6; ++i) map[a[i]] = b[i];
  }
  return map;
}

std::vector<int> inverse_map(const std::vector<int>& map, int size) {
  std::vector<int> inv(static_cast<size_t>(size), -1);
  for (size_t i = 0; i < map.size(); ++i) inv[map[i]] = static_cast<int>(i);
  return inv;
}

// Oriented boundary edges of a P2 space with their owning triangle.
struct OwnedEdge {
  const BoundaryEdgeDofs* edge;
  int triangle;
};

std::vector<OwnedEdge> owned_edges(const P2Space& space, const std::function<bool(const BoundaryEdgeDofs&)>& keep) {
  std::unordered_map<std::uint64_t, int> owner;
  const Mesh& m = space.mesh();
  for (int t = 0; t < m.triangle_count(); ++t)
    for (int i = 0; i < 3; ++i) {
      const auto a = static_cast<std::uint64_t>(std::min(m.triangles[t][i], m.triangles[t][(i + 1) % 3]));
      const auto b = static_cast<std::uint64_t>(std::max(m.triangles[t][i], m.triangles[t][(i + 1) % 3]));
      owner.emplace((a << 32) | b, t);
    }
  std::vector<OwnedEdge> out;
  for (const auto& e : space.boundary_edges()) {
    if (!keep(e)) continue;
    const auto a = static_cast<std::uint64_t>(std::min(e.dofs[0], e.dofs[2]));
    const auto b = static_cast<std::uint64_t>(std::max(e.dofs[0], e.dofs[2]));
    out.push_back({&e, owner.at((a << 32) | b)});
  }
  return out;
}

// Adds integral_e ((grad u + grad u^T) nu) . phi_j over the given edges.
void add_strain_flux(const StokesSolution& sol, const std::vector<OwnedEdge>& edges, Eigen::VectorXd& out) {
  const P2Space& space = *sol.space;
  const int n = space.dof_count();
  const LineRule& q = gauss_legendre(4);
  for (const auto& [e, t] : edges) {
    const ElementGeometry g = space.geometry(t);
    const Point xa = space.dof_point(e->dofs[0]), xb = space.dof_point(e->dofs[2]);
    for (size_t k = 0; k < q.x.size(); ++k) {
      const double s = q.x[k];
      const Point x = (1 - s) * xa + s * xb;
      const Eigen::Matrix2d grad = sol.velocity_gradient(t, barycentric(x, g.x[0], g.x[1], g.x[2]));
      const Vec2 traction = (grad + grad.transpose()) * e->normal;
      const std::array<double, 3> phi{(1 - s) * (1 - 2 * s), 4 * s * (1 - s), s * (2 * s - 1)};
      for (int j = 0; j < 3; ++j) {
        out[e->dofs[j]] += q.w[k] * e->length * phi[j] * traction.x();
        out[n + e->dofs[j]] += q.w[k] * e->length * phi[j] * traction.y();
      }
    }
  }
}

Vec2 p1_gradient(const ElementGeometry& g, const std::array<int, 6>& el, const Eigen::VectorXd& p) {
  return p[el[0]] * g.grad_lambda[0] + p[el[1]] * g.grad_lambda[1] + p[el[2]] * g.grad_lambda[2];
}

void scatter(const Eigen::VectorXd& local, const std::vector<int>& map, int n_parent, Eigen::VectorXd& out) {
  const int n = static_cast<int>(map.size());
  for (int i = 0; i < n; ++i) {
    out[map[i]] += local[i];
    out[n_parent + map[i]] += local[n + i];
  }
}

}  // namespace

BoxGeometry build_box(const DomainSpec& domain, double anchor) {
  require(domain.gamma.contains(wrap(anchor)), ErrorKind::geometry, "P0 does not lie on Gamma");
  require(domain.rho0 > 0.0 && domain.M0 > 0.0, ErrorKind::invalid_argument, "box needs rho0 > 0 and M0 > 0");
  BoxGeometry box;
  const BoundaryCurve& outer = domain.outer;
  const Vec2 nu = outer.outward_normal(anchor);
  box.frame = {outer.point(anchor), outer.tangent(anchor), -nu};
  box.anchor = anchor;
  box.rho00 = domain.rho0 / std::sqrt(1.0 + domain.M0 * domain.M0);
  box.height = domain.M0 * box.rho00;
  box.s_begin = chart_crossing(domain, box.frame, anchor, box.rho00, box.height, -1);
  box.s_end = chart_crossing(domain, box.frame, anchor, box.rho00, box.height, +1);
  box.gamma0_length = arc_length_between(outer, box.s_begin, box.s_end);
  box.p_star = box.frame.origin + 0.25 * box.rho00 * nu;

  const ChartFrame frame = box.frame;
  const double rho00 = box.rho00, height = box.height;
  auto in_box = [frame, rho00, height](const Point& x, double slack) {
    const Point c = frame.to_chart(x);
    return std::abs(c.x()) < rho00 + slack && c.y() > -height - slack && c.y() < height + slack;
  };
  const double tol = 1e-9 * outer.diameter();
  for (int i = 0; i < outer.sample_count(); ++i) {
    const double q = box.s_begin + wrap(outer.sample_param(i) - box.s_begin);
    const bool on_gamma0 = q <= box.s_end + 1e-12;
    require(on_gamma0 || !in_box(outer.samples()[i], -tol), ErrorKind::geometry,
            "outer boundary re-enters the box Q(P0)");
  }
  if (domain.obstacle)
    for (const auto& p : domain.obstacle->samples())
      require(!in_box(p, tol), ErrorKind::geometry, "the obstacle meets the box Q(P0)");

  PlanarDomain& d = box.extended;
  auto outer_ptr = std::make_shared<const BoundaryCurve>(outer);
  add_arc(d, outer_ptr, box.s_begin, box.s_end, BoundaryTag::gamma);
  const double span = domain.gamma.span();
  if (span >= 1.0) {
    add_arc(d, outer_ptr, box.s_end, box.s_begin + 1.0, BoundaryTag::gamma);
  } else {
    const double g0 = box.s_begin - wrap(box.s_begin - domain.gamma.begin);
    add_arc(d, outer_ptr, box.s_end, g0 + span, BoundaryTag::gamma);
    add_arc(d, outer_ptr, g0 + span, g0 + 1.0, BoundaryTag::outer_rest);
    add_arc(d, outer_ptr, g0 + 1.0, box.s_begin + 1.0, BoundaryTag::gamma);
  }
  if (domain.obstacle)
    d.pieces.push_back(BoundaryPiece::arc(std::make_shared<const BoundaryCurve>(*domain.obstacle), 0.0, 1.0,
                                          BoundaryTag::obstacle));
  const Point pa = outer.point(box.s_begin), pb = outer.point(box.s_end);
  const Point ca = frame.from_chart({-rho00, -height}), cb = frame.from_chart({rho00, -height});
  d.pieces.push_back(BoundaryPiece::segment(pb, cb, BoundaryTag::box));
  d.pieces.push_back(BoundaryPiece::segment(cb, ca, BoundaryTag::box));
  d.pieces.push_back(BoundaryPiece::segment(ca, pa, BoundaryTag::box));
  d.region = [domain, in_box](const Point& x) {
    if (domain.contains(x)) return 0;
    return in_box(x, 0.0) && !domain.outer.contains(x) ? 1 : -1;
  };
  return box;
}

BoxGeometry build_box(const DomainSpec& domain) { return build_box(domain, domain.anchor); }

ExtendedDomain mesh_extended_domain(const DomainSpec& domain, const BoxGeometry& box, double h_target,
                                    int refinements) {
  ExtendedDomain ext;
  ext.box = box;
  ext.rho0 = domain.rho0;
  auto tilde_mesh = std::make_shared<const Mesh>(refine(triangulate(box.extended, h_target), refinements));
  ext.tilde = std::make_shared<const P2Space>(tilde_mesh);
  for (int region = 0; region < 2; ++region) {
    Submesh sub = extract_region(*tilde_mesh, region);
    require(sub.mesh.triangle_count() > 0, ErrorKind::mesh, region == 0 ? "E has no triangles" : "E- has no triangles");
    auto space = std::make_shared<const P2Space>(std::make_shared<const Mesh>(std::move(sub.mesh)));
    auto map = dof_map(*space, *ext.tilde, region_triangles(*tilde_mesh, region));
    (region == 0 ? ext.inner : ext.minus) = space;
    (region == 0 ? ext.inner_to_tilde : ext.minus_to_tilde) = std::move(map);
  }
  // Gamma0 dofs of E- must be shared with E.
  const auto from_inner = inverse_map(ext.inner_to_tilde, ext.tilde->dof_count());
  int shared = 0;
  for (int d : ext.minus->dofs_on({BoundaryTag::gamma})) {
    require(from_inner[ext.minus_to_tilde[d]] >= 0, ErrorKind::mesh, "E- and E do not match along Gamma0");
    ++shared;
  }
  require(shared >= 3, ErrorKind::mesh, "Gamma0 is not resolved by the mesh");
  return ext;
}

VelocityExtension extend_velocity(const ExtendedDomain& ext, const StokesSolution& u) {
  require(u.space == ext.inner, ErrorKind::invalid_argument, "solution does not live on the E part of E~");
  const P2Space& minus = *ext.minus;
  const int n = minus.dof_count();
  const auto from_inner = inverse_map(ext.inner_to_tilde, ext.tilde->dof_count());
  DirichletData g{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (int d = 0; d < n; ++d) {
    if (!minus.boundary_mask()[d]) continue;
    const int i = from_inner[ext.minus_to_tilde[d]];
    if (i < 0) continue;
    g.gx[d] = u.ux[i];
    g.gy[d] = u.uy[i];
  }
  VelocityExtension out;
  const FluxMeasure flux = boundary_flux(minus, g);
  if (std::abs(flux.flux) > 1e-14 * std::max(flux.scale, 1e-300)) {
    // Normal outflow through the bottom side with a quadratic profile.
    const ChartFrame& frame = ext.box.frame;
    const double tol = 1e-9 * ext.box.rho00;
    DirichletData bump{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    for (const auto& e : minus.boundary_edges()) {
      if (e.tag != BoundaryTag::box) continue;
      const double ya = frame.to_chart(minus.dof_point(e.dofs[0])).y(), yb = frame.to_chart(minus.dof_point(e.dofs[2])).y();
      if (std::abs(ya + ext.box.height) > tol || std::abs(yb + ext.box.height) > tol) continue;
      for (int d : e.dofs) {
        const double xi = frame.to_chart(minus.dof_point(d)).x() / ext.box.rho00;
        const Vec2 v = (1.0 - xi * xi) * -frame.inward;
        bump.gx[d] = v.x();
        bump.gy[d] = v.y();
      }
    }
    const double fb = boundary_flux(minus, bump).flux;
    require(std::abs(fb) > 0.0, ErrorKind::solver, "flux through Gamma0 cannot be compensated on the box");
    const double c = -flux.flux / fb;
    g.gx += c * bump.gx;
    g.gy += c * bump.gy;
    out.compensated_flux = flux.flux;
  }
  out.u_minus = solve_dirichlet(ext.minus, std::move(g));
  const BoundaryTraceSpace gamma(ext.inner, {BoundaryTag::gamma});
  const double gn = h_half_norm(gamma, restrict_trace(gamma, u.ux, u.uy), ext.rho0);
  out.kappa = gn > 0.0 ? h1_norm(minus, out.u_minus.velocity_vector(), ext.rho0) / gn : 0.0;
  return out;
}

Vec2 PressureCorrection::x_minus(const P2Space& space, int t, const std::array<double, 3>& l) const {
  const auto& el = space.element(t);
  const auto phi = p2_values(l);
  Vec2 f = Vec2::Zero();
  for (int i = 0; i < 6; ++i) f += phi[i] * Vec2(fx[el[i]], fy[el[i]]);
  return f - p1_gradient(space.geometry(t), el, p);
}

PressureCorrection pressure_correction(const StokesSolution& u_minus) {
  const P2Space& space = *u_minus.space;
  const int n = space.dof_count(), nv = space.vertex_count();
  PressureCorrection pc;
  pc.functional = -(assemble_strain_stiffness(space) * u_minus.velocity_vector());
  add_strain_flux(u_minus, owned_edges(space, [](const BoundaryEdgeDofs& e) { return !e.interface; }), pc.functional);

  Eigen::SimplicialLDLT<SparseMatrix> mass(space.mass());
  require(mass.info() == Eigen::Success, ErrorKind::solver, "P2 mass factorization failed");
  pc.fx = mass.solve(pc.functional.head(n));
  pc.fy = mass.solve(pc.functional.tail(n));

  // rhs_q = integral Fhat . grad q; only edge basis functions have nonzero mean (area / 3).
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nv);
  for (int t = 0; t < space.mesh().triangle_count(); ++t) {
    const ElementGeometry g = space.geometry(t);
    const auto& el = space.element(t);
    Vec2 mean = Vec2::Zero();
    for (int i = 3; i < 6; ++i) mean += g.area / 3.0 * Vec2(pc.fx[el[i]], pc.fy[el[i]]);
    for (int i = 0; i < 3; ++i) rhs[el[i]] += g.grad_lambda[i].dot(mean);
  }
  std::vector<int> index(static_cast<size_t>(nv), -1);
  int count = 0;
  for (int v = 0; v < nv; ++v)
    if (!space.boundary_mask()[v]) index[v] = count++;
  require(count > 0, ErrorKind::solver, "singular Poisson system: E- has no interior vertices");
  const SparseMatrix k = space.p1_stiffness();
  std::vector<Eigen::Triplet<double>> trip;
  for (int c = 0; c < k.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(k, c); it; ++it)
      if (index[it.row()] >= 0 && index[it.col()] >= 0) trip.emplace_back(index[it.row()], index[it.col()], it.value());
  SparseMatrix kr(count, count);
  kr.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<SparseMatrix> poisson(kr);
  require(poisson.info() == Eigen::Success, ErrorKind::solver, "singular Poisson system for the pressure correction");
  Eigen::VectorXd br(count);
  for (int v = 0; v < nv; ++v)
    if (index[v] >= 0) br[index[v]] = rhs[v];
  const Eigen::VectorXd pr = poisson.solve(br);
  pc.p = Eigen::VectorXd::Zero(nv);
  for (int v = 0; v < nv; ++v)
    if (index[v] >= 0) pc.p[v] = pr[index[v]];

  const TriangleRule& q = triangle_rule(4);
  double x2 = 0.0;
  for (int t = 0; t < space.mesh().triangle_count(); ++t) {
    const ElementGeometry g = space.geometry(t);
    for (size_t j = 0; j < q.w.size(); ++j) x2 += q.w[j] * g.area * pc.x_minus(space, t, q.bary[j]).squaredNorm();
  }
  pc.x_l2 = std::sqrt(x2);
  if (pc.x_l2 > 0.0) {
    const Eigen::VectorXd r = rhs - k * pc.p;
    for (int v = 0; v < nv; ++v)
      if (index[v] >= 0)
        pc.weak_divergence = std::max(pc.weak_divergence, std::abs(r[v]) / (pc.x_l2 * std::sqrt(k.coeff(v, v))));
  }
  return pc;
}

PhiCertificate build_phi(const ExtendedDomain& ext, const StokesSolution& u, const CauchyData& cauchy,
                         const VelocityExtension& extension, const PressureCorrection& correction) {
  require(cauchy.gamma && &cauchy.gamma->space() == ext.inner.get(), ErrorKind::invalid_argument,
          "Cauchy data does not live on the E part of E~");
  require(extension.u_minus.space == ext.minus, ErrorKind::invalid_argument, "u- does not live on E-");
  const P2Space& minus = *ext.minus;
  const int N = ext.tilde->dof_count(), nm = minus.dof_count();
  PhiCertificate c;
  c.phi1 = c.phi2 = c.phi3 = Eigen::VectorXd::Zero(2 * N);

  const BoundaryTraceSpace& gamma = *cauchy.gamma;
  const Eigen::VectorXd bx = gamma.mass() * cauchy.psi.col(0), by = gamma.mass() * cauchy.psi.col(1);
  for (int i = 0; i < gamma.size(); ++i) {
    const int t = ext.inner_to_tilde[gamma.dofs()[i]];
    c.phi1[t] += bx[i];
    c.phi1[N + t] += by[i];
  }

  Eigen::VectorXd local = Eigen::VectorXd::Zero(2 * nm);
  add_strain_flux(extension.u_minus,
                  owned_edges(minus, [](const BoundaryEdgeDofs& e) { return e.tag == BoundaryTag::gamma; }), local);
  scatter(local, ext.minus_to_tilde, N, c.phi2);

  local = -correction.functional;
  for (int t = 0; t < minus.mesh().triangle_count(); ++t) {
    const ElementGeometry g = minus.geometry(t);
    const auto& el = minus.element(t);
    const Vec2 gp = p1_gradient(g, el, correction.p);
    for (int i = 3; i < 6; ++i) {
      local[el[i]] += g.area / 3.0 * gp.x();
      local[nm + el[i]] += g.area / 3.0 * gp.y();
    }
  }
  scatter(local, ext.minus_to_tilde, N, c.phi3);

  const auto& mask = ext.tilde->boundary_mask();
  for (Eigen::VectorXd* v : {&c.phi1, &c.phi2, &c.phi3})
    for (int d = 0; d < N; ++d)
      if (mask[d]) (*v)[d] = (*v)[N + d] = 0.0;
  c.phi = c.phi1 + c.phi2 + c.phi3;

  const DualNorm dual(ext.tilde, {BoundaryTag::gamma, BoundaryTag::outer_rest, BoundaryTag::obstacle, BoundaryTag::box});
  c.phi_norm = dual(c.phi);
  c.part_norms = {dual(c.phi1), dual(c.phi2), dual(c.phi3)};
  c.z.resize(2 * N);
  c.z << dual.riesz(c.phi.head(N)), dual.riesz(c.phi.tail(N));

  c.g_norm = h_half_norm(gamma, cauchy.g, ext.rho0);
  c.psi_norm = h_minus_half_norm(gamma, cauchy.psi, ext.rho0);
  c.eta = c.g_norm + ext.rho0 * c.psi_norm;
  if (c.eta > 0.0) {
    c.bound_ratio = c.phi_norm * ext.rho0 / c.eta;
    for (int k = 0; k < 3; ++k) c.part_ratios[k] = c.part_norms[k] * ext.rho0 / c.eta;
  }

  // a~(u~, p~; v) assembled piecewise on E and E-.
  Eigen::VectorXd lhs = Eigen::VectorXd::Zero(2 * N);
  scatter(stokes_residual(u), ext.inner_to_tilde, N, lhs);
  const Eigen::VectorXd am = assemble_strain_stiffness(minus) * extension.u_minus.velocity_vector() +
                             assemble_divergence(minus).transpose() * correction.p;
  scatter(am, ext.minus_to_tilde, N, lhs);
  for (int d = 0; d < N; ++d)
    if (mask[d]) lhs[d] = lhs[N + d] = 0.0;
  const double scale = std::max(c.phi.norm(), lhs.norm());
  c.interface_residual = scale > 0.0 ? (lhs - c.phi).norm() / scale : 0.0;
  return c;
}

ExtensionResult extend_cauchy_data(const ExtendedDomain& ext, const StokesSolution& u) {
  auto gamma = std::make_shared<const BoundaryTraceSpace>(ext.inner, std::set{BoundaryTag::gamma});
  const CauchyData cauchy = measure_cauchy(u, gamma, ext.rho0);
  ExtensionResult r;
  r.velocity = extend_velocity(ext, u);
  r.pressure = pressure_correction(r.velocity.u_minus);
  r.phi = build_phi(ext, u, cauchy, r.velocity, r.pressure);
  return r;
}

double ball_sup(const StokesSolution& sol, const Point& c, double r) {
  const P2Space& space = *sol.space;
  const PointLocator loc(space.mesh());
  double sup = 0.0;
  for (int d = 0; d < space.dof_count(); ++d)
    if ((space.dof_point(d) - c).norm() < r) sup = std::max(sup, std::hypot(sol.ux[d], sol.uy[d]));
  const int nr = 32, na = 128;
  for (int i = 0; i <= nr; ++i)
    for (int j = 0; j < (i == 0 ? 1 : na); ++j) {
      const double rr = r * i / nr * (1.0 - 1e-12), th = 2.0 * std::numbers::pi * j / na;
      const auto hit = loc.locate(c + rr * Vec2(std::cos(th), std::sin(th)));
      if (hit.inside) sup = std::max(sup, sol.velocity(hit.triangle, hit.bary).norm());
    }
  return sup;
}

InteriorSmallnessFit interior_smallness_estimate(const std::vector<StokesSolution>& family, const BoxGeometry& box,
                                                 double rho0) {
  require(family.size() >= 5, ErrorKind::invalid_argument, "interior smallness needs at least 5 family members");
  InteriorSmallnessFit fit;
  std::vector<double> xs, ys;
  for (const auto& sol : family) {
    auto gamma = std::make_shared<const BoundaryTraceSpace>(sol.space, std::set{BoundaryTag::gamma});
    const TraceField g = restrict_trace(*gamma, sol.ux, sol.uy);
    const double umax = std::max(sol.ux.cwiseAbs().maxCoeff(), sol.uy.cwiseAbs().maxCoeff());
    require(g.cwiseAbs().maxCoeff() <= 1e-10 * std::max(umax, 1e-300), ErrorKind::invalid_argument,
            "interior smallness needs u = 0 on Gamma");
    InteriorSmallnessSample s;
    s.sup = ball_sup(sol, box.p_star, 0.375 * box.rho00);
    s.l2 = l2_norm(*sol.space, sol.velocity_vector(), 1.0);
    s.psi_norm = h_minus_half_norm(*gamma, stress_trace(sol, *gamma), rho0);
    fit.samples.push_back(s);
    if (s.l2 > 0.0 && s.sup > 0.0 && s.psi_norm > 0.0) {
      xs.push_back(std::log(rho0 * s.psi_norm / s.l2));
      ys.push_back(std::log(rho0 * s.sup / s.l2));
    }
  }
  require(xs.size() >= 5, ErrorKind::invalid_argument, "interior smallness needs at least 5 nontrivial members");
  const double m = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < xs.size(); ++i) mx += xs[i] / m, my += ys[i] / m;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  require(sxx > 0.0, ErrorKind::invalid_argument, "interior smallness family has no spread in |psi| / |u|");
  fit.tau = sxy / sxx;
  fit.log_c = my - fit.tau * mx;
  fit.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return fit;
}

void write_extension(const std::filesystem::path& dir, const ExtendedDomain& ext, const ExtensionResult& result) {
  std::filesystem::create_directories(dir);
  write_mesh(dir / "e_minus.mesh", ext.minus->mesh());
  write_mesh(dir / "e_tilde.mesh", ext.tilde->mesh());
  std::ofstream m(dir / "e_minus_dofs.txt");
  require(static_cast<bool>(m), ErrorKind::io, "cannot write extension dof table");
  m << std::setprecision(17) << "dof x y ux uy fx fy\n";
  const auto& um = result.velocity.u_minus;
  for (int d = 0; d < ext.minus->dof_count(); ++d) {
    const Point& x = ext.minus->dof_point(d);
    m << d << ' ' << x.x() << ' ' << x.y() << ' ' << um.ux[d] << ' ' << um.uy[d] << ' ' << result.pressure.fx[d] << ' '
      << result.pressure.fy[d] << '\n';
  }
  std::ofstream t(dir / "e_tilde_phi.txt");
  t << std::setprecision(17) << "dof x y phi_x phi_y z_x z_y\n";
  const int N = ext.tilde->dof_count();
  const auto& c = result.phi;
  for (int d = 0; d < N; ++d) {
    const Point& x = ext.tilde->dof_point(d);
    t << d << ' ' << x.x() << ' ' << x.y() << ' ' << c.phi[d] << ' ' << c.phi[N + d] << ' ' << c.z[d] << ' '
      << c.z[N + d] << '\n';
  }
  std::ofstream cert(dir / "certificate.txt");
  cert << std::setprecision(17) << "eta phi_norm bound_ratio\n" << c.eta << ' ' << c.phi_norm << ' ' << c.bound_ratio << '\n';
}

}  // namespace stokeslab
