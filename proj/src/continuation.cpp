#include "stokeslab/continuation.hpp"

#include "stokeslab/error.hpp"
#include "stokeslab/quadrature.hpp"

#include <algorithm>
#include <map>
#include <numbers>

namespace stokeslab {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

std::array<double, 3> bary_of(const std::array<Point, 3>& v, const Point& x) {
  return barycentric(x, v[0], v[1], v[2]);
}

bool inside_triangle(const std::array<Point, 3>& v, const Point& x) {
  const auto l = bary_of(v, x);
  return l[0] >= -1e-14 && l[1] >= -1e-14 && l[2] >= -1e-14;
}

double point_triangle_distance(const std::array<Point, 3>& v, const Point& x) {
  if (inside_triangle(v, x)) return 0.0;
  return std::min({point_segment_distance(x, v[0], v[1]), point_segment_distance(x, v[1], v[2]),
                   point_segment_distance(x, v[2], v[0])});
}

// Integral of f over triangle v with a rule of the given degree.
double triangle_integral(const std::array<Point, 3>& v, int degree, const std::function<double(const Point&)>& f) {
  const TriangleRule& q = triangle_rule(degree);
  const double area = 0.5 * std::abs(cross(v[1] - v[0], v[2] - v[0]));
  double s = 0.0;
  for (size_t k = 0; k < q.w.size(); ++k) {
    const auto& l = q.bary[k];
    s += q.w[k] * f(l[0] * v[0] + l[1] * v[1] + l[2] * v[2]);
  }
  return s * area;
}

// integral over (triangle v) intersected with B_r(c) via Green's theorem with
// the x-antiderivative F(x, y) = integral_{x0}^{x} f(s, y) ds.
double clipped_integral(std::array<Point, 3> v, const Point& c, double r, const std::function<double(const Point&)>& f) {
  if (cross(v[1] - v[0], v[2] - v[0]) < 0.0) std::swap(v[1], v[2]);
  const double x0 = (v[0].x() + v[1].x() + v[2].x()) / 3.0;
  const LineRule& g4 = gauss_legendre(4);
  auto F = [&](const Point& p) {
    const double dx = p.x() - x0;
    double s = 0.0;
    for (size_t k = 0; k < g4.x.size(); ++k) s += g4.w[k] * f(Point(x0 + g4.x[k] * dx, p.y()));
    return s * dx;
  };
  double total = 0.0;
  std::vector<double> angles;
  for (int e = 0; e < 3; ++e) {
    const Point& p = v[e];
    const Vec2 d = v[(e + 1) % 3] - p;
    const Vec2 pc = p - c;
    const double a = d.squaredNorm(), b = 2.0 * d.dot(pc), cc = pc.squaredNorm() - r * r;
    std::vector<double> ts{0.0};
    const double disc = b * b - 4 * a * cc;
    if (disc > 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / (2 * a), (-b + sq) / (2 * a)})
        if (t > 0.0 && t < 1.0) {
          ts.push_back(t);
          const Point x = p + t * d;
          angles.push_back(std::atan2(x.y() - c.y(), x.x() - c.x()));
        }
    }
    ts.push_back(1.0);
    for (size_t i = 0; i + 1 < ts.size(); ++i) {
      const double t0 = ts[i], t1 = ts[i + 1];
      if (t1 <= t0) continue;
      if ((p + 0.5 * (t0 + t1) * d - c).norm() >= r) continue;
      double s = 0.0;
      for (size_t k = 0; k < g4.x.size(); ++k) s += g4.w[k] * F(p + (t0 + g4.x[k] * (t1 - t0)) * d);
      total += s * (t1 - t0) * d.y();
    }
  }
  // Vertices exactly on the circle also delimit arcs.
  for (const auto& p : v)
    if (std::abs((p - c).norm() - r) <= 1e-14 * r) angles.push_back(std::atan2(p.y() - c.y(), p.x() - c.x()));
  const LineRule& g24 = gauss_legendre(24);
  auto arc = [&](double th0, double th1) {
    double s = 0.0;
    for (size_t k = 0; k < g24.x.size(); ++k) {
      const double th = th0 + g24.x[k] * (th1 - th0);
      s += g24.w[k] * F(c + r * Vec2(std::cos(th), std::sin(th))) * r * std::cos(th);
    }
    return s * (th1 - th0);
  };
  if (angles.empty()) {
    // No crossings: the circle lies inside the triangle or misses it.
    if (inside_triangle(v, c) && std::min({point_segment_distance(c, v[0], v[1]), point_segment_distance(c, v[1], v[2]),
                                           point_segment_distance(c, v[2], v[0])}) >= r)
      total += arc(0.0, two_pi);
    return total;
  }
  std::sort(angles.begin(), angles.end());
  for (size_t i = 0; i < angles.size(); ++i) {
    const double th0 = angles[i];
    const double th1 = i + 1 < angles.size() ? angles[i + 1] : angles[0] + two_pi;
    if (th1 - th0 <= 0.0) continue;
    const double mid = 0.5 * (th0 + th1);
    if (inside_triangle(v, c + r * Vec2(std::cos(mid), std::sin(mid)))) total += arc(th0, th1);
  }
  return total;
}

std::array<Point, 3> corners(const Mesh& mesh, int t) {
  const auto& tri = mesh.triangles[t];
  return {mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]};
}

double gradient_energy_density(const StokesSolution& sol, int t, const std::array<Point, 3>& v, const Point& x) {
  return sol.velocity_gradient(t, bary_of(v, x)).squaredNorm();
}

}  // namespace

double ball_integral(const Mesh& mesh, const Point& c, double r, const ElementIntegrand& f) {
  require(r > 0.0 && std::isfinite(r), ErrorKind::invalid_argument, "ball radius must be positive");
  double total = 0.0;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto v = corners(mesh, t);
    const double dmin = point_triangle_distance(v, c);
    if (dmin >= r) continue;
    const auto g = [&](const Point& x) { return f(t, x); };
    const double dmax = std::max({(v[0] - c).norm(), (v[1] - c).norm(), (v[2] - c).norm()});
    total += dmax <= r ? triangle_integral(v, 8, g) : clipped_integral(v, c, r, g);
  }
  return total;
}

double ball_energy(const StokesSolution& sol, const Point& c, double r) {
  const Mesh& mesh = sol.space->mesh();
  return ball_integral(mesh, c, r, [&](int t, const Point& x) {
    return gradient_energy_density(sol, t, corners(mesh, t), x);
  });
}

double ball_l2(const StokesSolution& sol, const Point& c, double r) {
  const Mesh& mesh = sol.space->mesh();
  return ball_integral(mesh, c, r, [&](int t, const Point& x) {
    return sol.velocity(t, bary_of(corners(mesh, t), x)).squaredNorm();
  });
}

double domain_energy(const StokesSolution& sol) {
  const SparseMatrix k = sol.space->stiffness();
  return sol.ux.dot(k * sol.ux) + sol.uy.dot(k * sol.uy);
}

double distance_to_boundary(const Mesh& mesh, const Point& x) {
  double d = std::numeric_limits<double>::infinity();
  bool inside = false;
  for (const auto& e : mesh.edges) {
    if (e.interface) continue;
    const Point& a = mesh.nodes[e.a];
    const Point& b = mesh.nodes[e.b];
    d = std::min(d, point_segment_distance(x, a, b));
    if ((a.y() > x.y()) != (b.y() > x.y())) {
      const double xc = a.x() + (x.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (x.x() < xc) inside = !inside;
    }
  }
  return inside ? d : -d;
}

ThreeSpheresReport three_spheres_probe(const StokesSolution& sol, const Point& center, double r1, double r2, double r3,
                                       const ThreeSpheresOptions& options) {
  require(options.theta_star > 0.0 && options.theta_star < std::exp(-0.5), ErrorKind::invalid_argument,
          "theta* must lie in (0, e^{-1/2})");
  require(r1 > 0.0 && r1 < r2 && r2 < options.theta_star * r3, ErrorKind::invalid_argument,
          "three spheres radii must satisfy 0 < r1 < r2 < theta* r3");
  const Mesh& mesh = sol.space->mesh();
  const double clearance = distance_to_boundary(mesh, center);
  const double need = r3 + options.margin_factor * mesh.h_max();
  if (clearance < need) {
    fail(ErrorKind::invalid_argument, "ball B_r3 exits the domain (clearance " + std::to_string(clearance) +
                                          ", need " + std::to_string(need) + ")");
  }
  ThreeSpheresReport rep{center, r1, r2, r3, ball_energy(sol, center, r1), ball_energy(sol, center, r2),
                         ball_energy(sol, center, r3), 0.0};
  require(rep.N3 > 0.0, ErrorKind::invalid_argument, "three spheres probe on a trivial solution (N3 = 0)");
  if (rep.N1 <= 0.0)
    rep.delta_hat = 0.0;
  else if (rep.N1 >= rep.N3)
    rep.delta_hat = 1.0;
  else
    rep.delta_hat = std::clamp(std::log(rep.N3 / rep.N2) / std::log(rep.N3 / rep.N1), 0.0, 1.0);
  return rep;
}

FamilySummary summarize(std::vector<double> values) {
  require(!values.empty(), ErrorKind::invalid_argument, "empty family");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  const double median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  return {values.front(), median, values.back()};
}

namespace {

SmallnessFit fit_smallness(const std::map<double, double>& worst, double rho0) {
  std::vector<double> xs, ys;
  for (const auto& [rho, R] : worst) {
    if (!(R > 0.0 && R < 1.0)) continue;
    const double l = std::log(1.0 / R);
    if (!(l > 0.0)) continue;
    xs.push_back(std::log(rho0 / rho));
    ys.push_back(std::log(l));
  }
  SmallnessFit fit;
  fit.points = static_cast<int>(xs.size());
  if (xs.size() < 2) return fit;
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / n;
    my += ys[i] / n;
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx <= 0.0) return fit;
  fit.B = sxy / sxx;
  fit.A = std::exp(my - fit.B * mx);
  fit.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return fit;
}

}  // namespace

SmallnessReport smallness_probe(const StokesSolution& sol, const std::vector<double>& rho_grid,
                                const std::vector<Point>& centers, double rho0, double s) {
  require(!rho_grid.empty() && !centers.empty(), ErrorKind::invalid_argument, "smallness probe needs nonempty grids");
  require(rho0 > 0.0 && s > 1.0, ErrorKind::invalid_argument, "smallness probe needs rho0 > 0 and s > 1");
  SmallnessReport rep;
  rep.total_energy = domain_energy(sol);
  require(rep.total_energy > 0.0, ErrorKind::invalid_argument, "smallness probe on a trivial solution");
  const Mesh& mesh = sol.space->mesh();
  std::map<double, double> worst;
  for (const Point& c : centers) {
    const double clearance = distance_to_boundary(mesh, c);
    for (double rho : rho_grid) {
      if (!(rho > 0.0) || clearance <= s * rho) {
        ++rep.skipped;
        continue;
      }
      const double R = ball_energy(sol, c, rho) / rep.total_energy;
      rep.samples.push_back({c, rho, R});
      auto it = worst.find(rho);
      if (it == worst.end())
        worst.emplace(rho, R);
      else
        it->second = std::min(it->second, R);
    }
  }
  require(!rep.samples.empty(), ErrorKind::invalid_argument, "no admissible (center, rho) pair for the margin s");
  rep.fit = fit_smallness(worst, rho0);
  return rep;
}

BoundarySmallnessReport boundary_smallness_probe(const StokesSolution& sol, const BoundaryTraceSpace& gamma,
                                                 const std::vector<double>& rho_grid, const std::vector<Point>& centers,
                                                 double rho0, double s) {
  require(!rho_grid.empty() && !centers.empty(), ErrorKind::invalid_argument, "smallness probe needs nonempty grids");
  BoundarySmallnessReport rep;
  rep.g_norm = h_half_norm(gamma, restrict_trace(gamma, sol.ux, sol.uy), rho0);
  require(rep.g_norm > 0.0, ErrorKind::invalid_argument, "boundary smallness probe: g = 0 on Gamma");
  const double total = domain_energy(sol);
  const double g2 = rep.g_norm * rep.g_norm;
  rep.factor = total / g2;
  const Mesh& mesh = sol.space->mesh();
  for (const Point& c : centers) {
    const double clearance = distance_to_boundary(mesh, c);
    for (double rho : rho_grid) {
      if (!(rho > 0.0) || clearance <= (s + 1.0) * rho) {
        ++rep.skipped;
        continue;
      }
      const double e = ball_energy(sol, c, rho);
      rep.samples.push_back({c, rho, e / g2, e / total});
    }
  }
  return rep;
}

double energy_in_difference(const StokesSolution& sol1, const BoundaryCurve& d1, const BoundaryCurve& d2,
                            int max_depth) {
  require(std::abs(d2.signed_area()) > 0.0 && std::abs(d1.signed_area()) > 0.0, ErrorKind::geometry,
          "energy in difference: degenerate obstacle curve");
  const Mesh& mesh = sol1.space->mesh();
  auto indicator = [&](const Point& x) { return d2.contains(x) && !d1.contains(x); };
  double total = 0.0;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto v = corners(mesh, t);
    auto f = [&](const Point& x) { return gradient_energy_density(sol1, t, v, x); };
    std::function<double(const std::array<Point, 3>&, int)> piece = [&](const std::array<Point, 3>& w, int depth) {
      const std::array<Point, 3> m{0.5 * (w[0] + w[1]), 0.5 * (w[1] + w[2]), 0.5 * (w[2] + w[0])};
      const bool first = indicator(w[0]);
      bool uniform = true;
      for (const Point& p : {w[1], w[2], m[0], m[1], m[2]}) uniform = uniform && indicator(p) == first;
      if (uniform) return first ? triangle_integral(w, 4, f) : 0.0;
      if (depth >= max_depth)
        return triangle_integral(w, 4, [&](const Point& x) { return indicator(x) ? f(x) : 0.0; });
      return piece({w[0], m[0], m[2]}, depth + 1) + piece({m[0], w[1], m[1]}, depth + 1) +
             piece({m[2], m[1], w[2]}, depth + 1) + piece({m[0], m[1], m[2]}, depth + 1);
    };
    total += piece(v, 0);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Interpolation inequality probe

namespace {

double maximize_on_ball(const std::function<double(const Point&)>& f, const Point& c, double t) {
  double best = -1.0, br = 0.0, bth = 0.0;
  auto at = [&](double r, double th) { return f(c + r * Vec2(std::cos(th), std::sin(th))); };
  for (int i = 0; i <= 16; ++i)
    for (int j = 0; j < 128; ++j) {
      const double r = t * i / 16.0, th = two_pi * j / 128.0;
      const double v = at(r, th);
      if (v > best) {
        best = v;
        br = r;
        bth = th;
      }
    }
  double dr = t / 16.0, dth = two_pi / 128.0;
  while (dr > 1e-13 * t || dth > 1e-13) {
    bool moved = false;
    for (const auto& [sr, sth] : std::array<std::pair<double, double>, 4>{{{dr, 0}, {-dr, 0}, {0, dth}, {0, -dth}}}) {
      const double r = std::clamp(br + sr, 0.0, t), th = bth + sth;
      const double v = at(r, th);
      if (v > best) {
        best = v;
        br = r;
        bth = th;
        moved = true;
      }
    }
    if (!moved) {
      dr *= 0.5;
      dth *= 0.5;
    }
  }
  return best;
}

}  // namespace

InterpolationEstimate interpolation_probe(const BallField& field, const Point& center, double t) {
  require(t > 0.0, ErrorKind::invalid_argument, "interpolation probe needs a positive radius");
  require(field.value && field.gradient, ErrorKind::invalid_argument, "interpolation probe needs value and gradient");
  InterpolationEstimate est{};
  est.sup_value = maximize_on_ball([&](const Point& x) { return field.value(x).norm(); }, center, t);
  est.sup_gradient = maximize_on_ball([&](const Point& x) { return field.gradient(x).norm(); }, center, t);
  const LineRule& gr = gauss_legendre(24);
  const int na = 96;
  double l2 = 0.0;
  for (size_t i = 0; i < gr.x.size(); ++i) {
    const double r = t * gr.x[i];
    double ring = 0.0;
    for (int j = 0; j < na; ++j) {
      const double th = two_pi * j / na;
      ring += field.value(center + r * Vec2(std::cos(th), std::sin(th))).squaredNorm();
    }
    l2 += gr.w[i] * t * r * ring * two_pi / na;
  }
  est.l2_squared = l2;
  if (est.sup_value == 0.0) {
    est.skipped = true;
    return est;
  }
  const double rhs = std::pow(l2, 0.25) * std::sqrt(est.sup_gradient) + std::sqrt(l2) / t;
  est.constant = est.sup_value / rhs;
  return est;
}

BallField velocity_field(const StokesSolution& sol) {
  auto locator = std::make_shared<const PointLocator>(sol.space->mesh());
  auto shared = std::make_shared<const StokesSolution>(sol);
  BallField f;
  f.value = [locator, shared](const Point& x) -> Eigen::VectorXd {
    const auto hit = locator->locate(x);
    require(hit.triangle >= 0, ErrorKind::invalid_argument, "point outside the mesh");
    return shared->velocity(hit.triangle, hit.bary);
  };
  f.gradient = [locator, shared](const Point& x) -> Eigen::MatrixXd {
    const auto hit = locator->locate(x);
    require(hit.triangle >= 0, ErrorKind::invalid_argument, "point outside the mesh");
    return shared->velocity_gradient(hit.triangle, hit.bary);
  };
  return f;
}

}  // namespace stokeslab
