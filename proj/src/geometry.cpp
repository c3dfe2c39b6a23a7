#include "stokeslab/geometry.hpp"

#include "stokeslab/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

namespace stokeslab {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

double wrap01(double s) {
  double w = s - std::floor(s);
  return w >= 1.0 ? 0.0 : w;
}

Eigen::Matrix2d rotation(double angle) {
  Eigen::Matrix2d r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

struct FamilyEval {
  Point p;
  Vec2 d1;  // d/ds
  Vec2 d2;  // d2/ds2
};

FamilyEval eval_family(const CurveFamily& family, double s) {
  const double theta = two_pi * s;
  const double c = std::cos(theta), sn = std::sin(theta);
  const Vec2 e(c, sn), eperp(-sn, c);
  FamilyEval out{};
  if (const auto* circ = std::get_if<CircleFamily>(&family)) {
    out.p = circ->center + circ->radius * e;
    out.d1 = two_pi * circ->radius * eperp;
    out.d2 = -two_pi * two_pi * circ->radius * e;
  } else if (const auto* rad = std::get_if<RadialModeFamily>(&family)) {
    const double arg = rad->mode * (theta - rad->phase);
    const double r = rad->r0 * (1.0 + rad->amplitude * std::cos(arg));
    const double rp = -rad->r0 * rad->amplitude * rad->mode * std::sin(arg);
    const double rpp = -rad->r0 * rad->amplitude * rad->mode * rad->mode * std::cos(arg);
    out.p = rad->center + r * e;
    out.d1 = two_pi * (rp * e + r * eperp);
    out.d2 = two_pi * two_pi * (rpp * e + 2.0 * rp * eperp - r * e);
  } else if (const auto* ell = std::get_if<EllipseFamily>(&family)) {
    const Eigen::Matrix2d rot = rotation(ell->angle);
    out.p = ell->center + rot * Vec2(ell->a * c, ell->b * sn);
    out.d1 = two_pi * (rot * Vec2(-ell->a * sn, ell->b * c));
    out.d2 = -two_pi * two_pi * (rot * Vec2(ell->a * c, ell->b * sn));
  }
  return out;
}

double signed_polyline_area(std::span<const Point> closed) {
  double a = 0.0;
  for (size_t i = 0; i + 1 < closed.size(); ++i) a += cross(closed[i], closed[i + 1]);
  return 0.5 * a;
}

bool polyline_is_simple(std::span<const Point> closed) {
  const size_t n = closed.size() - 1;
  if (n < 3) return false;
  // Bucket segments by a uniform grid to avoid the full quadratic scan.
  Point lo = closed[0], hi = closed[0];
  for (const auto& p : closed) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const int side = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(n))));
  const Vec2 ext = (hi - lo).cwiseMax(Vec2::Constant(1e-300));
  std::vector<std::vector<int>> cells(static_cast<size_t>(side) * side);
  auto cell_of = [&](const Point& p) {
    int i = std::clamp(static_cast<int>((p.x() - lo.x()) / ext.x() * side), 0, side - 1);
    int j = std::clamp(static_cast<int>((p.y() - lo.y()) / ext.y() * side), 0, side - 1);
    return std::pair{i, j};
  };
  for (size_t k = 0; k < n; ++k) {
    auto [i0, j0] = cell_of(closed[k].cwiseMin(closed[k + 1]));
    auto [i1, j1] = cell_of(closed[k].cwiseMax(closed[k + 1]));
    for (int i = i0; i <= i1; ++i)
      for (int j = j0; j <= j1; ++j) cells[static_cast<size_t>(i) * side + j].push_back(static_cast<int>(k));
  }
  for (const auto& cell : cells) {
    for (size_t a = 0; a < cell.size(); ++a) {
      for (size_t b = a + 1; b < cell.size(); ++b) {
        const size_t s = static_cast<size_t>(cell[a]), t = static_cast<size_t>(cell[b]);
        const size_t gap = s > t ? s - t : t - s;
        if (gap <= 1 || gap == n - 1) continue;  // adjacent segments share a vertex
        if (segments_intersect(closed[s], closed[s + 1], closed[t], closed[t + 1])) return false;
      }
    }
  }
  return true;
}

}  // namespace

std::pair<Point, double> closest_point_on_segment(const Point& p, const Point& a, const Point& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return {a + t * ab, t};
}

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
  return (p - closest_point_on_segment(p, a, b).first).norm();
}

bool segments_intersect(const Point& a, const Point& b, const Point& c, const Point& d) {
  auto orient = [](const Point& p, const Point& q, const Point& r) { return cross(q - p, r - p); };
  const double d1 = orient(c, d, a), d2 = orient(c, d, b);
  const double d3 = orient(a, b, c), d4 = orient(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  auto on_seg = [](const Point& p, const Point& q, const Point& r) {
    return r.x() >= std::min(p.x(), q.x()) && r.x() <= std::max(p.x(), q.x()) &&
           r.y() >= std::min(p.y(), q.y()) && r.y() <= std::max(p.y(), q.y());
  };
  if (d1 == 0 && on_seg(c, d, a)) return true;
  if (d2 == 0 && on_seg(c, d, b)) return true;
  if (d3 == 0 && on_seg(a, b, c)) return true;
  if (d4 == 0 && on_seg(a, b, d)) return true;
  return false;
}

// ---------------------------------------------------------------------------
// BoundaryCurve

BoundaryCurve BoundaryCurve::from_family(CurveFamily family, int n) {
  require(n >= 8, ErrorKind::invalid_argument, "curve needs at least 8 samples");
  BoundaryCurve c;
  c.family_ = std::move(family);
  c.samples_.resize(static_cast<size_t>(n) + 1);
  c.params_.resize(static_cast<size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    const double s = static_cast<double>(i) / n;
    c.params_[i] = s;
    c.samples_[i] = eval_family(c.family_, i == n ? 0.0 : s).p;
  }
  c.finish();
  require(c.signed_area() > 0.0, ErrorKind::invariant_violation,
          "curve invariant 'orientation' violated: analytic family is not counterclockwise");
  return c;
}

BoundaryCurve BoundaryCurve::from_samples(std::vector<Point> samples, bool reorient) {
  require(samples.size() >= 4, ErrorKind::invariant_violation,
          "curve invariant 'closed' violated: fewer than 3 distinct samples");
  Point lo = samples[0], hi = samples[0];
  for (const auto& p : samples) {
    require(p.allFinite(), ErrorKind::invariant_violation, "curve sample is not finite");
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double diam = (hi - lo).norm();
  require(diam > 0.0, ErrorKind::invariant_violation, "curve invariant 'closed' violated: zero extent");
  require((samples.front() - samples.back()).norm() <= 1e-12 * diam, ErrorKind::invariant_violation,
          "curve invariant 'closed' violated: first and last sample differ");
  samples.back() = samples.front();
  require(polyline_is_simple(samples), ErrorKind::invariant_violation,
          "curve invariant 'simple' violated: samples self-intersect");
  if (signed_polyline_area(samples) < 0.0) {
    require(reorient, ErrorKind::invariant_violation,
            "curve invariant 'orientation' violated: samples are clockwise");
    std::reverse(samples.begin(), samples.end());
  }
  BoundaryCurve c;
  c.samples_ = std::move(samples);
  c.finish();
  c.params_.resize(c.samples_.size());
  for (size_t i = 0; i < c.samples_.size(); ++i) c.params_[i] = c.arclength_[i] / c.length();
  c.params_.back() = 1.0;
  return c;
}

BoundaryCurve BoundaryCurve::circle(const Point& center, double radius, int n) {
  require(radius > 0.0, ErrorKind::invalid_argument, "circle radius must be positive");
  return from_family(CircleFamily{center, radius}, n);
}

BoundaryCurve BoundaryCurve::radial_mode(const Point& center, double r0, double amplitude, int mode,
                                         double phase, int n) {
  require(r0 > 0.0 && std::abs(amplitude) < 1.0, ErrorKind::invalid_argument,
          "radial mode needs r0 > 0 and |amplitude| < 1");
  BoundaryCurve c = from_family(RadialModeFamily{center, r0, amplitude, mode, phase}, n);
  require(polyline_is_simple(c.samples_), ErrorKind::invariant_violation,
          "curve invariant 'simple' violated: radial mode self-intersects");
  return c;
}

BoundaryCurve BoundaryCurve::ellipse(const Point& center, double a, double b, double angle, int n) {
  require(a > 0.0 && b > 0.0, ErrorKind::invalid_argument, "ellipse semi-axes must be positive");
  return from_family(EllipseFamily{center, a, b, angle}, n);
}

BoundaryCurve BoundaryCurve::polygon(std::span<const Point> vertices, int n) {
  require(vertices.size() >= 3, ErrorKind::invalid_argument, "polygon needs at least 3 vertices");
  const size_t nv = vertices.size();
  double perimeter = 0.0;
  for (size_t i = 0; i < nv; ++i) perimeter += (vertices[(i + 1) % nv] - vertices[i]).norm();
  std::vector<Point> pts;
  for (size_t i = 0; i < nv; ++i) {
    const Point& a = vertices[i];
    const Point& b = vertices[(i + 1) % nv];
    const int m = std::max(1, static_cast<int>(std::lround(n * (b - a).norm() / perimeter)));
    for (int k = 0; k < m; ++k) pts.push_back(a + (static_cast<double>(k) / m) * (b - a));
  }
  pts.push_back(pts.front());
  return from_samples(std::move(pts), true);
}

void BoundaryCurve::finish() {
  arclength_.assign(samples_.size(), 0.0);
  for (size_t i = 1; i < samples_.size(); ++i)
    arclength_[i] = arclength_[i - 1] + (samples_[i] - samples_[i - 1]).norm();
  require(arclength_.back() > 0.0, ErrorKind::invariant_violation, "degenerate zero-length curve");
  Point lo = samples_[0], hi = samples_[0];
  for (const auto& p : samples_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  diameter_ = (hi - lo).norm();
}

Point BoundaryCurve::point(double s) const {
  s = wrap01(s);
  if (is_analytic()) return eval_family(family_, s).p;
  auto it = std::upper_bound(params_.begin(), params_.end(), s);
  const size_t i = std::min<size_t>(static_cast<size_t>(it - params_.begin()) - 1, params_.size() - 2);
  const double t = (s - params_[i]) / (params_[i + 1] - params_[i]);
  return samples_[i] + t * (samples_[i + 1] - samples_[i]);
}

Vec2 BoundaryCurve::derivative(double s) const {
  s = wrap01(s);
  if (is_analytic()) return eval_family(family_, s).d1;
  const int n = sample_count();
  auto central = [&](int i) {
    const int ip = (i + 1) % n, im = (i - 1 + n) % n;
    double dp = params_[ip] - params_[im];
    if (dp <= 0.0) dp += 1.0;
    return Vec2((samples_[ip] - samples_[im]) / dp);
  };
  auto it = std::upper_bound(params_.begin(), params_.end(), s);
  const size_t i = std::min<size_t>(static_cast<size_t>(it - params_.begin()) - 1, params_.size() - 2);
  const double t = (s - params_[i]) / (params_[i + 1] - params_[i]);
  return (1.0 - t) * central(static_cast<int>(i)) + t * central(static_cast<int>((i + 1) % n));
}

Vec2 BoundaryCurve::tangent(double s) const { return derivative(s).normalized(); }

Vec2 BoundaryCurve::outward_normal(double s) const {
  const Vec2 t = tangent(s);
  return Vec2(t.y(), -t.x());
}

double BoundaryCurve::curvature(double s) const {
  s = wrap01(s);
  if (is_analytic()) {
    const FamilyEval e = eval_family(family_, s);
    return cross(e.d1, e.d2) / std::pow(e.d1.norm(), 3);
  }
  const int n = sample_count();
  auto menger = [&](int i) {
    const Point& a = samples_[(i - 1 + n) % n];
    const Point& b = samples_[i];
    const Point& c = samples_[(i + 1) % n];
    const double denom = (b - a).norm() * (c - b).norm() * (c - a).norm();
    return denom > 0.0 ? 2.0 * cross(b - a, c - b) / denom : 0.0;
  };
  auto it = std::upper_bound(params_.begin(), params_.end(), s);
  const size_t i = std::min<size_t>(static_cast<size_t>(it - params_.begin()) - 1, params_.size() - 2);
  const double t = (s - params_[i]) / (params_[i + 1] - params_[i]);
  return (1.0 - t) * menger(static_cast<int>(i)) + t * menger(static_cast<int>((i + 1) % n));
}

double BoundaryCurve::signed_area() const { return signed_polyline_area(samples_); }

double BoundaryCurve::max_abs_curvature() const {
  double k = 0.0;
  for (int i = 0; i < sample_count(); ++i) k = std::max(k, std::abs(curvature(params_[i])));
  return k;
}

double BoundaryCurve::reach() const {
  const double kmax = max_abs_curvature();
  const double curvature_radius = kmax > 0.0 ? 1.0 / kmax : std::numeric_limits<double>::infinity();
  const int n = sample_count();
  const double sep = std::min(std::isfinite(curvature_radius) ? std::numbers::pi * curvature_radius
                                                             : length() / 2.0,
                              length() / 2.0);
  double min_self = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double along = arclength_[j] - arclength_[i];
      along = std::min(along, length() - along);
      if (along < sep * (1.0 - 1e-9)) continue;
      min_self = std::min(min_self, (samples_[i] - samples_[j]).norm());
    }
  }
  return 0.8 * std::min(curvature_radius, 0.5 * min_self);
}

CurveProjection BoundaryCurve::project(const Point& x) const {
  const int n = sample_count();
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  double best_t = 0.0;
  for (int i = 0; i < n; ++i) {
    auto [foot, t] = closest_point_on_segment(x, samples_[i], samples_[i + 1]);
    const double d = (x - foot).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
      best_t = t;
    }
  }
  double s = params_[best] + best_t * (params_[best + 1] - params_[best]);
  if (is_analytic()) {
    // Newton on 0.5|p(s) - x|^2, kept inside the neighbouring sample cells.
    const double lo = params_[best] - 1.0 / n, hi = params_[best + 1] + 1.0 / n;
    for (int it = 0; it < 30; ++it) {
      const FamilyEval e = eval_family(family_, wrap01(s));
      const Vec2 r = e.p - x;
      const double g = r.dot(e.d1);
      const double hess = e.d1.squaredNorm() + r.dot(e.d2);
      if (hess <= 0.0) break;
      const double step = g / hess;
      s = std::clamp(s - step, lo, hi);
      if (std::abs(step) < 1e-16) break;
    }
    s = wrap01(s);
    const Point foot = point(s);
    return {s, foot, (foot - x).norm()};
  }
  s = wrap01(s);
  const Point foot = samples_[best] + best_t * (samples_[best + 1] - samples_[best]);
  return {s, foot, (foot - x).norm()};
}

bool BoundaryCurve::contains(const Point& x) const {
  if (const auto* circ = std::get_if<CircleFamily>(&family_))
    return (x - circ->center).norm() < circ->radius;
  if (const auto* rad = std::get_if<RadialModeFamily>(&family_)) {
    const Vec2 d = x - rad->center;
    const double theta = std::atan2(d.y(), d.x());
    return d.norm() < rad->r0 * (1.0 + rad->amplitude * std::cos(rad->mode * (theta - rad->phase)));
  }
  if (const auto* ell = std::get_if<EllipseFamily>(&family_)) {
    const Vec2 q = rotation(-ell->angle) * (x - ell->center);
    return (q.x() / ell->a) * (q.x() / ell->a) + (q.y() / ell->b) * (q.y() / ell->b) < 1.0;
  }
  bool inside = false;
  for (size_t i = 0; i + 1 < samples_.size(); ++i) {
    const Point& a = samples_[i];
    const Point& b = samples_[i + 1];
    if ((a.y() > x.y()) != (b.y() > x.y())) {
      const double xc = a.x() + (x.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (x.x() < xc) inside = !inside;
    }
  }
  return inside;
}

double BoundaryCurve::arclength_at(double s) const {
  if (s >= 1.0) return length();
  s = wrap01(s);
  auto it = std::upper_bound(params_.begin(), params_.end(), s);
  const size_t i = std::min<size_t>(static_cast<size_t>(it - params_.begin()) - 1, params_.size() - 2);
  const double t = (s - params_[i]) / (params_[i + 1] - params_[i]);
  return arclength_[i] + t * (arclength_[i + 1] - arclength_[i]);
}

double BoundaryCurve::param_at_arclength(double len) const {
  len = std::fmod(len, length());
  if (len < 0.0) len += length();
  auto it = std::upper_bound(arclength_.begin(), arclength_.end(), len);
  const size_t i = std::min<size_t>(static_cast<size_t>(it - arclength_.begin()) - 1, arclength_.size() - 2);
  const double t = (len - arclength_[i]) / (arclength_[i + 1] - arclength_[i]);
  return params_[i] + t * (params_[i + 1] - params_[i]);
}

BoundaryCurve BoundaryCurve::translated(const Vec2& shift) const { return rigid_transformed(0.0, shift); }

BoundaryCurve BoundaryCurve::rigid_transformed(double angle, const Vec2& shift) const {
  const Eigen::Matrix2d rot = rotation(angle);
  if (const auto* circ = std::get_if<CircleFamily>(&family_))
    return from_family(CircleFamily{rot * circ->center + shift, circ->radius}, sample_count());
  if (const auto* rad = std::get_if<RadialModeFamily>(&family_)) {
    RadialModeFamily f = *rad;
    f.center = rot * rad->center + shift;
    f.phase = rad->phase + angle;
    return from_family(f, sample_count());
  }
  if (const auto* ell = std::get_if<EllipseFamily>(&family_)) {
    EllipseFamily f = *ell;
    f.center = rot * ell->center + shift;
    f.angle = ell->angle + angle;
    return from_family(f, sample_count());
  }
  std::vector<Point> pts(samples_.size());
  for (size_t i = 0; i < pts.size(); ++i) pts[i] = rot * samples_[i] + shift;
  return from_samples(std::move(pts));
}

BoundaryCurve BoundaryCurve::scaled(double factor, const Point& origin) const {
  require(factor > 0.0, ErrorKind::invalid_argument, "scale factor must be positive");
  auto map = [&](const Point& p) { return Point(origin + factor * (p - origin)); };
  if (const auto* circ = std::get_if<CircleFamily>(&family_))
    return from_family(CircleFamily{map(circ->center), factor * circ->radius}, sample_count());
  if (const auto* rad = std::get_if<RadialModeFamily>(&family_)) {
    RadialModeFamily f = *rad;
    f.center = map(rad->center);
    f.r0 *= factor;
    return from_family(f, sample_count());
  }
  if (const auto* ell = std::get_if<EllipseFamily>(&family_)) {
    EllipseFamily f = *ell;
    f.center = map(ell->center);
    f.a *= factor;
    f.b *= factor;
    return from_family(f, sample_count());
  }
  std::vector<Point> pts(samples_.size());
  for (size_t i = 0; i < pts.size(); ++i) pts[i] = map(samples_[i]);
  return from_samples(std::move(pts));
}

std::vector<Point> resample_by_arclength(const BoundaryCurve& curve, int n) {
  require(n >= 3, ErrorKind::invalid_argument, "resampling needs at least 3 points");
  const auto samples = curve.samples();
  std::vector<Point> pts(static_cast<size_t>(n) + 1);
  size_t seg = 0;
  double seg_start = 0.0;
  for (int i = 0; i < n; ++i) {
    const double target = curve.length() * i / n;
    double seg_len = (samples[seg + 1] - samples[seg]).norm();
    while (seg + 2 < samples.size() && seg_start + seg_len < target) {
      seg_start += seg_len;
      ++seg;
      seg_len = (samples[seg + 1] - samples[seg]).norm();
    }
    const double t = seg_len > 0.0 ? std::clamp((target - seg_start) / seg_len, 0.0, 1.0) : 0.0;
    pts[i] = samples[seg] + t * (samples[seg + 1] - samples[seg]);
  }
  pts[n] = pts[0];
  return pts;
}

// ---------------------------------------------------------------------------
// SegmentIndex

SegmentIndex::SegmentIndex(std::span<const Point> polyline) : pts_(polyline.begin(), polyline.end()) {
  require(pts_.size() >= 2, ErrorKind::invalid_argument, "segment index needs at least one segment");
  Point lo = pts_[0], hi = pts_[0];
  for (const auto& p : pts_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const size_t nseg = pts_.size() - 1;
  const double extent = std::max((hi - lo).maxCoeff(), 1e-300);
  const int side = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(nseg))));
  cell_ = extent / side;
  origin_ = lo;
  nx_ = static_cast<int>((hi.x() - lo.x()) / cell_) + 1;
  ny_ = static_cast<int>((hi.y() - lo.y()) / cell_) + 1;
  cells_.assign(static_cast<size_t>(nx_) * ny_, {});
  for (size_t k = 0; k < nseg; ++k) {
    const Point a = pts_[k].cwiseMin(pts_[k + 1]) - origin_;
    const Point b = pts_[k].cwiseMax(pts_[k + 1]) - origin_;
    const int i0 = std::clamp(static_cast<int>(a.x() / cell_), 0, nx_ - 1);
    const int i1 = std::clamp(static_cast<int>(b.x() / cell_), 0, nx_ - 1);
    const int j0 = std::clamp(static_cast<int>(a.y() / cell_), 0, ny_ - 1);
    const int j1 = std::clamp(static_cast<int>(b.y() / cell_), 0, ny_ - 1);
    for (int i = i0; i <= i1; ++i)
      for (int j = j0; j <= j1; ++j) cells_[static_cast<size_t>(i) * ny_ + j].push_back(static_cast<int>(k));
  }
}

std::pair<int, double> SegmentIndex::nearest(const Point& p) const {
  const Point q = p - origin_;
  const double fx = q.x() / cell_, fy = q.y() / cell_;
  const bool inside = fx >= 0.0 && fy >= 0.0 && fx < nx_ && fy < ny_;
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  if (!inside) {
    for (size_t k = 0; k + 1 < pts_.size(); ++k) {
      const double d = point_segment_distance(p, pts_[k], pts_[k + 1]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(k);
      }
    }
    return {best, best_d};
  }
  const int ci = static_cast<int>(fx), cj = static_cast<int>(fy);
  const int max_ring = std::max(nx_, ny_);
  for (int ring = 0; ring <= max_ring; ++ring) {
    for (int i = ci - ring; i <= ci + ring; ++i) {
      if (i < 0 || i >= nx_) continue;
      for (int j = cj - ring; j <= cj + ring; ++j) {
        if (j < 0 || j >= ny_) continue;
        if (std::abs(i - ci) != ring && std::abs(j - cj) != ring) continue;
        for (int k : cells_[static_cast<size_t>(i) * ny_ + j]) {
          const double d = point_segment_distance(p, pts_[k], pts_[k + 1]);
          if (d < best_d || (d == best_d && k < best)) {
            best_d = d;
            best = k;
          }
        }
      }
    }
    if (best >= 0 && best_d <= ring * cell_) break;
  }
  return {best, best_d};
}

double SegmentIndex::distance(const Point& p) const { return nearest(p).second; }

// ---------------------------------------------------------------------------
// Domains

bool ArcInterval::contains(double s) const {
  if (span() >= 1.0) return true;
  s = wrap01(s);
  const double b = wrap01(begin), e = wrap01(end);
  return b <= e ? (s >= b && s <= e) : (s >= b || s <= e);
}

double ArcInterval::span() const {
  const double d = end - begin;
  if (d >= 1.0) return 1.0;
  return d >= 0.0 ? d : d + 1.0;
}

double ArcInterval::at(double f) const { return wrap01(begin + f * span()); }

bool DomainSpec::contains(const Point& x) const {
  return outer.contains(x) && !(obstacle && obstacle->contains(x));
}

double DomainSpec::boundary_distance(const Point& x) const {
  double d = outer.project(x).distance;
  if (obstacle) d = std::min(d, obstacle->project(x).distance);
  return d;
}

double DomainSpec::area() const { return outer.signed_area(); }

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const HypothesisCheck& c) { return c.passed; });
}

const HypothesisCheck& ValidationReport::at(const std::string& id) const {
  for (const auto& c : checks)
    if (c.id == id) return c;
  fail(ErrorKind::invalid_argument, "no hypothesis named '" + id + "'");
}

ValidationReport validate_domain(const DomainSpec& spec, std::optional<FrequencyBound> frequency) {
  require(spec.rho0 > 0.0 && spec.M0 > 0.0 && spec.M1 > 0.0, ErrorKind::invalid_argument,
          "a-priori constants rho0, M0, M1 must be positive");
  require(spec.alpha > 0.0 && spec.alpha <= 1.0, ErrorKind::invalid_argument,
          "Hoelder exponent alpha must lie in (0,1]");
  ValidationReport report;
  auto add = [&](std::string id, std::string what, double measured, double required, bool upper) {
    HypothesisCheck c;
    c.id = std::move(id);
    c.description = std::move(what);
    c.measured = measured;
    c.required = required;
    c.margin = upper ? required - measured : measured - required;
    c.passed = c.margin >= 0.0;
    report.checks.push_back(std::move(c));
  };

  add("outer_regularity", "rho0 * max curvature of the outer boundary <= M0",
      spec.rho0 * spec.outer.max_abs_curvature(), spec.M0, true);
  add("area_bound", "|Omega| <= M1 rho0^2", spec.area(), spec.M1 * spec.rho0 * spec.rho0, true);

  {
    const Point p0 = spec.anchor_point();
    const int n = std::max(4096, 4 * spec.outer.sample_count());
    double nearest_outside = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const double s = static_cast<double>(i) / n;
      if (!spec.gamma.contains(s)) nearest_outside = std::min(nearest_outside, (spec.outer.point(s) - p0).norm());
    }
    const bool anchor_on_gamma = spec.gamma.contains(spec.anchor);
    add("anchor_ball_in_gamma", "the rho0-ball around P0 meets the outer boundary only on Gamma",
        anchor_on_gamma ? nearest_outside : 0.0, spec.rho0, false);
  }

  if (spec.obstacle) {
    const BoundaryCurve& obs = *spec.obstacle;
    double clearance = std::numeric_limits<double>::infinity();
    bool all_inside = true;
    for (const auto& p : obs.samples()) {
      all_inside = all_inside && spec.outer.contains(p);
      clearance = std::min(clearance, spec.outer.project(p).distance);
    }
    for (const auto& p : spec.outer.samples()) {
      if (obs.contains(p)) all_inside = false;
      clearance = std::min(clearance, obs.project(p).distance);
    }
    const double tol = 1e-9 * spec.outer.diameter();
    add("obstacle_inside", "obstacle strictly inside the outer boundary",
        all_inside ? clearance : -clearance, tol, false);
    if (!all_inside) report.checks.back().passed = false;
    add("obstacle_regularity", "rho0 * max curvature of the obstacle boundary <= M0",
        spec.rho0 * obs.max_abs_curvature(), spec.M0, true);
    add("obstacle_clearance", "dist(obstacle, outer boundary) >= rho0", all_inside ? clearance : 0.0,
        spec.rho0, false);
  }
  if (frequency) {
    add("frequency_bound", "|g|_{1/2,Gamma} / |g|_{0,Gamma} <= F", frequency->measured, frequency->bound, true);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Hausdorff distance

double directed_hausdorff(std::span<const Point> from_points, std::span<const Point> to_polyline) {
  SegmentIndex index(to_polyline);
  double d = 0.0;
  for (const auto& p : from_points) d = std::max(d, index.distance(p));
  return d;
}

HausdorffResult hausdorff_distance(const BoundaryCurve& a, const BoundaryCurve& b, int n_samples) {
  require(n_samples >= 64, ErrorKind::invalid_argument, "Hausdorff distance needs n_samples >= 64");
  require(a.length() > 0.0 && b.length() > 0.0, ErrorKind::geometry,
          "Hausdorff distance of a degenerate curve");
  const auto pa = resample_by_arclength(a, n_samples);
  const auto pb = resample_by_arclength(b, n_samples);
  const std::span<const Point> from_a(pa.data(), pa.size() - 1);
  const std::span<const Point> from_b(pb.data(), pb.size() - 1);
  HausdorffResult r{};
  r.a_to_b = directed_hausdorff(from_a, b.samples());
  r.b_to_a = directed_hausdorff(from_b, a.samples());
  r.distance = std::max(r.a_to_b, r.b_to_a);
  return r;
}

// ---------------------------------------------------------------------------
// Cones

Cone::Cone(const Point& vertex, const Vec2& direction, double half_angle)
    : vertex_(vertex), direction_(direction), half_angle_(half_angle) {
  require(direction.norm() > 0.0, ErrorKind::invalid_argument, "cone direction must be nonzero");
  require(half_angle > 0.0 && half_angle < std::numbers::pi / 2, ErrorKind::invalid_argument,
          "cone half angle must lie in (0, pi/2)");
  direction_.normalize();
}

bool Cone::contains(const Point& x) const {
  const Vec2 d = x - vertex_;
  const double r = d.norm();
  if (r == 0.0) return false;
  return d.dot(direction_) / r > std::cos(half_angle_);
}

Cone Cone::rigid_transformed(double angle, const Vec2& shift) const {
  const Eigen::Matrix2d rot = rotation(angle);
  return Cone(rot * vertex_ + shift, rot * direction_, half_angle_);
}

// ---------------------------------------------------------------------------
// Offset curves

RegularizedBoundary offset_boundary(const BoundaryCurve& base, double h, const OffsetConstants& constants) {
  require(h >= 0.0, ErrorKind::invalid_argument, "offset distance must be nonnegative");
  const double reach = base.reach();
  if (h >= reach) {
    std::ostringstream msg;
    msg << "offset h = " << h << " exceeds the reach estimate; max admissible h = " << reach;
    fail(ErrorKind::geometry, msg.str());
  }
  RegularizedBoundary out{base, h, base, {}, 1.0, 1.0, 0.0, 0.0, 0.0, true};
  if (h == 0.0) {
    out.gamma3 = base.length() / (constants.M1 * constants.rho0);
    return out;
  }
  const int n = base.sample_count();
  std::vector<Point> pts(static_cast<size_t>(n) + 1);
  for (int i = 0; i < n; ++i) {
    const double s = base.sample_param(i);
    pts[i] = base.point(s) + h * base.outward_normal(s);
  }
  pts[n] = pts[0];
  try {
    if (const auto* circ = std::get_if<CircleFamily>(&base.family())) {
      out.offset_curve = BoundaryCurve::circle(circ->center, circ->radius + h, n);
    } else {
      out.offset_curve = BoundaryCurve::from_samples(pts);
    }
  } catch (const Error&) {
    std::ostringstream msg;
    msg << "offset curve self-intersects at h = " << h << "; max admissible h = " << reach;
    fail(ErrorKind::geometry, msg.str());
  }
  const BoundaryCurve& off = out.offset_curve;
  DistanceStats stats{std::numeric_limits<double>::infinity(), 0.0};
  double normal_dev = 0.0;
  for (int i = 0; i < off.sample_count(); ++i) {
    const double s = off.sample_param(i);
    const Point x = off.samples()[i];
    const CurveProjection foot = base.project(x);
    stats.min = std::min(stats.min, foot.distance);
    stats.max = std::max(stats.max, foot.distance);
    normal_dev = std::max(normal_dev, (off.outward_normal(s) - base.outward_normal(foot.param)).norm());
  }
  out.dist_stats = stats;
  out.gamma0 = stats.min / h;
  out.gamma1 = stats.max / h;
  const double scale = constants.M1 * constants.rho0 * constants.rho0;
  out.gamma2 = (off.signed_area() - base.signed_area()) / (scale * h);
  out.gamma3 = off.length() / (constants.M1 * constants.rho0);
  out.gamma4 = normal_dev / std::pow(h / constants.rho0, constants.alpha);
  for (const auto& p : base.samples()) out.nested = out.nested && off.contains(p);
  return out;
}

// ---------------------------------------------------------------------------
// Ball chains

BallChain build_ball_chain(std::span<const Point> path, double radius, const DomainSpec& domain,
                           double margin, double spacing_factor) {
  require(!path.empty(), ErrorKind::invalid_argument, "ball chain needs a nonempty path");
  require(radius > 0.0 && margin >= 0.0 && spacing_factor > 0.0, ErrorKind::invalid_argument,
          "ball chain needs radius > 0, margin >= 0, spacing factor > 0");
  const double clearance = radius + margin;
  const double step = std::max(std::min(radius, margin > 0.0 ? margin : radius) / 4.0, 1e-6);
  double along = 0.0;
  auto check = [&](const Point& p, double s) {
    if (!domain.contains(p) || domain.boundary_distance(p) < clearance) {
      std::ostringstream msg;
      msg << "path exits the eroded domain at arclength " << s;
      fail(ErrorKind::geometry, msg.str());
    }
  };
  check(path[0], 0.0);
  for (size_t k = 0; k + 1 < path.size(); ++k) {
    const double len = (path[k + 1] - path[k]).norm();
    const int m = std::max(1, static_cast<int>(std::ceil(len / step)));
    for (int j = 1; j <= m; ++j) check(path[k] + (static_cast<double>(j) / m) * (path[k + 1] - path[k]), along + len * j / m);
    along += len;
  }

  BallChain chain;
  chain.spacing = 2.0 * radius * spacing_factor;
  chain.count_bound = domain.M1 * domain.rho0 * domain.rho0 / (std::numbers::pi * radius * radius);
  Point current = path[0];
  chain.centers.push_back(current);
  // Walk forward along the path; the next center is the first later point
  // where the path leaves the sphere of radius `spacing` around the current
  // one. The chain stops once the remaining path stays inside that sphere.
  size_t seg = 0;
  double seg_t = 0.0;
  const size_t max_balls = 1000000;
  while (chain.centers.size() < max_balls) {
    bool found = false;
    for (size_t k = seg; k + 1 < path.size() && !found; ++k) {
      const Vec2 d = path[k + 1] - path[k];
      const Vec2 f = path[k] - current;
      const double a = d.squaredNorm();
      if (a == 0.0) continue;
      const double b = 2.0 * f.dot(d), c = f.squaredNorm() - chain.spacing * chain.spacing;
      const double disc = b * b - 4.0 * a * c;
      if (disc < 0.0) continue;
      const double t = (-b + std::sqrt(disc)) / (2.0 * a);
      const double t_min = k == seg ? seg_t : 0.0;
      if (t > t_min && t <= 1.0) {
        current = path[k] + t * d;
        seg = k;
        seg_t = t;
        found = true;
      }
    }
    if (!found) break;
    chain.centers.push_back(current);
  }
  chain.radii.assign(chain.centers.size(), radius);
  return chain;
}

// ---------------------------------------------------------------------------
// I/O

void write_curve(const std::filesystem::path& path, const BoundaryCurve& curve) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write curve file " + path.string());
  out << std::setprecision(17);
  for (int i = 0; i <= curve.sample_count(); ++i) {
    const Point& p = curve.samples()[i];
    out << curve.sample_param(i) << ' ' << p.x() << ' ' << p.y() << '\n';
  }
}

BoundaryCurve read_curve(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot read curve file " + path.string());
  std::vector<Point> pts;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double t, x, y;
    if (!(ls >> t >> x >> y)) fail(ErrorKind::io, path.string() + ":" + std::to_string(lineno) + ": expected 't x y'");
    pts.emplace_back(x, y);
  }
  require(pts.size() >= 3, ErrorKind::io, "curve file " + path.string() + " has fewer than 3 samples");
  if ((pts.front() - pts.back()).norm() > 0.0) pts.push_back(pts.front());
  return BoundaryCurve::from_samples(std::move(pts), true);
}

}  // namespace stokeslab
