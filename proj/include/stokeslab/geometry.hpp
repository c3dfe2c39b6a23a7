#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace stokeslab {

using Point = Eigen::Vector2d;
using Vec2 = Eigen::Vector2d;

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double point_segment_distance(const Point& p, const Point& a, const Point& b);
/// Closest point on segment [a,b] to p, with the segment parameter in [0,1].
std::pair<Point, double> closest_point_on_segment(const Point& p, const Point& a, const Point& b);
bool segments_intersect(const Point& a, const Point& b, const Point& c, const Point& d);

// Analytic families a curve may carry alongside its samples. The parameter
// s in [0,1) maps to the polar/elliptic angle 2*pi*s.
struct CircleFamily {
  Point center;
  double radius;
};
/// r(theta) = r0 * (1 + amplitude * cos(mode * (theta - phase)))
struct RadialModeFamily {
  Point center;
  double r0;
  double amplitude;
  int mode;
  double phase = 0.0;
};
struct EllipseFamily {
  Point center;
  double a;
  double b;
  double angle = 0.0;
};
using CurveFamily = std::variant<std::monostate, CircleFamily, RadialModeFamily, EllipseFamily>;

struct CurveProjection {
  double param;
  Point foot;
  double distance;
};

/// Closed, simple, counterclockwise planar curve stored as dense samples. The
/// sample list is closed: the last entry repeats the first one.
///
/// Sampled curves are parametrized by normalized arclength; analytic ones by
/// angle / 2pi. Either way `point(s)` is 1-periodic in s.
class BoundaryCurve {
 public:
  static constexpr int default_samples = 1024;

  /// Validates closure, simplicity and orientation. With `reorient` a
  /// clockwise input is reversed instead of rejected.
  static BoundaryCurve from_samples(std::vector<Point> samples, bool reorient = false);
  static BoundaryCurve circle(const Point& center, double radius, int n = default_samples);
  static BoundaryCurve radial_mode(const Point& center, double r0, double amplitude, int mode,
                                   double phase = 0.0, int n = default_samples);
  static BoundaryCurve ellipse(const Point& center, double a, double b, double angle = 0.0,
                               int n = default_samples);
  /// Dense arclength resampling of a polygon that keeps every corner.
  static BoundaryCurve polygon(std::span<const Point> vertices, int n = default_samples);

  const CurveFamily& family() const { return family_; }
  bool is_analytic() const { return !std::holds_alternative<std::monostate>(family_); }
  std::span<const Point> samples() const { return samples_; }
  int sample_count() const { return static_cast<int>(samples_.size()) - 1; }
  double sample_param(int i) const { return params_[i]; }

  Point point(double s) const;
  /// dp/ds (not normalized).
  Vec2 derivative(double s) const;
  Vec2 tangent(double s) const;
  Vec2 outward_normal(double s) const;
  double curvature(double s) const;

  double length() const { return arclength_.back(); }
  double signed_area() const;
  double diameter() const { return diameter_; }
  double max_abs_curvature() const;
  /// min(1/kappa_max, half the minimal self-distance) scaled by 0.8.
  double reach() const;
  CurveProjection project(const Point& x) const;
  bool contains(const Point& x) const;

  /// Cumulative arclength at parameter s in [0,1].
  double arclength_at(double s) const;
  double param_at_arclength(double length) const;

  BoundaryCurve translated(const Vec2& shift) const;
  BoundaryCurve rigid_transformed(double angle, const Vec2& shift) const;
  BoundaryCurve scaled(double factor, const Point& origin = Point::Zero()) const;

 private:
  BoundaryCurve() = default;
  static BoundaryCurve from_family(CurveFamily family, int n);
  void finish();

  std::vector<Point> samples_;
  std::vector<double> params_;
  std::vector<double> arclength_;
  CurveFamily family_;
  double diameter_ = 0.0;
};

/// Uniform-arclength resampling of the sample polyline: n points, returned
/// as a closed polyline (n + 1 entries).
std::vector<Point> resample_by_arclength(const BoundaryCurve& curve, int n);

/// Grid-bucketed nearest-segment queries on a polyline.
class SegmentIndex {
 public:
  explicit SegmentIndex(std::span<const Point> polyline);
  double distance(const Point& p) const;
  /// Nearest segment index and distance.
  std::pair<int, double> nearest(const Point& p) const;

 private:
  std::vector<Point> pts_;
  Point origin_;
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> cells_;
};

/// Parameter interval on a periodic curve. `end` may be smaller than `begin`
/// when the interval wraps through s = 0.
struct ArcInterval {
  double begin = 0.0;
  double end = 1.0;

  bool contains(double s) const;
  double span() const;
  /// Interior parameter at fraction f in [0,1] of the interval.
  double at(double f) const;
};

struct DomainSpec {
  BoundaryCurve outer;
  std::optional<BoundaryCurve> obstacle;
  ArcInterval gamma;
  double anchor = 0.0;
  double rho0 = 1.0;
  double M0 = 1.0;
  double M1 = 1.0;
  double alpha = 1.0;

  Point anchor_point() const { return outer.point(anchor); }
  /// Signed distance-free membership test for Omega minus the closed obstacle.
  bool contains(const Point& x) const;
  double boundary_distance(const Point& x) const;
  double area() const;
};

struct HypothesisCheck {
  std::string id;
  std::string description;
  bool passed = false;
  double measured = 0.0;
  double required = 0.0;
  /// Positive when the hypothesis holds with room to spare.
  double margin = 0.0;
};

struct ValidationReport {
  std::vector<HypothesisCheck> checks;

  bool passed() const;
  const HypothesisCheck& at(const std::string& id) const;
};

struct FrequencyBound {
  double measured;
  double bound;
};

ValidationReport validate_domain(const DomainSpec& spec,
                                 std::optional<FrequencyBound> frequency = std::nullopt);

struct HausdorffResult {
  double distance;
  double a_to_b;
  double b_to_a;
};

/// Sup-inf distance from the sample points of one curve to the sample
/// polyline of the other, both directions.
HausdorffResult hausdorff_distance(const BoundaryCurve& a, const BoundaryCurve& b,
                                   int n_samples = 4096);
double directed_hausdorff(std::span<const Point> from_points, std::span<const Point> to_polyline);

/// Open cone {x : (x - vertex).direction / |x - vertex| > cos(half_angle)}.
class Cone {
 public:
  Cone(const Point& vertex, const Vec2& direction, double half_angle);

  const Point& vertex() const { return vertex_; }
  const Vec2& direction() const { return direction_; }
  double half_angle() const { return half_angle_; }
  bool contains(const Point& x) const;
  Cone rigid_transformed(double angle, const Vec2& shift) const;

 private:
  Point vertex_;
  Vec2 direction_;
  double half_angle_;
};

struct OffsetConstants {
  double rho0 = 1.0;
  double M1 = 1.0;
  double alpha = 1.0;
};

struct DistanceStats {
  double min = 0.0;
  double max = 0.0;
};

/// Outward offset of an obstacle boundary together with the measured
/// constants of the distance band, area growth, perimeter and normal
/// deviation.
struct RegularizedBoundary {
  BoundaryCurve base;
  double h = 0.0;
  BoundaryCurve offset_curve;
  DistanceStats dist_stats;
  double gamma0 = 1.0;
  double gamma1 = 1.0;
  double gamma2 = 0.0;
  double gamma3 = 0.0;
  double gamma4 = 0.0;
  bool nested = true;
};

RegularizedBoundary offset_boundary(const BoundaryCurve& base, double h,
                                    const OffsetConstants& constants = {});

struct BallChain {
  std::vector<Point> centers;
  std::vector<double> radii;
  double spacing = 0.0;
  /// Packing bound M1 rho0^2 / (pi radius^2).
  double count_bound = 0.0;

  int count() const { return static_cast<int>(centers.size()); }
  bool within_count_bound() const { return count() <= count_bound; }
};

/// Chain of balls along a polyline path with consecutive centers at distance
/// 2 * radius * spacing_factor. Every path point must keep a clearance of
/// radius + margin from the domain boundary.
BallChain build_ball_chain(std::span<const Point> path, double radius, const DomainSpec& domain,
                           double margin, double spacing_factor = 1.0);

void write_curve(const std::filesystem::path& path, const BoundaryCurve& curve);
BoundaryCurve read_curve(const std::filesystem::path& path);

}  // namespace stokeslab
