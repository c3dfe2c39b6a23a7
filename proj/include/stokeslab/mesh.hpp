#pragma once

#include "stokeslab/geometry.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace stokeslab {

enum class BoundaryTag : int { gamma = 0, outer_rest = 1, obstacle = 2, box = 3 };

const char* to_string(BoundaryTag tag);
BoundaryTag parse_boundary_tag(const std::string& name);

/// A boundary piece is either an arc of a closed curve, parametrized by
/// s in [s0, s1] (unwrapped, so s1 may exceed 1 or be smaller than s0), or a
/// straight segment a -> b. Local parameter u in [0,1] covers the piece.
struct BoundaryPiece {
  BoundaryTag tag = BoundaryTag::outer_rest;
  std::shared_ptr<const BoundaryCurve> curve;
  double s0 = 0.0;
  double s1 = 1.0;
  Point a = Point::Zero();
  Point b = Point::Zero();

  static BoundaryPiece arc(std::shared_ptr<const BoundaryCurve> curve, double s0, double s1, BoundaryTag tag);
  static BoundaryPiece segment(const Point& a, const Point& b, BoundaryTag tag);

  Point at(double u) const;
  double curve_param(double u) const { return s0 + u * (s1 - s0); }
  double length() const;
};

/// Piecewise-curved planar straight-line graph plus a region classifier. The
/// classifier returns a nonnegative region id for points of the domain and
/// -1 outside. Pieces may also run between two regions (interfaces).
struct PlanarDomain {
  std::vector<BoundaryPiece> pieces;
  std::function<int(const Point&)> region;
};

PlanarDomain planar_domain(const DomainSpec& spec);
/// Axis-aligned rectangle; side tags in the order bottom, right, top, left.
PlanarDomain rectangle_domain(const Point& lo, const Point& hi, const std::array<BoundaryTag, 4>& tags);

/// Boundary or interface edge. Orientation leaves the owning triangle on the
/// left; for interfaces the owner is the triangle with the smaller region id.
struct MeshEdge {
  int a;
  int b;
  BoundaryTag tag;
  int piece = -1;
  double u0 = 0.0;
  double u1 = 0.0;
  bool interface = false;
};

struct Mesh {
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> regions;
  std::vector<MeshEdge> edges;
  std::vector<BoundaryPiece> pieces;
  int generation = 0;

  int node_count() const { return static_cast<int>(nodes.size()); }
  int triangle_count() const { return static_cast<int>(triangles.size()); }
  double area() const;
  double triangle_area(int t) const;
  double h_max() const;
  double min_angle_degrees() const;
  int distinct_edge_count() const;
  double diameter() const;
};

struct MeshCheck {
  bool positive_orientation = true;
  bool boundary_closed = true;
  bool edges_single_owner = true;
  bool conforming = true;
  bool min_angle_ok = true;
  double min_angle = 0.0;
  std::string failure;

  bool passed() const {
    return positive_orientation && boundary_closed && edges_single_owner && conforming && min_angle_ok;
  }
};

MeshCheck check_mesh(const Mesh& mesh, double min_angle_degrees = 20.0);

struct TriangulateOptions {
  double min_angle_degrees = 28.0;
  /// Interior edges may exceed h_target by this factor; boundary segments never do.
  double size_slack = 1.4;
  int max_nodes = 400000;
};

Mesh triangulate(const PlanarDomain& domain, double h_target, const TriangulateOptions& options = {});
/// Rejects gaps dist(obstacle, outer) < 2 h_target.
Mesh triangulate(const DomainSpec& domain, double h_target, const TriangulateOptions& options = {});

/// Red refinement; boundary midpoints are placed on their pieces.
Mesh refine(const Mesh& mesh);
Mesh refine(const Mesh& mesh, int times);

/// Restriction to one region with a map from new to old node ids.
struct Submesh {
  Mesh mesh;
  std::vector<int> node_to_parent;
};
Submesh extract_region(const Mesh& mesh, int region);

/// Smooth deformation that moves the nodes of `piece` from its curve to the
/// same parameters on `new_curve`. Interior nodes follow with a smoothstep
/// weight of their distance to the old piece, reaching zero at `falloff`.
Mesh morph_piece(const Mesh& mesh, int piece, std::shared_ptr<const BoundaryCurve> new_curve, double falloff);

int find_piece(const Mesh& mesh, BoundaryTag tag);

void write_mesh(const std::filesystem::path& path, const Mesh& mesh);
Mesh read_mesh(const std::filesystem::path& path);

/// Triangle search structure; `locate` returns the triangle and barycentric
/// coordinates, falling back to the nearest triangle (clamped) for points
/// marginally outside the mesh.
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh);
  struct Hit {
    int triangle = -1;
    std::array<double, 3> bary{};
    bool inside = false;
  };
  Hit locate(const Point& p) const;

 private:
  const Mesh* mesh_;
  Point origin_;
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> cells_;
};

std::array<double, 3> barycentric(const Point& p, const Point& a, const Point& b, const Point& c);

}  // namespace stokeslab
