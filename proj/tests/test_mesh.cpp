#include "stokeslab/error.hpp"
#include "stokeslab/mesh.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

using namespace stokeslab;

namespace {

constexpr double pi = std::numbers::pi;

DomainSpec unit_disk() {
  return {BoundaryCurve::circle({0, 0}, 1.0), std::nullopt, ArcInterval{0.0, 0.5}, 0.25, 0.5, 3.0, 20.0, 1.0};
}

DomainSpec annulus() {
  DomainSpec d = unit_disk();
  d.obstacle = BoundaryCurve::circle({0, 0}, 0.3);
  return d;
}

// Number of closed loops formed by the non-interface edges with a given tag
// set; -1 if the tagged edges do not close up.
int loops_of(const Mesh& m, const std::set<BoundaryTag>& tags) {
  std::map<int, int> next;
  for (const auto& e : m.edges)
    if (!e.interface && tags.count(e.tag)) {
      if (next.count(e.a)) return -1;
      next[e.a] = e.b;
    }
  std::set<int> seen;
  int loops = 0;
  for (const auto& [start, unused] : next) {
    if (seen.count(start)) continue;
    int v = start;
    do {
      seen.insert(v);
      const auto it = next.find(v);
      if (it == next.end()) return -1;
      v = it->second;
    } while (v != start);
    ++loops;
  }
  return loops;
}

}  // namespace

TEST(Triangulate, UnitDisk) {
  const auto d = unit_disk();
  const double h = 0.2;
  const Mesh m = triangulate(d, h);
  const auto check = check_mesh(m);
  EXPECT_TRUE(check.passed()) << check.failure;
  EXPECT_GT(m.triangle_count(), 50);
  EXPECT_LT(m.triangle_count(), 400);
  EXPECT_LE(m.h_max(), 1.5 * h);
  for (const auto& e : m.edges) EXPECT_NEAR(m.nodes[e.a].norm(), 1.0, 1e-10 * 2.0);
  EXPECT_EQ(loops_of(m, {BoundaryTag::gamma, BoundaryTag::outer_rest}), 1);
}

TEST(Triangulate, AnnulusHasTwoTaggedLoops) {
  const Mesh m = triangulate(annulus(), 0.1);
  EXPECT_TRUE(check_mesh(m).passed()) << check_mesh(m).failure;
  EXPECT_EQ(loops_of(m, {BoundaryTag::obstacle}), 1);
  EXPECT_EQ(loops_of(m, {BoundaryTag::gamma, BoundaryTag::outer_rest}), 1);
  for (const auto& e : m.edges)
    if (e.tag == BoundaryTag::obstacle) EXPECT_NEAR(m.nodes[e.a].norm(), 0.3, 1e-12);
}

TEST(Triangulate, BoxSidesTagged) {
  const auto dom = rectangle_domain({0, 0}, {1, 1}, {BoundaryTag::box, BoundaryTag::box, BoundaryTag::gamma, BoundaryTag::box});
  const Mesh m = triangulate(dom, 0.2);
  EXPECT_TRUE(check_mesh(m).passed());
  for (const auto& e : m.edges) {
    const Point mid = 0.5 * (m.nodes[e.a] + m.nodes[e.b]);
    if (std::abs(mid.y() - 1.0) < 1e-12)
      EXPECT_EQ(e.tag, BoundaryTag::gamma);
    else
      EXPECT_EQ(e.tag, BoundaryTag::box);
  }
  EXPECT_NEAR(m.area(), 1.0, 1e-14);
}

TEST(Triangulate, GapTooSmallForH) {
  DomainSpec d = unit_disk();
  d.obstacle = BoundaryCurve::circle({0, 0}, 0.8);
  EXPECT_THROW(triangulate(d, 0.15), Error);
}

TEST(Triangulate, OffCenterObstacleAndEllipse) {
  DomainSpec d = unit_disk();
  d.obstacle = BoundaryCurve::ellipse({0.1, -0.05}, 0.35, 0.2, 0.4);
  const Mesh m = triangulate(d, 0.08);
  const auto c = check_mesh(m);
  EXPECT_TRUE(c.passed()) << c.failure;
}

TEST(Area, ConvergesQuadratically) {
  const auto d = annulus();
  const double exact = pi * (1.0 - 0.09);
  Mesh m = triangulate(d, 0.2);
  double prev = std::abs(m.area() - exact);
  for (int level = 1; level <= 3; ++level) {
    m = refine(m);
    const double err = std::abs(m.area() - exact);
    EXPECT_LT(err, 0.3 * prev) << "level " << level;
    prev = err;
  }
}

TEST(Refine, SingleTriangle) {
  Mesh m;
  m.nodes = {{0, 0}, {1, 0}, {0, 1}};
  m.triangles = {{0, 1, 2}};
  m.regions = {0};
  m.edges = {{0, 1, BoundaryTag::box}, {1, 2, BoundaryTag::box}, {2, 0, BoundaryTag::box}};
  const Mesh r = refine(m);
  EXPECT_EQ(r.triangle_count(), 4);
  EXPECT_EQ(r.node_count(), 6);
  EXPECT_NEAR(r.area(), 0.5, 1e-15);
  EXPECT_TRUE(check_mesh(r).passed());
}

TEST(Refine, NodeCountIdentityAndHalvedH) {
  const Mesh m = triangulate(
      rectangle_domain({0, 0}, {2, 1}, {BoundaryTag::gamma, BoundaryTag::box, BoundaryTag::box, BoundaryTag::box}), 0.25);
  const Mesh r = refine(m);
  EXPECT_EQ(r.node_count(), m.node_count() + m.distinct_edge_count());
  EXPECT_NEAR(r.h_max(), 0.5 * m.h_max(), 1e-12);
  EXPECT_NEAR(r.min_angle_degrees(), m.min_angle_degrees(), 1e-9);
  EXPECT_EQ(r.edges.size(), 2 * m.edges.size());
  EXPECT_TRUE(check_mesh(r).passed());
}

TEST(Refine, AnnulusNodesStayOnCircles) {
  const Mesh r = refine(triangulate(annulus(), 0.1), 2);
  EXPECT_TRUE(check_mesh(r).passed());
  for (const auto& e : r.edges) {
    const double expected = e.tag == BoundaryTag::obstacle ? 0.3 : 1.0;
    EXPECT_NEAR(r.nodes[e.a].norm(), expected, 1e-10);
  }
  EXPECT_EQ(loops_of(r, {BoundaryTag::obstacle}), 1);
}

TEST(MeshIO, RoundTrip) {
  const Mesh m = triangulate(annulus(), 0.15);
  const auto path = std::filesystem::temp_directory_path() / "stokeslab_mesh_roundtrip.mesh";
  write_mesh(path, m);
  const Mesh back = read_mesh(path);
  std::filesystem::remove(path);
  ASSERT_EQ(back.node_count(), m.node_count());
  ASSERT_EQ(back.triangle_count(), m.triangle_count());
  ASSERT_EQ(back.edges.size(), m.edges.size());
  for (int i = 0; i < m.node_count(); ++i) EXPECT_EQ(back.nodes[i], m.nodes[i]);
  EXPECT_EQ(back.edges[5].tag, m.edges[5].tag);
  EXPECT_TRUE(check_mesh(back).passed());
}

TEST(MeshIO, RejectsBadHeader) {
  const auto path = std::filesystem::temp_directory_path() / "stokeslab_mesh_bad.mesh";
  {
    std::ofstream out(path);
    out << "vertices 3\n";
  }
  EXPECT_THROW(read_mesh(path), Error);
  std::filesystem::remove(path);
}

TEST(Locator, FindsContainingTriangle) {
  const Mesh m = triangulate(annulus(), 0.1);
  const PointLocator loc(m);
  for (const Point p : {Point(0.5, 0.1), Point(-0.2, 0.7), Point(0.0, -0.95)}) {
    const auto hit = loc.locate(p);
    ASSERT_GE(hit.triangle, 0);
    EXPECT_TRUE(hit.inside);
    const auto& t = m.triangles[hit.triangle];
    const Point back = hit.bary[0] * m.nodes[t[0]] + hit.bary[1] * m.nodes[t[1]] + hit.bary[2] * m.nodes[t[2]];
    EXPECT_NEAR((back - p).norm(), 0.0, 1e-12);
  }
}

TEST(Morph, TranslatedObstacleKeepsOuterBoundary) {
  const Mesh m = refine(triangulate(annulus(), 0.1));
  const int piece = find_piece(m, BoundaryTag::obstacle);
  auto moved = std::make_shared<const BoundaryCurve>(BoundaryCurve::circle({0.08, 0}, 0.3));
  const Mesh out = morph_piece(m, piece, moved, 0.6);
  const auto c = check_mesh(out);
  EXPECT_TRUE(c.passed()) << c.failure;
  for (const auto& e : out.edges) {
    if (e.tag == BoundaryTag::obstacle)
      EXPECT_NEAR((out.nodes[e.a] - Point(0.08, 0)).norm(), 0.3, 1e-12);
    else
      EXPECT_EQ(out.nodes[e.a], m.nodes[e.a]);
  }
  EXPECT_NEAR(out.area(), m.area(), 1e-9);
}

TEST(Regions, InterfaceSplitsIntoSubmeshes) {
  PlanarDomain dom;
  dom.pieces = {BoundaryPiece::segment({0, 0}, {1, 0}, BoundaryTag::box),
                BoundaryPiece::segment({1, 0}, {1, 0.5}, BoundaryTag::box),
                BoundaryPiece::segment({1, 0.5}, {1, 1}, BoundaryTag::box),
                BoundaryPiece::segment({1, 1}, {0, 1}, BoundaryTag::box),
                BoundaryPiece::segment({0, 1}, {0, 0.5}, BoundaryTag::box),
                BoundaryPiece::segment({0, 0.5}, {0, 0}, BoundaryTag::box),
                BoundaryPiece::segment({0, 0.5}, {1, 0.5}, BoundaryTag::gamma)};
  dom.region = [](const Point& x) {
    if (x.x() <= 0 || x.x() >= 1 || x.y() <= 0 || x.y() >= 1) return -1;
    return x.y() > 0.5 ? 0 : 1;
  };
  const Mesh m = triangulate(dom, 0.15);
  EXPECT_TRUE(check_mesh(m).passed()) << check_mesh(m).failure;
  const auto upper = extract_region(m, 0);
  const auto lower = extract_region(m, 1);
  EXPECT_NEAR(upper.mesh.area(), 0.5, 1e-14);
  EXPECT_NEAR(lower.mesh.area(), 0.5, 1e-14);
  EXPECT_TRUE(check_mesh(upper.mesh).passed()) << check_mesh(upper.mesh).failure;
  EXPECT_TRUE(check_mesh(lower.mesh).passed()) << check_mesh(lower.mesh).failure;
  int shared_up = 0, shared_low = 0;
  for (const auto& e : upper.mesh.edges) shared_up += e.tag == BoundaryTag::gamma;
  for (const auto& e : lower.mesh.edges) shared_low += e.tag == BoundaryTag::gamma;
  EXPECT_EQ(shared_up, shared_low);
  EXPECT_GT(shared_up, 0);
}
