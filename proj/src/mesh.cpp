#include "stokeslab/mesh.hpp"

#include "stokeslab/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace stokeslab {

const char* to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::gamma: return "GAMMA";
    case BoundaryTag::outer_rest: return "OUTER_REST";
    case BoundaryTag::obstacle: return "OBSTACLE";
    case BoundaryTag::box: return "BOX";
  }
  return "UNKNOWN";
}

BoundaryTag parse_boundary_tag(const std::string& name) {
  if (name == "GAMMA") return BoundaryTag::gamma;
  if (name == "OUTER_REST") return BoundaryTag::outer_rest;
  if (name == "OBSTACLE") return BoundaryTag::obstacle;
  if (name == "BOX") return BoundaryTag::box;
  fail(ErrorKind::invalid_argument, "unknown boundary tag '" + name + "'");
}

BoundaryPiece BoundaryPiece::arc(std::shared_ptr<const BoundaryCurve> curve, double s0, double s1,
                                 BoundaryTag tag) {
  require(curve != nullptr, ErrorKind::invalid_argument, "arc piece needs a curve");
  require(s0 != s1, ErrorKind::invalid_argument, "arc piece with empty parameter range");
  BoundaryPiece p;
  p.tag = tag;
  p.curve = std::move(curve);
  p.s0 = s0;
  p.s1 = s1;
  p.a = p.at(0.0);
  p.b = p.at(1.0);
  return p;
}

BoundaryPiece BoundaryPiece::segment(const Point& a, const Point& b, BoundaryTag tag) {
  require((b - a).norm() > 0.0, ErrorKind::invalid_argument, "segment piece of zero length");
  BoundaryPiece p;
  p.tag = tag;
  p.a = a;
  p.b = b;
  return p;
}

Point BoundaryPiece::at(double u) const {
  if (curve) return curve->point(curve_param(u));
  return a + u * (b - a);
}

double BoundaryPiece::length() const {
  if (!curve) return (b - a).norm();
  const int n = 512;
  double len = 0.0;
  Point prev = at(0.0);
  for (int i = 1; i <= n; ++i) {
    const Point q = at(static_cast<double>(i) / n);
    len += (q - prev).norm();
    prev = q;
  }
  return len;
}

PlanarDomain planar_domain(const DomainSpec& spec) {
  PlanarDomain d;
  auto outer = std::make_shared<const BoundaryCurve>(spec.outer);
  const double span = spec.gamma.span();
  if (span >= 1.0) {
    d.pieces.push_back(BoundaryPiece::arc(outer, 0.0, 1.0, BoundaryTag::gamma));
  } else {
    const double b = spec.gamma.begin;
    d.pieces.push_back(BoundaryPiece::arc(outer, b, b + span, BoundaryTag::gamma));
    d.pieces.push_back(BoundaryPiece::arc(outer, b + span, b + 1.0, BoundaryTag::outer_rest));
  }
  if (spec.obstacle) {
    auto obs = std::make_shared<const BoundaryCurve>(*spec.obstacle);
    d.pieces.push_back(BoundaryPiece::arc(obs, 0.0, 1.0, BoundaryTag::obstacle));
  }
  d.region = [spec](const Point& x) { return spec.contains(x) ? 0 : -1; };
  return d;
}

PlanarDomain rectangle_domain(const Point& lo, const Point& hi, const std::array<BoundaryTag, 4>& tags) {
  require(hi.x() > lo.x() && hi.y() > lo.y(), ErrorKind::invalid_argument, "rectangle corners out of order");
  const Point c0 = lo, c1(hi.x(), lo.y()), c2 = hi, c3(lo.x(), hi.y());
  PlanarDomain d;
  d.pieces = {BoundaryPiece::segment(c0, c1, tags[0]), BoundaryPiece::segment(c1, c2, tags[1]),
              BoundaryPiece::segment(c2, c3, tags[2]), BoundaryPiece::segment(c3, c0, tags[3])};
  d.region = [lo, hi](const Point& x) {
    return x.x() > lo.x() && x.x() < hi.x() && x.y() > lo.y() && x.y() < hi.y() ? 0 : -1;
  };
  return d;
}

// ---------------------------------------------------------------------------
// Mesh measures

double Mesh::triangle_area(int t) const {
  const auto& tri = triangles[t];
  return 0.5 * cross(nodes[tri[1]] - nodes[tri[0]], nodes[tri[2]] - nodes[tri[0]]);
}

double Mesh::area() const {
  double a = 0.0;
  for (int t = 0; t < triangle_count(); ++t) a += triangle_area(t);
  return a;
}

double Mesh::h_max() const {
  double h = 0.0;
  for (const auto& tri : triangles)
    for (int i = 0; i < 3; ++i) h = std::max(h, (nodes[tri[(i + 1) % 3]] - nodes[tri[i]]).norm());
  return h;
}

namespace {

double min_angle_of(const Point& a, const Point& b, const Point& c) {
  const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
  auto angle = [](double opp, double s1, double s2) {
    return std::acos(std::clamp((s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2), -1.0, 1.0));
  };
  return std::min({angle(la, lb, lc), angle(lb, lc, la), angle(lc, la, lb)});
}

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

}  // namespace

double Mesh::min_angle_degrees() const {
  double m = 180.0;
  for (const auto& tri : triangles)
    m = std::min(m, min_angle_of(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]) * 180.0 / std::numbers::pi);
  return m;
}

int Mesh::distinct_edge_count() const {
  std::unordered_set<std::uint64_t> keys;
  for (const auto& tri : triangles)
    for (int i = 0; i < 3; ++i) keys.insert(edge_key(tri[i], tri[(i + 1) % 3]));
  return static_cast<int>(keys.size());
}

double Mesh::diameter() const {
  if (nodes.empty()) return 0.0;
  Point lo = nodes[0], hi = nodes[0];
  for (const auto& p : nodes) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

MeshCheck check_mesh(const Mesh& mesh, double min_angle_degrees) {
  MeshCheck r;
  auto note = [&](const std::string& what) {
    if (r.failure.empty()) r.failure = what;
  };
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    if (!(mesh.triangle_area(t) > 0.0)) {
      r.positive_orientation = false;
      note("triangle " + std::to_string(t) + " is not positively oriented");
    }
  }
  std::unordered_map<std::uint64_t, int> count;
  for (const auto& tri : mesh.triangles)
    for (int i = 0; i < 3; ++i) ++count[edge_key(tri[i], tri[(i + 1) % 3])];
  std::unordered_map<std::uint64_t, const MeshEdge*> tagged;
  std::vector<int> out_degree(mesh.nodes.size(), 0), in_degree(mesh.nodes.size(), 0);
  for (const auto& e : mesh.edges) {
    tagged[edge_key(e.a, e.b)] = &e;
    const auto it = count.find(edge_key(e.a, e.b));
    const int c = it == count.end() ? 0 : it->second;
    if ((e.interface && c != 2) || (!e.interface && c != 1)) {
      r.edges_single_owner = false;
      note("tagged edge " + std::to_string(e.a) + "-" + std::to_string(e.b) + " borders " + std::to_string(c) +
           " triangles");
    }
    if (!e.interface) {
      ++out_degree[e.a];
      ++in_degree[e.b];
    }
  }
  for (const auto& [key, c] : count) {
    if (c > 2) {
      r.conforming = false;
      note("edge shared by more than two triangles");
    } else if (c == 1 && !tagged.count(key)) {
      r.conforming = false;
      r.boundary_closed = false;
      note("untagged boundary edge (hanging node or missing tag)");
    }
  }
  for (size_t i = 0; i < mesh.nodes.size(); ++i) {
    if (out_degree[i] != in_degree[i]) {
      r.boundary_closed = false;
      note("boundary edges do not close into loops at node " + std::to_string(i));
    }
  }
  r.min_angle = mesh.min_angle_degrees();
  r.min_angle_ok = r.min_angle >= min_angle_degrees;
  if (!r.min_angle_ok) note("minimum angle below threshold");
  return r;
}

// ---------------------------------------------------------------------------
// Delaunay refinement

namespace {

double orient(const Point& a, const Point& b, const Point& c) { return cross(b - a, c - a); }

bool in_circle(const Point& a, const Point& b, const Point& c, const Point& d) {
  const long double adx = static_cast<long double>(a.x()) - d.x(), ady = static_cast<long double>(a.y()) - d.y();
  const long double bdx = static_cast<long double>(b.x()) - d.x(), bdy = static_cast<long double>(b.y()) - d.y();
  const long double cdx = static_cast<long double>(c.x()) - d.x(), cdy = static_cast<long double>(c.y()) - d.y();
  const long double det = (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy) +
                          (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy) +
                          (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady);
  const long double scale = (adx * adx + ady * ady) * (bdx * bdx + bdy * bdy + cdx * cdx + cdy * cdy);
  return det > 1e-15L * scale;
}

Point circumcenter(const Point& a, const Point& b, const Point& c) {
  const Vec2 ab = b - a, ac = c - a;
  const double d = 2.0 * cross(ab, ac);
  const double ab2 = ab.squaredNorm(), ac2 = ac.squaredNorm();
  return a + Vec2(ac.y() * ab2 - ab.y() * ac2, ab.x() * ac2 - ac.x() * ab2) / d;
}

class Delaunay {
 public:
  std::vector<Point> pts;
  std::vector<std::array<int, 3>> v;
  std::vector<std::array<int, 3>> nb;
  std::vector<char> alive;

  Delaunay(const Point& lo, const Point& hi) {
    const Point c = 0.5 * (lo + hi);
    const double d = std::max((hi - lo).maxCoeff(), 1e-12) * 50.0;
    pts = {c + d * Point(0.0, 2.0), c + d * Point(-std::sqrt(3.0), -1.0), c + d * Point(std::sqrt(3.0), -1.0)};
    v.push_back({1, 2, 0});
    nb.push_back({-1, -1, -1});
    alive.push_back(1);
  }

  static bool is_super(int vertex) { return vertex < 3; }

  int locate(const Point& p) {
    int t = hint_;
    if (t < 0 || t >= static_cast<int>(v.size()) || !alive[t]) {
      t = static_cast<int>(v.size()) - 1;
      while (t > 0 && !alive[t]) --t;
    }
    int offset = 0;
    const size_t limit = 4 * v.size() + 100;
    for (size_t step = 0; step < limit; ++step) {
      bool moved = false;
      for (int k = 0; k < 3; ++k) {
        const int i = (k + offset) % 3;
        const Point& a = pts[v[t][(i + 1) % 3]];
        const Point& b = pts[v[t][(i + 2) % 3]];
        if (orient(a, b, p) < 0.0 && nb[t][i] >= 0) {
          t = nb[t][i];
          moved = true;
          offset = (offset + 1) % 3;
          break;
        }
      }
      if (!moved) return t;
    }
    for (int s = 0; s < static_cast<int>(v.size()); ++s) {
      if (!alive[s]) continue;
      bool inside = true;
      for (int i = 0; i < 3 && inside; ++i)
        inside = orient(pts[v[s][(i + 1) % 3]], pts[v[s][(i + 2) % 3]], p) >= 0.0;
      if (inside) return s;
    }
    fail(ErrorKind::mesh, "point location failed during triangulation");
  }

  int insert(const Point& p) {
    const int t0 = locate(p);
    const int id = static_cast<int>(pts.size());
    pts.push_back(p);
    ++stamp_;
    mark_.resize(v.size(), 0);
    std::vector<int> cavity{t0};
    mark_[t0] = stamp_;
    for (size_t k = 0; k < cavity.size(); ++k) {
      const int t = cavity[k];
      for (int i = 0; i < 3; ++i) {
        const int n = nb[t][i];
        if (n < 0 || mark_[n] == stamp_) continue;
        if (in_circle(pts[v[n][0]], pts[v[n][1]], pts[v[n][2]], p)) {
          mark_[n] = stamp_;
          cavity.push_back(n);
        }
      }
    }
    // Keep the cavity star-shaped with respect to p.
    for (int guard = 0; guard < 1000; ++guard) {
      bool changed = false;
      for (size_t k = 0; k < cavity.size() && !changed; ++k) {
        const int t = cavity[k];
        for (int i = 0; i < 3 && !changed; ++i) {
          const int n = nb[t][i];
          if (n >= 0 && mark_[n] == stamp_) continue;
          const Point& a = pts[v[t][(i + 1) % 3]];
          const Point& b = pts[v[t][(i + 2) % 3]];
          const double tol = 1e-12 * (b - a).norm() * ((p - a).norm() + (p - b).norm());
          if (orient(a, b, p) > tol) continue;
          if (t == t0) {
            if (n >= 0) {
              mark_[n] = stamp_;
              cavity.push_back(n);
              changed = true;
            }
          } else {
            mark_[t] = 0;
            cavity.erase(cavity.begin() + static_cast<long>(k));
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    std::unordered_map<int, int> by_start, by_end;
    std::vector<int> created;
    for (const int t : cavity) {
      for (int i = 0; i < 3; ++i) {
        const int n = nb[t][i];
        if (n >= 0 && mark_[n] == stamp_) continue;
        const int a = v[t][(i + 1) % 3], b = v[t][(i + 2) % 3];
        const int nt = static_cast<int>(v.size());
        v.push_back({a, b, id});
        nb.push_back({-1, -1, n});
        alive.push_back(1);
        mark_.push_back(0);
        if (n >= 0) {
          for (int j = 0; j < 3; ++j)
            if (nb[n][j] == t) nb[n][j] = nt;
        }
        by_start[a] = nt;
        by_end[b] = nt;
        created.push_back(nt);
      }
    }
    for (const int t : cavity) alive[t] = 0;
    for (const int nt : created) {
      const int a = v[nt][0], b = v[nt][1];
      nb[nt][0] = by_start.at(b);
      nb[nt][1] = by_end.at(a);
    }
    hint_ = created.empty() ? t0 : created.back();
    return id;
  }

 private:
  int hint_ = 0;
  int stamp_ = 0;
  std::vector<int> mark_;
};

struct Seg {
  int a;
  int b;
  int piece;
  double u0;
  double u1;
};

struct EdgeSides {
  int t[2] = {-1, -1};
  int i[2] = {-1, -1};
};

class Refiner {
 public:
  Refiner(const PlanarDomain& domain, double h, const TriangulateOptions& options)
      : domain_(domain), h_(h), options_(options), dt_(bbox_lo(domain), bbox_hi(domain)) {}

  Mesh run() {
    seed_boundary();
    const double ratio_limit = 1.0 / (2.0 * std::sin(options_.min_angle_degrees * std::numbers::pi / 180.0));
    for (;;) {
      require(static_cast<int>(dt_.pts.size()) <= options_.max_nodes, ErrorKind::mesh,
              "mesh refinement exceeded the node budget");
      build_edges();
      std::vector<int> encroached;
      for (int s = 0; s < static_cast<int>(segs_.size()); ++s)
        if (segment_encroached(s)) encroached.push_back(s);
      if (!encroached.empty()) {
        split_segments(encroached);
        continue;
      }
      classify();
      std::vector<std::pair<int, std::array<int, 3>>> bad;
      for (int t = 0; t < static_cast<int>(dt_.v.size()); ++t) {
        if (!dt_.alive[t] || region_[t] < 0) continue;
        if (is_bad(t, ratio_limit)) bad.emplace_back(t, dt_.v[t]);
      }
      if (bad.empty()) break;
      bool split = false;
      for (const auto& [t, verts] : bad) {
        if (!dt_.alive[t] || dt_.v[t] != verts) continue;
        const Point c = circumcenter(dt_.pts[verts[0]], dt_.pts[verts[1]], dt_.pts[verts[2]]);
        std::vector<int> hit;
        for (int s = 0; s < static_cast<int>(segs_.size()); ++s) {
          const Point& pa = dt_.pts[segs_[s].a];
          const Point& pb = dt_.pts[segs_[s].b];
          if ((pa - c).dot(pb - c) < 0.0) hit.push_back(s);
        }
        if (!hit.empty()) {
          split_segments(hit);
          split = true;
          break;
        }
        dt_.insert(c);
      }
      (void)split;
    }
    return finish();
  }

 private:
  static Point bbox_lo(const PlanarDomain& d) {
    Point lo = Point::Constant(std::numeric_limits<double>::infinity());
    for (const auto& p : d.pieces)
      for (int i = 0; i <= 64; ++i) lo = lo.cwiseMin(p.at(i / 64.0));
    return lo;
  }
  static Point bbox_hi(const PlanarDomain& d) {
    Point hi = Point::Constant(-std::numeric_limits<double>::infinity());
    for (const auto& p : d.pieces)
      for (int i = 0; i <= 64; ++i) hi = hi.cwiseMax(p.at(i / 64.0));
    return hi;
  }

  int vertex_for(const Point& p) {
    const double tol = 1e-10 * std::max(1.0, (bbox_hi(domain_) - bbox_lo(domain_)).norm());
    for (const auto& [q, id] : endpoints_)
      if ((q - p).norm() <= tol) return id;
    const int id = dt_.insert(p);
    endpoints_.emplace_back(p, id);
    return id;
  }

  void seed_boundary() {
    require(!domain_.pieces.empty(), ErrorKind::mesh, "domain has no boundary pieces");
    require(static_cast<bool>(domain_.region), ErrorKind::mesh, "domain has no region classifier");
    for (int k = 0; k < static_cast<int>(domain_.pieces.size()); ++k) {
      const BoundaryPiece& piece = domain_.pieces[k];
      const int va = vertex_for(piece.at(0.0));
      const int vb = vertex_for(piece.at(1.0));
      int m = std::max(1, static_cast<int>(std::ceil(piece.length() / h_ - 1e-9)));
      if (va == vb) m = std::max(m, 8);
      if (piece.curve) m = std::max(m, 2);
      int prev = va;
      double prev_u = 0.0;
      for (int j = 1; j <= m; ++j) {
        const double u = static_cast<double>(j) / m;
        const int cur = j == m ? vb : dt_.insert(piece.at(u));
        segs_.push_back({prev, cur, k, prev_u, u});
        prev = cur;
        prev_u = u;
      }
    }
  }

  void build_edges() {
    edges_.clear();
    for (int t = 0; t < static_cast<int>(dt_.v.size()); ++t) {
      if (!dt_.alive[t]) continue;
      for (int i = 0; i < 3; ++i) {
        EdgeSides& e = edges_[edge_key(dt_.v[t][(i + 1) % 3], dt_.v[t][(i + 2) % 3])];
        const int slot = e.t[0] < 0 ? 0 : 1;
        e.t[slot] = t;
        e.i[slot] = i;
      }
    }
  }

  bool segment_encroached(int s) const {
    const Seg& seg = segs_[s];
    const auto it = edges_.find(edge_key(seg.a, seg.b));
    if (it == edges_.end()) return true;
    const Point& pa = dt_.pts[seg.a];
    const Point& pb = dt_.pts[seg.b];
    for (int k = 0; k < 2; ++k) {
      if (it->second.t[k] < 0) continue;
      const int apex = dt_.v[it->second.t[k]][it->second.i[k]];
      if (Delaunay::is_super(apex)) continue;
      const Point& q = dt_.pts[apex];
      if ((pa - q).dot(pb - q) < 0.0) return true;
    }
    return false;
  }

  void split_segments(const std::vector<int>& ids) {
    for (const int s : ids) {
      const Seg seg = segs_[s];
      const double um = 0.5 * (seg.u0 + seg.u1);
      const int m = dt_.insert(domain_.pieces[seg.piece].at(um));
      segs_[s] = {seg.a, m, seg.piece, seg.u0, um};
      segs_.push_back({m, seg.b, seg.piece, um, seg.u1});
    }
  }

  void classify() {
    std::unordered_set<std::uint64_t> constrained;
    for (const auto& s : segs_) constrained.insert(edge_key(s.a, s.b));
    region_.assign(dt_.v.size(), -2);
    for (int start = 0; start < static_cast<int>(dt_.v.size()); ++start) {
      if (!dt_.alive[start] || region_[start] != -2) continue;
      std::vector<int> comp{start};
      region_[start] = -3;
      bool touches_super = false;
      for (size_t k = 0; k < comp.size(); ++k) {
        const int t = comp[k];
        for (int i = 0; i < 3; ++i) {
          if (Delaunay::is_super(dt_.v[t][i])) touches_super = true;
          const int n = dt_.nb[t][i];
          if (n < 0 || region_[n] != -2) continue;
          if (constrained.count(edge_key(dt_.v[t][(i + 1) % 3], dt_.v[t][(i + 2) % 3]))) continue;
          region_[n] = -3;
          comp.push_back(n);
        }
      }
      int label = -1;
      if (!touches_super) {
        std::map<int, int> votes;
        const size_t stride = std::max<size_t>(1, comp.size() / 15);
        for (size_t k = 0; k < comp.size(); k += stride) {
          const auto& tri = dt_.v[comp[k]];
          const Point c = (dt_.pts[tri[0]] + dt_.pts[tri[1]] + dt_.pts[tri[2]]) / 3.0;
          ++votes[domain_.region(c)];
        }
        int best = 0;
        for (const auto& [r, n] : votes)
          if (n > best) {
            best = n;
            label = r;
          }
      }
      for (const int t : comp) region_[t] = label;
    }
  }

  bool is_bad(int t, double ratio_limit) const {
    const Point& a = dt_.pts[dt_.v[t][0]];
    const Point& b = dt_.pts[dt_.v[t][1]];
    const Point& c = dt_.pts[dt_.v[t][2]];
    const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
    const double lmax = std::max({la, lb, lc}), lmin = std::min({la, lb, lc});
    if (lmax > options_.size_slack * h_) return true;
    const double area2 = std::abs(cross(b - a, c - a));
    const double radius = la * lb * lc / (2.0 * area2);
    return radius / lmin > ratio_limit;
  }

  Mesh finish() {
    build_edges();
    classify();
    Mesh mesh;
    mesh.pieces = domain_.pieces;
    std::vector<int> index(dt_.pts.size(), -1);
    std::vector<int> kept;
    for (int t = 0; t < static_cast<int>(dt_.v.size()); ++t)
      if (dt_.alive[t] && region_[t] >= 0) kept.push_back(t);
    std::vector<char> used(dt_.pts.size(), 0);
    for (const int t : kept)
      for (int i = 0; i < 3; ++i) used[dt_.v[t][i]] = 1;
    for (size_t p = 0; p < dt_.pts.size(); ++p) {
      if (!used[p]) continue;
      index[p] = static_cast<int>(mesh.nodes.size());
      mesh.nodes.push_back(dt_.pts[p]);
    }
    for (const int t : kept) {
      mesh.triangles.push_back({index[dt_.v[t][0]], index[dt_.v[t][1]], index[dt_.v[t][2]]});
      mesh.regions.push_back(region_[t]);
    }
    for (const auto& seg : segs_) {
      const auto it = edges_.find(edge_key(seg.a, seg.b));
      require(it != edges_.end(), ErrorKind::mesh, "boundary segment missing from the final triangulation");
      int owner = -1, owner_local = -1, other_region = -1;
      for (int k = 0; k < 2; ++k) {
        const int t = it->second.t[k];
        if (t < 0 || region_[t] < 0) continue;
        if (owner < 0 || region_[t] < region_[owner]) {
          if (owner >= 0) other_region = region_[owner];
          owner = t;
          owner_local = it->second.i[k];
        } else {
          other_region = region_[t];
        }
      }
      if (owner < 0) continue;
      const int a = dt_.v[owner][(owner_local + 1) % 3];
      const int b = dt_.v[owner][(owner_local + 2) % 3];
      MeshEdge e{index[a], index[b], domain_.pieces[seg.piece].tag, seg.piece, seg.u0, seg.u1, other_region >= 0};
      if (a != seg.a) std::swap(e.u0, e.u1);
      mesh.edges.push_back(e);
    }
    return mesh;
  }

  const PlanarDomain& domain_;
  double h_;
  TriangulateOptions options_;
  Delaunay dt_;
  std::vector<Seg> segs_;
  std::vector<std::pair<Point, int>> endpoints_;
  std::unordered_map<std::uint64_t, EdgeSides> edges_;
  std::vector<int> region_;
};

}  // namespace

Mesh triangulate(const PlanarDomain& domain, double h_target, const TriangulateOptions& options) {
  require(h_target > 0.0, ErrorKind::invalid_argument, "h_target must be positive");
  return Refiner(domain, h_target, options).run();
}

Mesh triangulate(const DomainSpec& domain, double h_target, const TriangulateOptions& options) {
  require(h_target > 0.0, ErrorKind::invalid_argument, "h_target must be positive");
  if (domain.obstacle) {
    double gap = std::numeric_limits<double>::infinity();
    for (const auto& p : domain.obstacle->samples()) gap = std::min(gap, domain.outer.project(p).distance);
    if (gap < 2.0 * h_target) {
      std::ostringstream msg;
      msg << "h_target = " << h_target << " is too coarse for the obstacle gap " << gap
          << " (need h_target <= gap / 2)";
      fail(ErrorKind::mesh, msg.str());
    }
  }
  return triangulate(planar_domain(domain), h_target, options);
}

// ---------------------------------------------------------------------------
// Refinement and derived meshes

Mesh refine(const Mesh& mesh) {
  Mesh out;
  out.pieces = mesh.pieces;
  out.nodes = mesh.nodes;
  out.generation = mesh.generation + 1;
  std::unordered_map<std::uint64_t, const MeshEdge*> tagged;
  for (const auto& e : mesh.edges) tagged[edge_key(e.a, e.b)] = &e;
  std::unordered_map<std::uint64_t, int> mid;
  auto midpoint = [&](int a, int b) {
    const auto key = edge_key(a, b);
    const auto it = mid.find(key);
    if (it != mid.end()) return it->second;
    Point p = 0.5 * (mesh.nodes[a] + mesh.nodes[b]);
    const auto te = tagged.find(key);
    if (te != tagged.end() && te->second->piece >= 0 && te->second->piece < static_cast<int>(mesh.pieces.size()))
      p = mesh.pieces[te->second->piece].at(0.5 * (te->second->u0 + te->second->u1));
    const int id = static_cast<int>(out.nodes.size());
    out.nodes.push_back(p);
    mid.emplace(key, id);
    return id;
  };
  out.triangles.reserve(4 * mesh.triangles.size());
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto [a, b, c] = mesh.triangles[t];
    const int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
    out.triangles.push_back({a, ab, ca});
    out.triangles.push_back({ab, b, bc});
    out.triangles.push_back({ca, bc, c});
    out.triangles.push_back({ab, bc, ca});
    const int r = mesh.regions.empty() ? 0 : mesh.regions[t];
    for (int k = 0; k < 4; ++k) out.regions.push_back(r);
  }
  for (const auto& e : mesh.edges) {
    const int m = mid.at(edge_key(e.a, e.b));
    const double um = 0.5 * (e.u0 + e.u1);
    out.edges.push_back({e.a, m, e.tag, e.piece, e.u0, um, e.interface});
    out.edges.push_back({m, e.b, e.tag, e.piece, um, e.u1, e.interface});
  }
  return out;
}

Mesh refine(const Mesh& mesh, int times) {
  Mesh m = mesh;
  for (int i = 0; i < times; ++i) m = refine(m);
  return m;
}

Submesh extract_region(const Mesh& mesh, int region) {
  Submesh sub;
  sub.mesh.pieces = mesh.pieces;
  sub.mesh.generation = mesh.generation;
  std::vector<int> index(mesh.nodes.size(), -1);
  std::unordered_map<std::uint64_t, std::pair<int, int>> directed;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    if ((mesh.regions.empty() ? 0 : mesh.regions[t]) != region) continue;
    for (int i = 0; i < 3; ++i) {
      const int v = mesh.triangles[t][i];
      if (index[v] < 0) {
        index[v] = static_cast<int>(sub.node_to_parent.size());
        sub.node_to_parent.push_back(v);
      }
    }
  }
  // Renumber in parent order for determinism.
  std::sort(sub.node_to_parent.begin(), sub.node_to_parent.end());
  for (size_t k = 0; k < sub.node_to_parent.size(); ++k) index[sub.node_to_parent[k]] = static_cast<int>(k);
  for (const int v : sub.node_to_parent) sub.mesh.nodes.push_back(mesh.nodes[v]);
  std::unordered_set<std::uint64_t> own;  // directed a->b as a*2^32+b
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    if ((mesh.regions.empty() ? 0 : mesh.regions[t]) != region) continue;
    const auto& tri = mesh.triangles[t];
    sub.mesh.triangles.push_back({index[tri[0]], index[tri[1]], index[tri[2]]});
    sub.mesh.regions.push_back(region);
    for (int i = 0; i < 3; ++i)
      own.insert((static_cast<std::uint64_t>(tri[i]) << 32) | static_cast<std::uint64_t>(tri[(i + 1) % 3]));
  }
  for (const auto& e : mesh.edges) {
    if (index[e.a] < 0 || index[e.b] < 0) continue;
    const bool forward = own.count((static_cast<std::uint64_t>(e.a) << 32) | static_cast<std::uint64_t>(e.b));
    const bool backward = own.count((static_cast<std::uint64_t>(e.b) << 32) | static_cast<std::uint64_t>(e.a));
    if (forward && backward) continue;
    if (forward) {
      sub.mesh.edges.push_back({index[e.a], index[e.b], e.tag, e.piece, e.u0, e.u1, false});
    } else if (backward) {
      sub.mesh.edges.push_back({index[e.b], index[e.a], e.tag, e.piece, e.u1, e.u0, false});
    }
  }
  return sub;
}

int find_piece(const Mesh& mesh, BoundaryTag tag) {
  for (int k = 0; k < static_cast<int>(mesh.pieces.size()); ++k)
    if (mesh.pieces[k].tag == tag) return k;
  fail(ErrorKind::invalid_argument, std::string("mesh has no boundary piece tagged ") + to_string(tag));
}

Mesh morph_piece(const Mesh& mesh, int piece, std::shared_ptr<const BoundaryCurve> new_curve, double falloff) {
  require(piece >= 0 && piece < static_cast<int>(mesh.pieces.size()), ErrorKind::invalid_argument,
          "morph: piece index out of range");
  const BoundaryPiece& old_piece = mesh.pieces[piece];
  require(old_piece.curve != nullptr, ErrorKind::invalid_argument, "morph: piece is not a curve arc");
  require(falloff > 0.0, ErrorKind::invalid_argument, "morph: falloff must be positive");
  const BoundaryCurve& old_curve = *old_piece.curve;
  Mesh out = mesh;
  out.pieces[piece].curve = new_curve;
  out.pieces[piece].a = out.pieces[piece].at(0.0);
  out.pieces[piece].b = out.pieces[piece].at(1.0);

  std::vector<char> fixed(mesh.nodes.size(), 0);
  for (const auto& e : mesh.edges) {
    if (e.piece == piece) {
      out.nodes[e.a] = new_curve->point(old_piece.curve_param(e.u0));
      out.nodes[e.b] = new_curve->point(old_piece.curve_param(e.u1));
      fixed[e.a] = fixed[e.b] = 1;
    }
  }
  for (const auto& e : mesh.edges) {
    if (e.piece != piece) {
      fixed[e.a] = fixed[e.a] == 1 ? 1 : 2;
      fixed[e.b] = fixed[e.b] == 1 ? 1 : 2;
    }
  }
  SegmentIndex index(old_curve.samples());
  for (size_t i = 0; i < mesh.nodes.size(); ++i) {
    if (fixed[i] == 1) continue;
    const Point& x = mesh.nodes[i];
    if (index.distance(x) >= falloff) continue;
    const CurveProjection foot = old_curve.project(x);
    const double w = std::clamp(1.0 - foot.distance / falloff, 0.0, 1.0);
    const double chi = w * w * (3.0 - 2.0 * w);
    if (chi == 0.0) continue;
    require(fixed[i] != 2, ErrorKind::mesh, "morph falloff reaches another boundary piece");
    out.nodes[i] = x + chi * (new_curve->point(foot.param) - old_curve.point(foot.param));
  }
  for (int t = 0; t < out.triangle_count(); ++t)
    require(out.triangle_area(t) > 0.0, ErrorKind::mesh, "morph inverted a triangle; perturbation too large");
  return out;
}

// ---------------------------------------------------------------------------
// I/O

void write_mesh(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write mesh file " + path.string());
  out << std::setprecision(17);
  out << "nodes " << mesh.node_count() << " triangles " << mesh.triangle_count() << " edges " << mesh.edges.size()
      << '\n';
  for (const auto& p : mesh.nodes) out << p.x() << ' ' << p.y() << '\n';
  for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (const auto& e : mesh.edges) out << e.a << ' ' << e.b << ' ' << to_string(e.tag) << '\n';
}

Mesh read_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot read mesh file " + path.string());
  std::string w1, w2, w3;
  long n = 0, t = 0, e = 0;
  if (!(in >> w1 >> n >> w2 >> t >> w3 >> e) || w1 != "nodes" || w2 != "triangles" || w3 != "edges" || n < 0 ||
      t < 0 || e < 0)
    fail(ErrorKind::io, path.string() + ": bad header, expected 'nodes N triangles T edges E'");
  Mesh mesh;
  mesh.nodes.resize(static_cast<size_t>(n));
  for (auto& p : mesh.nodes)
    if (!(in >> p.x() >> p.y())) fail(ErrorKind::io, path.string() + ": truncated node block");
  mesh.triangles.resize(static_cast<size_t>(t));
  for (auto& tri : mesh.triangles) {
    if (!(in >> tri[0] >> tri[1] >> tri[2])) fail(ErrorKind::io, path.string() + ": truncated triangle block");
    for (int v : tri) require(v >= 0 && v < n, ErrorKind::io, path.string() + ": triangle index out of range");
  }
  mesh.regions.assign(mesh.triangles.size(), 0);
  std::unordered_map<std::uint64_t, int> count;
  for (const auto& tri : mesh.triangles)
    for (int i = 0; i < 3; ++i) ++count[edge_key(tri[i], tri[(i + 1) % 3])];
  for (long k = 0; k < e; ++k) {
    MeshEdge edge{};
    std::string tag;
    if (!(in >> edge.a >> edge.b >> tag)) fail(ErrorKind::io, path.string() + ": truncated edge block");
    require(edge.a >= 0 && edge.a < n && edge.b >= 0 && edge.b < n, ErrorKind::io,
            path.string() + ": edge index out of range");
    edge.tag = parse_boundary_tag(tag);
    edge.piece = -1;
    edge.interface = count[edge_key(edge.a, edge.b)] == 2;
    mesh.edges.push_back(edge);
  }
  return mesh;
}

// ---------------------------------------------------------------------------
// Point location

std::array<double, 3> barycentric(const Point& p, const Point& a, const Point& b, const Point& c) {
  const double d = cross(b - a, c - a);
  const double l1 = cross(p - a, c - a) / d;
  const double l2 = cross(b - a, p - a) / d;
  return {1.0 - l1 - l2, l1, l2};
}

PointLocator::PointLocator(const Mesh& mesh) : mesh_(&mesh) {
  require(mesh.triangle_count() > 0, ErrorKind::invalid_argument, "point locator needs a nonempty mesh");
  Point lo = mesh.nodes[0], hi = mesh.nodes[0];
  for (const auto& p : mesh.nodes) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const int side = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.triangle_count()) / 2.0)));
  cell_ = std::max((hi - lo).maxCoeff(), 1e-300) / side;
  origin_ = lo;
  nx_ = static_cast<int>((hi.x() - lo.x()) / cell_) + 1;
  ny_ = static_cast<int>((hi.y() - lo.y()) / cell_) + 1;
  cells_.assign(static_cast<size_t>(nx_) * ny_, {});
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    Point a = mesh.nodes[tri[0]], b = a;
    for (int i = 1; i < 3; ++i) {
      a = a.cwiseMin(mesh.nodes[tri[i]]);
      b = b.cwiseMax(mesh.nodes[tri[i]]);
    }
    const int i0 = std::clamp(static_cast<int>((a.x() - origin_.x()) / cell_), 0, nx_ - 1);
    const int i1 = std::clamp(static_cast<int>((b.x() - origin_.x()) / cell_), 0, nx_ - 1);
    const int j0 = std::clamp(static_cast<int>((a.y() - origin_.y()) / cell_), 0, ny_ - 1);
    const int j1 = std::clamp(static_cast<int>((b.y() - origin_.y()) / cell_), 0, ny_ - 1);
    for (int i = i0; i <= i1; ++i)
      for (int j = j0; j <= j1; ++j) cells_[static_cast<size_t>(i) * ny_ + j].push_back(t);
  }
}

PointLocator::Hit PointLocator::locate(const Point& p) const {
  const Mesh& m = *mesh_;
  auto try_tri = [&](int t) {
    const auto& tri = m.triangles[t];
    return barycentric(p, m.nodes[tri[0]], m.nodes[tri[1]], m.nodes[tri[2]]);
  };
  const int ci = std::clamp(static_cast<int>((p.x() - origin_.x()) / cell_), 0, nx_ - 1);
  const int cj = std::clamp(static_cast<int>((p.y() - origin_.y()) / cell_), 0, ny_ - 1);
  for (const int t : cells_[static_cast<size_t>(ci) * ny_ + cj]) {
    const auto bary = try_tri(t);
    if (bary[0] >= -1e-12 && bary[1] >= -1e-12 && bary[2] >= -1e-12) return {t, bary, true};
  }
  // Nearest triangle among the neighbouring cells (or everywhere).
  Hit best;
  double best_d = std::numeric_limits<double>::infinity();
  auto consider = [&](int t) {
    const auto& tri = m.triangles[t];
    double d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) d = std::min(d, point_segment_distance(p, m.nodes[tri[i]], m.nodes[tri[(i + 1) % 3]]));
    if (d < best_d) {
      best_d = d;
      auto bary = try_tri(t);
      for (auto& b : bary) b = std::max(b, 0.0);
      const double s = bary[0] + bary[1] + bary[2];
      for (auto& b : bary) b /= s;
      best = {t, bary, false};
    }
  };
  for (int i = std::max(0, ci - 1); i <= std::min(nx_ - 1, ci + 1); ++i)
    for (int j = std::max(0, cj - 1); j <= std::min(ny_ - 1, cj + 1); ++j)
      for (const int t : cells_[static_cast<size_t>(i) * ny_ + j]) consider(t);
  if (best.triangle < 0)
    for (int t = 0; t < m.triangle_count(); ++t) consider(t);
  return best;
}

}  // namespace stokeslab
