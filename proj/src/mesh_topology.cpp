#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "vtank/error.hpp"
#include "vtank/mesh.hpp"

namespace vtank::mesh {
namespace {

constexpr double kDegenerateAreaFraction = 1e-12;
constexpr double kPi = 3.14159265358979323846;

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (std::uint64_t{a} << 32) | b;
}

struct EdgeUse {
  std::uint32_t count = 0;
  std::uint32_t forward = 0;  // traversals from lower to higher index
  std::uint32_t first_triangle = 0;
};

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

 private:
  std::vector<std::size_t> parent_;
};

double orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return dot(cross(b - a, c - a), d - a);
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

bool segment_hits_triangle(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c) {
  int sp = sign(orient3d(a, b, c, p));
  int sq = sign(orient3d(a, b, c, q));
  if (sp == sq) return false;  // same side, or coplanar
  int s1 = sign(orient3d(p, q, a, b));
  int s2 = sign(orient3d(p, q, b, c));
  int s3 = sign(orient3d(p, q, c, a));
  bool nonneg = s1 >= 0 && s2 >= 0 && s3 >= 0;
  bool nonpos = s1 <= 0 && s2 <= 0 && s3 <= 0;
  return nonneg || nonpos;
}

bool triangles_intersect(const std::array<Vec3, 3>& t, const std::array<Vec3, 3>& u) {
  for (int e = 0; e < 3; ++e) {
    if (segment_hits_triangle(t[e], t[(e + 1) % 3], u[0], u[1], u[2])) return true;
    if (segment_hits_triangle(u[e], u[(e + 1) % 3], t[0], t[1], t[2])) return true;
  }
  return false;
}

}  // namespace

BoundingBox bounding_box(const TriangleMesh& mesh) {
  if (mesh.vertices.empty()) fail(Errc::EmptyMesh, "bounding box of an empty mesh");
  BoundingBox box{mesh.vertices.front(), mesh.vertices.front()};
  for (const Vec3& p : mesh.vertices) {
    for (int a = 0; a < 3; ++a) {
      box.min[a] = std::min(box.min[a], p[a]);
      box.max[a] = std::max(box.max[a], p[a]);
    }
  }
  return box;
}

double triangle_area(const TriangleMesh& mesh, std::size_t t) {
  const Triangle& tri = mesh.triangles[t];
  const Vec3& a = mesh.vertices[tri[0]];
  return 0.5 * norm(cross(mesh.vertices[tri[1]] - a, mesh.vertices[tri[2]] - a));
}

double surface_area(const TriangleMesh& mesh) {
  double sum = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) sum += triangle_area(mesh, t);
  return sum;
}

double signed_volume(const TriangleMesh& mesh) {
  double sum = 0.0;
  for (const Triangle& t : mesh.triangles) {
    sum += dot(mesh.vertices[t[0]], cross(mesh.vertices[t[1]], mesh.vertices[t[2]]));
  }
  return sum / 6.0;
}

std::size_t count_self_intersections(const TriangleMesh& mesh) {
  const std::size_t n = mesh.triangles.size();
  if (n < 2) return 0;
  BoundingBox all = bounding_box(mesh);
  Vec3 ext = all.extent();
  const int cells = std::clamp(static_cast<int>(std::cbrt(static_cast<double>(n))), 1, 64);
  auto cell_of = [&](double v, int axis) {
    if (!(ext[axis] > 0.0)) return 0;
    int c = static_cast<int>((v - all.min[axis]) / ext[axis] * cells);
    return std::clamp(c, 0, cells - 1);
  };

  std::vector<BoundingBox> boxes(n);
  std::unordered_map<int, std::vector<std::uint32_t>> grid;
  for (std::size_t t = 0; t < n; ++t) {
    const Triangle& tri = mesh.triangles[t];
    BoundingBox b{mesh.vertices[tri[0]], mesh.vertices[tri[0]]};
    for (int k = 1; k < 3; ++k) {
      for (int a = 0; a < 3; ++a) {
        b.min[a] = std::min(b.min[a], mesh.vertices[tri[k]][a]);
        b.max[a] = std::max(b.max[a], mesh.vertices[tri[k]][a]);
      }
    }
    boxes[t] = b;
    for (int i = cell_of(b.min.x, 0); i <= cell_of(b.max.x, 0); ++i)
      for (int j = cell_of(b.min.y, 1); j <= cell_of(b.max.y, 1); ++j)
        for (int k = cell_of(b.min.z, 2); k <= cell_of(b.max.z, 2); ++k)
          grid[(i * cells + j) * cells + k].push_back(static_cast<std::uint32_t>(t));
  }

  std::size_t hits = 0;
  for (const auto& [cell, members] : grid) {
    for (std::size_t p = 0; p < members.size(); ++p) {
      for (std::size_t q = p + 1; q < members.size(); ++q) {
        const std::uint32_t s = members[p], t = members[q];
        const BoundingBox& bs = boxes[s];
        const BoundingBox& bt = boxes[t];
        Vec3 lo, hi;
        bool overlap = true;
        for (int a = 0; a < 3 && overlap; ++a) {
          lo[a] = std::max(bs.min[a], bt.min[a]);
          hi[a] = std::min(bs.max[a], bt.max[a]);
          overlap = lo[a] <= hi[a];
        }
        if (!overlap) continue;
        // Count each pair once: in the cell holding the overlap's min corner.
        if ((cell_of(lo.x, 0) * cells + cell_of(lo.y, 1)) * cells + cell_of(lo.z, 2) != cell) continue;
        const Triangle& ts = mesh.triangles[s];
        const Triangle& tt = mesh.triangles[t];
        bool shared = false;
        for (auto i : ts)
          for (auto j : tt) shared = shared || i == j;
        if (shared) continue;
        std::array<Vec3, 3> a{mesh.vertices[ts[0]], mesh.vertices[ts[1]], mesh.vertices[ts[2]]};
        std::array<Vec3, 3> b{mesh.vertices[tt[0]], mesh.vertices[tt[1]], mesh.vertices[tt[2]]};
        if (triangles_intersect(a, b)) ++hits;
      }
    }
  }
  return hits;
}

ValidationReport validate(const TriangleMesh& mesh) {
  ValidationReport r = validate_topology(mesh);
  if (r.triangle_count == 0) return r;
  r.self_intersection_count = count_self_intersections(mesh);
  if (r.self_intersection_count > 0)
    r.messages.push_back("warning: " + std::to_string(r.self_intersection_count) +
                         " intersecting triangle pairs found; avoid self-intersecting surfaces");
  return r;
}

ValidationReport validate_topology(const TriangleMesh& mesh) {
  ValidationReport r;
  r.triangle_count = mesh.triangles.size();
  r.degenerate_triangle_count = mesh.collapsed_on_weld;
  if (mesh.triangles.empty() || mesh.vertices.empty()) {
    r.messages.push_back("mesh has no triangles");
    return r;
  }

  const double diag = bounding_box(mesh).diagonal();
  const double area_floor = diag * diag * kDegenerateAreaFraction;

  std::unordered_map<std::uint64_t, EdgeUse> edges;
  edges.reserve(mesh.triangles.size() * 2);
  DisjointSet components(mesh.triangles.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const Triangle& tri = mesh.triangles[t];
    if (triangle_area(mesh, t) < area_floor) ++r.degenerate_triangle_count;
    for (int e = 0; e < 3; ++e) {
      std::uint32_t a = tri[e], b = tri[(e + 1) % 3];
      EdgeUse& use = edges[edge_key(a, b)];
      if (use.count == 0) use.first_triangle = static_cast<std::uint32_t>(t);
      else components.unite(t, use.first_triangle);
      ++use.count;
      if (a < b) ++use.forward;
    }
  }

  r.edge_count = edges.size();
  r.orientation_consistent = true;
  for (const auto& [key, use] : edges) {
    if (use.count == 1) ++r.boundary_edge_count;
    else if (use.count > 2) ++r.nonmanifold_edge_count;
    else if (use.forward != 1) r.orientation_consistent = false;
  }

  std::vector<char> root_seen(mesh.triangles.size(), 0);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    std::size_t root = components.find(t);
    if (!root_seen[root]) {
      root_seen[root] = 1;
      ++r.component_count;
    }
  }

  r.signed_volume = signed_volume(mesh);

  if (r.boundary_edge_count > 0)
    r.messages.push_back(std::to_string(r.boundary_edge_count) +
                         " boundary edges: the surface has holes or gaps and is not watertight");
  if (r.nonmanifold_edge_count > 0)
    r.messages.push_back(std::to_string(r.nonmanifold_edge_count) +
                         " non-manifold edges shared by more than two triangles");
  if (r.degenerate_triangle_count > 0)
    r.messages.push_back(std::to_string(r.degenerate_triangle_count) + " degenerate (zero-area) triangles");
  if (r.component_count != 1)
    r.messages.push_back("geometry has " + std::to_string(r.component_count) +
                         " disconnected parts; a single closed volume is required");
  if (!r.orientation_consistent)
    r.messages.push_back("triangle normals are not oriented coherently; align all normals outward");
  if (r.orientation_consistent && r.boundary_edge_count == 0 && r.nonmanifold_edge_count == 0 &&
      !(r.signed_volume > 0.0))
    r.messages.push_back("normals point inward (negative enclosed volume); flip them to face outward");
  r.is_valid = r.boundary_edge_count == 0 && r.nonmanifold_edge_count == 0 &&
               r.degenerate_triangle_count == 0 && r.component_count == 1 &&
               r.orientation_consistent && r.signed_volume > 0.0;
  return r;
}

Vec3 apply(const Attitude& attitude, const Vec3& p) {
  Vec3 q = p;
  if (attitude.trim_deg != 0.0) {
    const double a = attitude.trim_deg * kPi / 180.0;
    const double c = std::cos(a), s = std::sin(a);
    Vec3 r = p - attitude.cog;
    q = attitude.cog + Vec3{r.x * c - r.z * s, r.y, r.x * s + r.z * c};
  }
  q.z += attitude.sink;
  return q;
}

TriangleMesh transformed(const TriangleMesh& mesh, const Attitude& attitude) {
  TriangleMesh out = mesh;
  for (Vec3& v : out.vertices) v = apply(attitude, v);
  return out;
}

TriangleMesh translated(const TriangleMesh& mesh, const Vec3& offset) {
  TriangleMesh out = mesh;
  for (Vec3& v : out.vertices) v += offset;
  return out;
}

TriangleMesh scaled(const TriangleMesh& mesh, double factor) {
  TriangleMesh out = mesh;
  for (Vec3& v : out.vertices) v *= factor;
  return out;
}

}  // namespace vtank::mesh
