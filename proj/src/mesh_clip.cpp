#include <algorithm>
#include <unordered_map>

#include "vtank/error.hpp"
#include "vtank/mesh.hpp"

namespace vtank::mesh {
namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (std::uint64_t{a} << 32) | b;
}

struct Moments {
  double area = 0.0;
  double volume = 0.0;
  Vec3 first;  // integral of position over the clipped solid
};

// Contribution of one planar triangle (outward winding) of the clipped
// solid's boundary. The cap at z = w adds nothing because every vector
// field used here vanishes on it.
void accumulate(Moments& m, const Vec3& a, const Vec3& b, const Vec3& c, double w) {
  Vec3 s = cross(b - a, c - a) * 0.5;
  m.area += norm(s);
  m.volume += s.z * ((a.z + b.z + c.z) / 3.0 - w);
  // Quadratic integrands: the edge-midpoint rule is exact.
  Vec3 mids[3] = {(a + b) * 0.5, (b + c) * 0.5, (c + a) * 0.5};
  Vec3 q;
  for (const Vec3& p : mids) {
    q.x += p.x * (p.z - w);
    q.y += p.y * (p.z - w);
    q.z += 0.5 * (p.z * p.z - w * w);
  }
  m.first += q * (s.z / 3.0);
}

ClipResult clip_halfspace(const TriangleMesh& mesh, double w, const Attitude& attitude, ClipCheck check,
                          bool below) {
  if (check == ClipCheck::Validate) {
    ValidationReport report = validate_topology(mesh);
    if (!report.is_valid) {
      std::string why = report.messages.empty() ? "invalid mesh" : report.messages.front();
      fail(Errc::InvalidMesh, "clip requires a watertight outward mesh: " + why);
    }
  }

  std::vector<Vec3> v(mesh.vertices.size());
  std::vector<char> keep(mesh.vertices.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = apply(attitude, mesh.vertices[i]);
    // A vertex exactly on the plane counts as dry.
    keep[i] = below ? (v[i].z < w) : !(v[i].z < w);
  }

  auto crossing = [&](std::uint32_t i, std::uint32_t j) {
    if (i > j) std::swap(i, j);
    const Vec3& a = v[i];
    const Vec3& b = v[j];
    double t = (w - a.z) / (b.z - a.z);
    Vec3 p = a + (b - a) * t;
    p.z = w;
    return p;
  };

  ClipResult out;
  Moments m;
  struct Segment {
    std::uint64_t from, to;
    Vec3 a, b;
  };
  std::vector<Segment> segments;

  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const Triangle& tri = mesh.triangles[t];
    int kept = keep[tri[0]] + keep[tri[1]] + keep[tri[2]];
    if (kept == 0) continue;
    WettedPiece piece;
    piece.triangle = t;
    if (kept == 3) {
      piece.polygon = {v[tri[0]], v[tri[1]], v[tri[2]]};
    } else {
      Segment seg{};
      for (int e = 0; e < 3; ++e) {
        std::uint32_t cur = tri[e], next = tri[(e + 1) % 3];
        if (keep[cur]) piece.polygon.push_back(v[cur]);
        if (keep[cur] != keep[next]) {
          Vec3 p = crossing(cur, next);
          piece.polygon.push_back(p);
          if (keep[cur]) {
            seg.from = edge_key(cur, next);
            seg.a = p;
          } else {
            seg.to = edge_key(cur, next);
            seg.b = p;
          }
        }
      }
      segments.push_back(seg);
    }
    for (std::size_t k = 1; k + 1 < piece.polygon.size(); ++k) {
      accumulate(m, piece.polygon[0], piece.polygon[k], piece.polygon[k + 1], w);
    }
    out.wetted_triangles.push_back(std::move(piece));
  }

  out.wetted_area = m.area;
  out.submerged_volume = std::max(0.0, m.volume);
  if (m.volume > 0.0) out.hydrostatic_center = m.first / m.volume;

  if (below) {
    // Chain segments through the edges they start and end on.
    std::unordered_map<std::uint64_t, std::size_t> by_start;
    std::unordered_map<std::uint64_t, std::size_t> by_end;
    for (std::size_t i = 0; i < segments.size(); ++i) {
      by_start.emplace(segments[i].from, i);
      by_end.emplace(segments[i].to, i);
    }
    std::vector<char> used(segments.size(), 0);
    std::size_t open = 0;
    for (std::size_t s0 = 0; s0 < segments.size(); ++s0) {
      if (used[s0]) continue;
      // Walk back to the start of an open chain, if any.
      std::size_t start = s0;
      for (std::size_t guard = 0; guard < segments.size(); ++guard) {
        auto it = by_end.find(segments[start].from);
        if (it == by_end.end() || used[it->second] || it->second == s0) break;
        start = it->second;
      }
      Polyline line;
      line.points.push_back(segments[start].a);
      std::size_t cur = start;
      while (true) {
        used[cur] = 1;
        line.points.push_back(segments[cur].b);
        auto it = by_start.find(segments[cur].to);
        if (it == by_start.end()) break;
        if (it->second == start) {
          line.closed = true;
          line.points.pop_back();
          break;
        }
        if (used[it->second]) break;
        cur = it->second;
      }
      if (!line.closed) ++open;
      out.waterline_contour.push_back(std::move(line));
    }
    if (open > 0) out.messages.push_back(std::to_string(open) + " open waterline chains");
  }
  return out;
}

}  // namespace

ClipResult clip_below_plane(const TriangleMesh& mesh, double water_z, const Attitude& attitude, ClipCheck check) {
  return clip_halfspace(mesh, water_z, attitude, check, true);
}

ClipResult clip_above_plane(const TriangleMesh& mesh, double water_z, const Attitude& attitude, ClipCheck check) {
  return clip_halfspace(mesh, water_z, attitude, check, false);
}

}  // namespace vtank::mesh
