#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <unordered_map>

#include "vtank/error.hpp"
#include "vtank/mesh.hpp"

namespace vtank::mesh {
namespace {

constexpr int kMaxSearchIterations = 20;
constexpr double kWeldFraction = 1e-7;

struct Cluster {
  Vec3 sum;
  std::size_t count = 0;
  // Bit a set: cluster holds a vertex at the global minimum (a) or
  // maximum (a + 3) on axis a.
  unsigned extremes = 0;
};

TriangleMesh cluster(const TriangleMesh& mesh, const BoundingBox& box, long resolution) {
  const Vec3 ext = box.extent();
  const double longest = std::max({ext.x, ext.y, ext.z});
  const double cell = longest / static_cast<double>(resolution);

  std::unordered_map<std::uint64_t, std::uint32_t> cell_to_cluster;
  std::vector<Cluster> clusters;
  std::vector<std::uint32_t> vertex_cluster(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& p = mesh.vertices[i];
    std::uint64_t key = 0;
    for (int a = 0; a < 3; ++a) {
      auto c = static_cast<std::uint64_t>(std::min<double>(std::floor((p[a] - box.min[a]) / cell), 2097151.0));
      key = (key << 21) | c;
    }
    auto [it, inserted] = cell_to_cluster.try_emplace(key, static_cast<std::uint32_t>(clusters.size()));
    if (inserted) clusters.emplace_back();
    Cluster& cl = clusters[it->second];
    cl.sum += p;
    ++cl.count;
    for (int a = 0; a < 3; ++a) {
      if (p[a] == box.min[a]) cl.extremes |= 1u << a;
      if (p[a] == box.max[a]) cl.extremes |= 1u << (a + 3);
    }
    vertex_cluster[i] = it->second;
  }

  TriangleMesh out;
  out.source_format = mesh.source_format;
  std::vector<std::int64_t> remap(clusters.size(), -1);
  std::set<std::array<std::uint32_t, 3>> seen;
  for (const Triangle& t : mesh.triangles) {
    Triangle c{vertex_cluster[t[0]], vertex_cluster[t[1]], vertex_cluster[t[2]]};
    if (c[0] == c[1] || c[1] == c[2] || c[0] == c[2]) continue;
    std::array<std::uint32_t, 3> sorted = c;
    std::sort(sorted.begin(), sorted.end());
    if (!seen.insert(sorted).second) continue;
    Triangle mapped{};
    for (int k = 0; k < 3; ++k) {
      if (remap[c[k]] < 0) {
        const Cluster& cl = clusters[c[k]];
        Vec3 rep = cl.sum / static_cast<double>(cl.count);
        for (int a = 0; a < 3; ++a) {
          if (cl.extremes & (1u << a)) rep[a] = box.min[a];
          if (cl.extremes & (1u << (a + 3))) rep[a] = box.max[a];
        }
        remap[c[k]] = static_cast<std::int64_t>(out.vertices.size());
        out.vertices.push_back(rep);
      }
      mapped[k] = static_cast<std::uint32_t>(remap[c[k]]);
    }
    out.triangles.push_back(mapped);
  }
  return out;
}

bool preserves_box(const TriangleMesh& m, const BoundingBox& box) {
  if (m.vertices.empty()) return false;
  const double tol = box.diagonal() * kWeldFraction;
  BoundingBox b = bounding_box(m);
  for (int a = 0; a < 3; ++a) {
    if (std::abs(b.min[a] - box.min[a]) > tol || std::abs(b.max[a] - box.max[a]) > tol) return false;
  }
  return true;
}

}  // namespace

TriangleMesh decimate(const TriangleMesh& mesh, std::size_t target_triangles) {
  if (mesh.vertices.empty() || mesh.triangles.empty()) fail(Errc::EmptyMesh, "cannot decimate an empty mesh");
  if (target_triangles < 4) fail(Errc::Validation, "decimation target must be at least 4 triangles");
  if (mesh.triangles.size() <= target_triangles) return mesh;

  const BoundingBox box = bounding_box(mesh);
  if (!(box.diagonal() > 0.0)) return mesh;

  // Output size grows with resolution; keep the finest grid that fits.
  long lo = 1, hi = 1L << 20;
  std::optional<TriangleMesh> best;
  for (int iter = 0; iter < kMaxSearchIterations && lo <= hi; ++iter) {
    long mid = lo + (hi - lo) / 2;
    TriangleMesh candidate = cluster(mesh, box, mid);
    const std::size_t n = candidate.triangles.size();
    if (n > target_triangles) {
      hi = mid - 1;
    } else {
      if (n >= 4 && preserves_box(candidate, box)) best = std::move(candidate);
      lo = mid + 1;
    }
  }
  if (!best) return mesh;
  return std::move(*best);
}

}  // namespace vtank::mesh
