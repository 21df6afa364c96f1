#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vtank/vec3.hpp"

namespace vtank::mesh {

enum class SourceFormat { StlBinary, StlAscii, Obj };

const char* to_string(SourceFormat f) noexcept;

using Triangle = std::array<std::uint32_t, 3>;

/// Indexed triangle soup with welded vertices.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  SourceFormat source_format = SourceFormat::StlBinary;
  /// Input facets dropped during welding because two of their corners
  /// merged. validate() counts them as degenerate.
  std::size_t collapsed_on_weld = 0;
};

struct BoundingBox {
  Vec3 min;
  Vec3 max;

  Vec3 extent() const { return max - min; }
  Vec3 center() const { return (min + max) * 0.5; }
  double diagonal() const { return norm(extent()); }
  bool contains(const Vec3& p) const {
    return p.x >= min.x && p.y >= min.y && p.z >= min.z && p.x <= max.x && p.y <= max.y &&
           p.z <= max.z;
  }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct ValidationReport {
  bool is_valid = false;
  std::size_t triangle_count = 0;
  std::size_t edge_count = 0;
  std::size_t boundary_edge_count = 0;
  std::size_t nonmanifold_edge_count = 0;
  std::size_t degenerate_triangle_count = 0;
  std::size_t component_count = 0;
  bool orientation_consistent = false;
  double signed_volume = 0.0;
  /// Advisory; never affects is_valid.
  std::size_t self_intersection_count = 0;
  std::vector<std::string> messages;
};

/// Rigid placement of the hull: rotation about the y axis through `cog`
/// by -trim_deg (trim is bow-up positive), then +z translation by `sink`.
struct Attitude {
  double sink = 0.0;
  double trim_deg = 0.0;
  Vec3 cog;
};

struct Polyline {
  std::vector<Vec3> points;
  bool closed = false;
};

struct WettedPiece {
  std::size_t triangle = 0;
  std::vector<Vec3> polygon;  // convex, same winding as the source triangle
};

struct ClipResult {
  double wetted_area = 0.0;
  double submerged_volume = 0.0;
  std::vector<Polyline> waterline_contour;
  std::vector<WettedPiece> wetted_triangles;
  Vec3 hydrostatic_center;
  std::vector<std::string> messages;
};

// -- io -------------------------------------------------------------------

/// Parses binary STL, ASCII STL or OBJ (auto-detected) and welds vertices.
/// Throws Error(MalformedFile | UnsupportedFeature).
TriangleMesh parse_mesh(std::string_view bytes, std::string_view filename_hint = {});

/// Binary STL with facet normals recomputed from the winding.
std::string to_binary_stl(const TriangleMesh& mesh);

// -- measures ---------------------------------------------------------------

/// Throws Error(EmptyMesh) when there are no vertices.
BoundingBox bounding_box(const TriangleMesh& mesh);

double triangle_area(const TriangleMesh& mesh, std::size_t t);
double surface_area(const TriangleMesh& mesh);
double signed_volume(const TriangleMesh& mesh);

ValidationReport validate(const TriangleMesh& mesh);

/// validate() without the self-intersection search.
ValidationReport validate_topology(const TriangleMesh& mesh);

/// Exact-predicate triangle/triangle intersection count over pairs that
/// share no vertex.
std::size_t count_self_intersections(const TriangleMesh& mesh);

// -- transforms ---------------------------------------------------------------

Vec3 apply(const Attitude& attitude, const Vec3& p);
TriangleMesh transformed(const TriangleMesh& mesh, const Attitude& attitude);
TriangleMesh translated(const TriangleMesh& mesh, const Vec3& offset);
TriangleMesh scaled(const TriangleMesh& mesh, double factor);

// -- decimation ---------------------------------------------------------------

inline constexpr std::size_t kPreviewTriangles = 20000;

/// Uniform-grid vertex clustering. Throws Error(EmptyMesh) and
/// Error(Validation) when target_triangles < 4.
TriangleMesh decimate(const TriangleMesh& mesh, std::size_t target_triangles);

// -- clipping -----------------------------------------------------------------

enum class ClipCheck { Validate, Trusted };

/// Places the mesh at `attitude` and clips it against the half-space
/// z < water_z. With ClipCheck::Validate a mesh that is not watertight and
/// outward oriented is rejected with Error(InvalidMesh).
ClipResult clip_below_plane(const TriangleMesh& mesh, double water_z, const Attitude& attitude = {},
                            ClipCheck check = ClipCheck::Validate);

/// Complementary half-space z >= water_z (no contour).
ClipResult clip_above_plane(const TriangleMesh& mesh, double water_z, const Attitude& attitude = {},
                            ClipCheck check = ClipCheck::Validate);

}  // namespace vtank::mesh
