#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "whisker/geometry.hpp"

namespace whisker {

enum class ShapeType { Sphere, Cylinder, CappedCylinder, Box, Cone, HalfSpace };

/// One SDF primitive with its own pose (local frame -> world).
/// Local conventions: cylinders and cones are aligned with local +z;
/// the cone has base radius `radius` at z=0 and its apex at z=`height`;
/// a half-space occupies local z <= 0 (surface is the local z=0 plane).
struct Shape {
  ShapeType type = ShapeType::Sphere;
  Pose pose;
  double radius = 0.0;        // sphere / cylinder / cone base
  double half_height = 0.0;   // capped cylinder
  double height = 0.0;        // cone
  Vec3 half_extents = Vec3::Zero();  // box
};

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};

struct Scene {
  std::vector<Shape> shapes;
  std::optional<TriMesh> mesh;

  bool empty() const { return shapes.empty() && !mesh.has_value(); }
};

struct SdfResult {
  double distance = std::numeric_limits<double>::infinity();
  Vec3 normal = Vec3::UnitX();
  /// False at interior singular points (e.g. a sphere center) and for
  /// empty scenes; the normal value is then arbitrary.
  bool normal_valid = false;
};

/// Exact signed distance of p to a single primitive.
double shape_sdf(const Shape& shape, const Vec3& p);

/// Signed distance to the scene (minimum over primitives; meshes are not
/// part of the signed field) plus the outward unit normal from the SDF
/// gradient. Empty scene returns +inf with an invalid normal.
SdfResult sdf_eval(const Scene& scene, const Vec3& p);

/// Unsigned distance to the nearest surface: |sdf| over primitives and the
/// exact point-to-triangle minimum over the mesh, whichever is closer.
double nearest_surface_distance(const Scene& scene, const Vec3& p);

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c);

/// Scene description from JSON: {"shapes": [{"type", "pose": {"translation",
/// "rotation" (quaternion wxyz)}, ...dimensions}], "mesh": "path.off|.stl"}.
/// Relative mesh paths are resolved against base_dir.
Scene load_scene(const nlohmann::json& j, const std::string& base_dir = "");
Scene load_scene_file(const std::string& path);

TriMesh load_off(const std::string& path);
TriMesh load_stl(const std::string& path);

}  // namespace whisker
