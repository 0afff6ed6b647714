#include "whisker/scene.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace whisker {

namespace {

double sdf_sphere(double radius, const Vec3& p) { return p.norm() - radius; }

double sdf_cylinder(double radius, const Vec3& p) {
  return std::hypot(p.x(), p.y()) - radius;
}

double sdf_capped_cylinder(double radius, double half_height, const Vec3& p) {
  const double dr = std::hypot(p.x(), p.y()) - radius;
  const double dz = std::abs(p.z()) - half_height;
  const double outside =
      std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
  return outside + std::min(std::max(dr, dz), 0.0);
}

double sdf_box(const Vec3& half_extents, const Vec3& p) {
  const Vec3 q = p.cwiseAbs() - half_extents;
  const Vec3 qpos = q.cwiseMax(0.0);
  return qpos.norm() + std::min(q.maxCoeff(), 0.0);
}

// Right circular cone, base radius r at z=0, apex at z=h.
double sdf_cone(double r, double h, const Vec3& p) {
  const double hh = 0.5 * h;
  const Eigen::Vector2d q(std::hypot(p.x(), p.y()), p.z() - hh);
  const Eigen::Vector2d k1(0.0, hh);       // tip radius 0
  const Eigen::Vector2d k2(-r, 2.0 * hh);  // (r2 - r1, 2h)
  Eigen::Vector2d ca(q.x() - std::min(q.x(), q.y() < 0.0 ? r : 0.0),
                     std::abs(q.y()) - hh);
  const double t =
      std::clamp((k1 - q).dot(k2) / k2.squaredNorm(), 0.0, 1.0);
  const Eigen::Vector2d cb = q - k1 + k2 * t;
  const double s = (cb.x() < 0.0 && ca.y() < 0.0) ? -1.0 : 1.0;
  return s * std::sqrt(std::min(ca.squaredNorm(), cb.squaredNorm()));
}

double sdf_half_space(const Vec3& p) { return p.z(); }

}  // namespace

double shape_sdf(const Shape& shape, const Vec3& p) {
  const Vec3 local = shape.pose.inverse() * p;
  switch (shape.type) {
    case ShapeType::Sphere:
      return sdf_sphere(shape.radius, local);
    case ShapeType::Cylinder:
      return sdf_cylinder(shape.radius, local);
    case ShapeType::CappedCylinder:
      return sdf_capped_cylinder(shape.radius, shape.half_height, local);
    case ShapeType::Box:
      return sdf_box(shape.half_extents, local);
    case ShapeType::Cone:
      return sdf_cone(shape.radius, shape.height, local);
    case ShapeType::HalfSpace:
      return sdf_half_space(local);
  }
  throw std::logic_error("shape_sdf: unknown shape type");
}

SdfResult sdf_eval(const Scene& scene, const Vec3& p) {
  if (!p.allFinite()) {
    throw std::invalid_argument("sdf_eval: query point not finite");
  }
  SdfResult result;
  if (scene.shapes.empty()) {
    return result;  // +inf, flagged normal
  }
  const Shape* best = nullptr;
  for (const Shape& s : scene.shapes) {
    const double d = shape_sdf(s, p);
    if (d < result.distance) {
      result.distance = d;
      best = &s;
    }
  }
  // Normal from a central-difference gradient of the winning primitive.
  const double h = 1e-7;
  Vec3 g;
  for (int axis = 0; axis < 3; ++axis) {
    Vec3 dp = Vec3::Zero();
    dp[axis] = h;
    g[axis] = (shape_sdf(*best, p + dp) - shape_sdf(*best, p - dp)) / (2.0 * h);
  }
  const double gn = g.norm();
  if (gn > 0.5) {
    result.normal = g / gn;
    result.normal_valid = true;
  }
  return result;
}

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c) {
  // Ericson, Real-Time Collision Detection, closest point on triangle.
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return (p - a).norm();

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return (p - b).norm();

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return (p - (a + v * ab)).norm();
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return (p - c).norm();

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return (p - (a + w * ac)).norm();
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (p - (b + w * (c - b))).norm();
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return (p - (a + ab * v + ac * w)).norm();
}

double nearest_surface_distance(const Scene& scene, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const Shape& s : scene.shapes) {
    best = std::min(best, std::abs(shape_sdf(s, p)));
  }
  if (scene.mesh) {
    for (const auto& f : scene.mesh->faces) {
      best = std::min(best, point_triangle_distance(p, scene.mesh->vertices[f[0]],
                                                    scene.mesh->vertices[f[1]],
                                                    scene.mesh->vertices[f[2]]));
    }
  }
  return best;
}

namespace {

Pose pose_from_json(const nlohmann::json& j) {
  Vec3 t = Vec3::Zero();
  double qw = 1.0, qx = 0.0, qy = 0.0, qz = 0.0;
  if (j.contains("translation")) {
    const auto& tj = j.at("translation");
    t = Vec3(tj.at(0).get<double>(), tj.at(1).get<double>(),
             tj.at(2).get<double>());
  }
  if (j.contains("rotation")) {
    const auto& q = j.at("rotation");
    qw = q.at(0).get<double>();
    qx = q.at(1).get<double>();
    qy = q.at(2).get<double>();
    qz = q.at(3).get<double>();
  }
  return Pose::from_quaternion(t, qw, qx, qy, qz);
}

ShapeType shape_type_from_string(const std::string& s) {
  if (s == "sphere") return ShapeType::Sphere;
  if (s == "cylinder") return ShapeType::Cylinder;
  if (s == "capped_cylinder") return ShapeType::CappedCylinder;
  if (s == "box") return ShapeType::Box;
  if (s == "cone") return ShapeType::Cone;
  if (s == "half_space") return ShapeType::HalfSpace;
  throw std::invalid_argument("unknown shape type: " + s);
}

}  // namespace

Scene load_scene(const nlohmann::json& j, const std::string& base_dir) {
  Scene scene;
  if (j.contains("shapes")) {
    for (const auto& sj : j.at("shapes")) {
      Shape s;
      s.type = shape_type_from_string(sj.at("type").get<std::string>());
      if (sj.contains("pose")) s.pose = pose_from_json(sj.at("pose"));
      if (sj.contains("radius")) s.radius = sj.at("radius").get<double>();
      if (sj.contains("half_height"))
        s.half_height = sj.at("half_height").get<double>();
      if (sj.contains("height")) s.height = sj.at("height").get<double>();
      if (sj.contains("half_extents")) {
        const auto& he = sj.at("half_extents");
        s.half_extents = Vec3(he.at(0).get<double>(), he.at(1).get<double>(),
                              he.at(2).get<double>());
      }
      scene.shapes.push_back(s);
    }
  }
  if (j.contains("mesh") && !j.at("mesh").is_null()) {
    std::filesystem::path path = j.at("mesh").get<std::string>();
    if (path.is_relative() && !base_dir.empty()) {
      path = std::filesystem::path(base_dir) / path;
    }
    const std::string ext = path.extension().string();
    if (ext == ".off" || ext == ".OFF") {
      scene.mesh = load_off(path.string());
    } else if (ext == ".stl" || ext == ".STL") {
      scene.mesh = load_stl(path.string());
    } else {
      throw std::invalid_argument("unsupported mesh format: " + ext);
    }
  }
  return scene;
}

Scene load_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene file: " + path);
  nlohmann::json j;
  in >> j;
  return load_scene(j, std::filesystem::path(path).parent_path().string());
}

TriMesh load_off(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open OFF file: " + path);
  std::string token;
  in >> token;
  if (token != "OFF") throw std::runtime_error("not an OFF file: " + path);
  size_t nv = 0, nf = 0, ne = 0;
  in >> nv >> nf >> ne;
  TriMesh mesh;
  mesh.vertices.reserve(nv);
  for (size_t i = 0; i < nv; ++i) {
    double x, y, z;
    in >> x >> y >> z;
    mesh.vertices.emplace_back(x, y, z);
  }
  for (size_t i = 0; i < nf; ++i) {
    int count;
    in >> count;
    std::vector<int> idx(count);
    for (int k = 0; k < count; ++k) in >> idx[k];
    // fan-triangulate polygons
    for (int k = 1; k + 1 < count; ++k) {
      mesh.faces.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  if (!in) throw std::runtime_error("truncated OFF file: " + path);
  return mesh;
}

TriMesh load_stl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open STL file: " + path);
  char header[80];
  in.read(header, 80);
  uint32_t n = 0;
  in.read(reinterpret_cast<char*>(&n), 4);
  TriMesh mesh;
  mesh.vertices.reserve(3 * n);
  mesh.faces.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    float buf[12];
    in.read(reinterpret_cast<char*>(buf), sizeof(buf));
    uint16_t attr;
    in.read(reinterpret_cast<char*>(&attr), 2);
    const int base = static_cast<int>(mesh.vertices.size());
    for (int v = 0; v < 3; ++v) {
      mesh.vertices.emplace_back(buf[3 + 3 * v], buf[4 + 3 * v],
                                 buf[5 + 3 * v]);
    }
    mesh.faces.push_back({base, base + 1, base + 2});
  }
  if (!in) throw std::runtime_error("truncated STL file: " + path);
  return mesh;
}

}  // namespace whisker
