#include "whisker/calibration.hpp"

#include <cmath>
#include <vector>

#include "whisker/random.hpp"

namespace whisker {

namespace {

// Unit tangent of the rest centerline at arc s.
Vec3 rest_tangent(const WhiskerRod& rod, double s) {
  const double l = rod.segment_length();
  const int n = rod.n_segments();
  const int i = std::clamp(static_cast<int>(s / l), 0, n - 1);
  return (rod.rest_nodes[i + 1] - rod.rest_nodes[i]).normalized();
}

// Direction the rod gets pushed by obstacles on its convex side: the
// in-plane normal toward the center of pre-curvature (+x at the root).
Vec3 inward_normal(const Vec3& tangent) {
  return Vec3(tangent.z(), 0.0, -tangent.x()).normalized();
}

}  // namespace

Vec3 calibration_probe_center(const WhiskerRod& rod, const CalibrationSweep& sweep,
                              double arc_fraction, double depth_mm,
                              double azimuth) {
  const double s = arc_fraction * rod.length;
  const Vec3 c = rod.rest_point_at_arc(s);
  const Vec3 t = rest_tangent(rod, s);
  const Vec3 u = rotation_exp(azimuth * t) * inward_normal(t);
  const double probe_r = sweep.probe_radius_mm * 1e-3;
  const double depth = depth_mm * 1e-3;
  return c - u * (probe_r - depth);
}

CalibrationDataset generate_calibration(const WhiskerRod& rod,
                                        const CalibrationSweep& sweep,
                                        uint64_t seed) {
  Rng rng(derive_seed(seed, "calibration"));
  std::vector<Vec3> points;
  std::vector<Vec2> moments;

  const Pose base;  // stage moves the probe; the whisker base stays put
  for (int ia = 0; ia < sweep.arc_steps; ++ia) {
    const double af =
        sweep.arc_steps == 1
            ? sweep.arc_min
            : sweep.arc_min + (sweep.arc_max - sweep.arc_min) * ia / (sweep.arc_steps - 1);
    for (int iz = 0; iz < sweep.azimuth_steps; ++iz) {
      const double az =
          sweep.azimuth_steps == 1
              ? 0.5 * (sweep.azimuth_min + sweep.azimuth_max)
              : sweep.azimuth_min +
                    (sweep.azimuth_max - sweep.azimuth_min) * iz / (sweep.azimuth_steps - 1);
      // Warm-start down the depth ramp; each (arc, azimuth) pair restarts.
      RodSolver solver(rod);
      for (int id = 0; id < sweep.depth_steps; ++id) {
        const double depth =
            sweep.depth_steps == 1
                ? sweep.depth_min_mm
                : sweep.depth_min_mm +
                      (sweep.depth_max_mm - sweep.depth_min_mm) * id / (sweep.depth_steps - 1);
        Scene probe;
        Shape sphere;
        sphere.type = ShapeType::Sphere;
        sphere.radius = sweep.probe_radius_mm * 1e-3;
        sphere.pose.t = calibration_probe_center(rod, sweep, af, depth, az);
        probe.shapes.push_back(sphere);

        const RodSolver::Result res = solver.solve(base, probe);
        if (!res.contact.in_contact) continue;

        const Vec3 p_mm = res.contact.point_b * 1e3;
        bool duplicate = false;
        for (const Vec3& q : points) {
          if ((q - p_mm).norm() < 1e-6) {
            duplicate = true;
            break;
          }
        }
        if (duplicate) continue;

        const Vec2 counts =
            res.moment.m * sweep.counts_per_newton_meter +
            sweep.noise_sigma_counts * Vec2(rng.gaussian(), rng.gaussian());
        points.push_back(p_mm);
        moments.push_back(counts);
      }
    }
  }

  if (points.size() < 10) {
    throw std::runtime_error("calibration sweep produced only " +
                             std::to_string(points.size()) +
                             " contact samples (need at least 10)");
  }

  CalibrationDataset data;
  data.inputs.resize(points.size(), 3);
  data.targets.resize(points.size(), 2);
  for (size_t i = 0; i < points.size(); ++i) {
    data.inputs.row(i) = points[i].transpose();
    data.targets.row(i) = moments[i].transpose();
  }
  return data;
}

}  // namespace whisker
