#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "whisker/bhm.hpp"
#include "whisker/calibration.hpp"
#include "whisker/controller.hpp"
#include "whisker/filter.hpp"
#include "whisker/rod.hpp"
#include "whisker/scene.hpp"

namespace whisker {

struct WhiskerSpec {
  WhiskerShape shape = WhiskerShape::SemiCurved;
  double length_mm = 55.0;
  int segments = 50;
  double bending_stiffness = 6.0e-6;        // [N m^2]
  double base_stiffness = 1.7e-4;           // [N m / rad]
  double arc_angle_deg = 91.67;
  double straight_fraction = 0.45;
  double counts_per_nm = 5e6;

  WhiskerRod build() const;
};

/// Straight-line base trajectory at fixed orientation (roll-pitch-yaw,
/// extrinsic xyz, degrees). Base positions in mm, world frame.
struct TrajectorySpec {
  Vec3 start_mm = Vec3(40.0, 0.0, 0.0);
  Vec3 end_mm = Vec3(-12.0, 0.0, 0.0);
  Vec3 rpy_deg = Vec3(-90.0, 0.0, 0.0);
  double duration_s = 1.5;

  Pose base_pose(const Vec3& position_mm) const;
  std::vector<Pose> poses(double rate_hz) const;
};

struct PriorSpecConfig {
  enum class Type { Default, Point, Map } type = Type::Default;
  Vec3 point_mm = Vec3::Zero();     // Type::Point
  double sigma_mm = 5.0;
  std::string map_path;             // Type::Map
};

struct FilterSpec {
  FilterKind kind = FilterKind::Ukf;
  double process_noise = 1e-5;       // [mm^2], scalar * I
  double measurement_noise = 0.25;   // [counts^2], scalar * I
  double fading_memory = 1.004;
  int n_particles = 1000;
  int inflation_period = 0;
  double inflation_factor = 1.0;
  double outlier_gate_sigma = 6.0;
  PriorSpecConfig prior;

  FilterConfig config() const;
};

struct MapSpec {
  MapKernelKind kernel = MapKernelKind::Ebf;
  double gamma = 0.01;               // [1/mm^2]
  Vec3 omega = Vec3(1.0, 1.0, 0.2);
  double spacing_mm = 10.0;
  Vec3 bounds_lo_mm = Vec3(-80.0, -20.0, -40.0);
  Vec3 bounds_hi_mm = Vec3(80.0, 120.0, 40.0);
  double prior_variance = 10.0;
  int free_points = 200;
  Vec3 free_box_lo_mm = Vec3(-40.0, -15.0, -15.0);
  Vec3 free_box_hi_mm = Vec3(40.0, 5.0, 15.0);
  double voxel_resolution_mm = 2.0;
  double voxel_threshold = 0.9;
  /// Filter means enter the map only while the belief covariance trace is
  /// below this gate [mm^2].
  double covariance_gate_mm2 = 25.0;

  MapKernel map_kernel() const;
};

struct ControllerSpec {
  ControllerGains gains;
  AvoidanceCommand command;
  AvoidanceOptions options;
  int mounts_azimuth = 8;
  int mounts_rings = 2;
  double mount_ring_radius = 0.03;
  double mount_ring_spacing = 0.05;
  double mount_forward_tilt = 0.6;
};

struct Scenario {
  uint64_t seed = 7;
  double rate_hz = 250.0;
  double contact_threshold_counts = 4.0;
  double noise_sigma_counts = 0.5;
  WhiskerSpec whisker;
  Scene scene;
  CalibrationSweep calibration;
  TrajectorySpec trajectory;
  FilterSpec filter;
  MapSpec map;
  ControllerSpec controller;

  static Scenario from_json(const nlohmann::json& j, const std::string& base_dir = "");
  static Scenario from_file(const std::string& path);
};

}  // namespace whisker
