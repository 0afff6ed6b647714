#include "whisker/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace whisker {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

Vec3 vec3_from(const nlohmann::json& j) {
  return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& value) {
  if (j.contains(key)) value = j.at(key).get<T>();
}

void maybe_vec3(const nlohmann::json& j, const char* key, Vec3& value) {
  if (j.contains(key)) value = vec3_from(j.at(key));
}

}  // namespace

WhiskerRod WhiskerSpec::build() const {
  RodParams params;
  params.bending_stiffness = bending_stiffness;
  params.base_rotational_stiffness = base_stiffness;
  params.arc_angle = arc_angle_deg * kDegToRad;
  params.straight_fraction = straight_fraction;
  return build_whisker(shape, length_mm * 1e-3, segments, params);
}

Pose TrajectorySpec::base_pose(const Vec3& position_mm) const {
  const Vec3 rpy = rpy_deg * kDegToRad;
  Pose p;
  p.R = (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
         Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
         Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
            .toRotationMatrix();
  p.t = position_mm * 1e-3;
  return p;
}

std::vector<Pose> TrajectorySpec::poses(double rate_hz) const {
  const int n = std::max(2, static_cast<int>(std::lround(duration_s * rate_hz)));
  std::vector<Pose> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / (n - 1);
    out.push_back(base_pose(start_mm + u * (end_mm - start_mm)));
  }
  return out;
}

FilterConfig FilterSpec::config() const {
  FilterConfig c;
  c.kind = kind;
  c.process_noise = process_noise * Mat3::Identity();
  c.measurement_noise = measurement_noise * Mat2::Identity();
  c.fading_memory = fading_memory;
  c.n_particles = n_particles;
  c.inflation_period = inflation_period;
  c.inflation_factor = inflation_factor;
  c.outlier_gate_sigma = outlier_gate_sigma;
  return c;
}

MapKernel MapSpec::map_kernel() const {
  MapKernel k;
  k.kind = kernel;
  k.gamma = gamma;
  k.omega = kernel == MapKernelKind::Rbf ? Vec3::Ones() : omega;
  return k;
}

Scenario Scenario::from_json(const nlohmann::json& j, const std::string& base_dir) {
  Scenario s;
  maybe(j, "seed", s.seed);
  maybe(j, "rate_hz", s.rate_hz);
  maybe(j, "contact_threshold_counts", s.contact_threshold_counts);
  maybe(j, "noise_sigma_counts", s.noise_sigma_counts);

  if (j.contains("whisker")) {
    const auto& w = j.at("whisker");
    if (w.contains("shape")) {
      const std::string shape = w.at("shape").get<std::string>();
      if (shape == "straight") s.whisker.shape = WhiskerShape::Straight;
      else if (shape == "curved") s.whisker.shape = WhiskerShape::Curved;
      else if (shape == "semi_curved") s.whisker.shape = WhiskerShape::SemiCurved;
      else throw std::invalid_argument("unknown whisker shape: " + shape);
    }
    maybe(w, "length_mm", s.whisker.length_mm);
    maybe(w, "segments", s.whisker.segments);
    maybe(w, "bending_stiffness", s.whisker.bending_stiffness);
    maybe(w, "base_stiffness", s.whisker.base_stiffness);
    maybe(w, "arc_angle_deg", s.whisker.arc_angle_deg);
    maybe(w, "straight_fraction", s.whisker.straight_fraction);
    maybe(w, "counts_per_nm", s.whisker.counts_per_nm);
  }
  s.calibration.counts_per_newton_meter = s.whisker.counts_per_nm;
  s.calibration.noise_sigma_counts = s.noise_sigma_counts;

  if (j.contains("scene")) s.scene = load_scene(j.at("scene"), base_dir);

  if (j.contains("calibration")) {
    const auto& c = j.at("calibration");
    maybe(c, "arc_min", s.calibration.arc_min);
    maybe(c, "arc_max", s.calibration.arc_max);
    maybe(c, "arc_steps", s.calibration.arc_steps);
    maybe(c, "depth_min_mm", s.calibration.depth_min_mm);
    maybe(c, "depth_max_mm", s.calibration.depth_max_mm);
    maybe(c, "depth_steps", s.calibration.depth_steps);
    maybe(c, "azimuth_min", s.calibration.azimuth_min);
    maybe(c, "azimuth_max", s.calibration.azimuth_max);
    maybe(c, "azimuth_steps", s.calibration.azimuth_steps);
    maybe(c, "probe_radius_mm", s.calibration.probe_radius_mm);
    maybe(c, "noise_sigma_counts", s.calibration.noise_sigma_counts);
  }

  if (j.contains("trajectory")) {
    const auto& t = j.at("trajectory");
    maybe_vec3(t, "start_mm", s.trajectory.start_mm);
    maybe_vec3(t, "end_mm", s.trajectory.end_mm);
    maybe_vec3(t, "rpy_deg", s.trajectory.rpy_deg);
    maybe(t, "duration_s", s.trajectory.duration_s);
  }

  if (j.contains("filter")) {
    const auto& f = j.at("filter");
    if (f.contains("kind")) {
      const std::string kind = f.at("kind").get<std::string>();
      if (kind == "ekf") s.filter.kind = FilterKind::Ekf;
      else if (kind == "ukf") s.filter.kind = FilterKind::Ukf;
      else if (kind == "pf") s.filter.kind = FilterKind::Pf;
      else throw std::invalid_argument("unknown filter kind: " + kind);
    }
    if (s.filter.kind == FilterKind::Pf) {
      s.filter.process_noise = 1e-3;
      s.filter.measurement_noise = 1.0;
    }
    maybe(f, "process_noise", s.filter.process_noise);
    maybe(f, "measurement_noise", s.filter.measurement_noise);
    maybe(f, "fading_memory", s.filter.fading_memory);
    maybe(f, "n_particles", s.filter.n_particles);
    maybe(f, "inflation_period", s.filter.inflation_period);
    maybe(f, "inflation_factor", s.filter.inflation_factor);
    maybe(f, "outlier_gate_sigma", s.filter.outlier_gate_sigma);
    if (f.contains("prior")) {
      const auto& p = f.at("prior");
      const std::string type = p.value("type", "default");
      if (type == "default") s.filter.prior.type = PriorSpecConfig::Type::Default;
      else if (type == "point") s.filter.prior.type = PriorSpecConfig::Type::Point;
      else if (type == "map") s.filter.prior.type = PriorSpecConfig::Type::Map;
      else throw std::invalid_argument("unknown prior type: " + type);
      maybe_vec3(p, "point_mm", s.filter.prior.point_mm);
      maybe(p, "sigma_mm", s.filter.prior.sigma_mm);
      maybe(p, "map_path", s.filter.prior.map_path);
    }
  }

  if (j.contains("map")) {
    const auto& m = j.at("map");
    if (m.contains("kernel")) {
      const std::string kind = m.at("kernel").get<std::string>();
      if (kind == "rbf") s.map.kernel = MapKernelKind::Rbf;
      else if (kind == "ebf") s.map.kernel = MapKernelKind::Ebf;
      else throw std::invalid_argument("unknown map kernel: " + kind);
    }
    maybe(m, "gamma", s.map.gamma);
    maybe_vec3(m, "omega", s.map.omega);
    maybe(m, "spacing_mm", s.map.spacing_mm);
    maybe_vec3(m, "bounds_lo_mm", s.map.bounds_lo_mm);
    maybe_vec3(m, "bounds_hi_mm", s.map.bounds_hi_mm);
    maybe(m, "prior_variance", s.map.prior_variance);
    maybe(m, "free_points", s.map.free_points);
    maybe_vec3(m, "free_box_lo_mm", s.map.free_box_lo_mm);
    maybe_vec3(m, "free_box_hi_mm", s.map.free_box_hi_mm);
    maybe(m, "voxel_resolution_mm", s.map.voxel_resolution_mm);
    maybe(m, "voxel_threshold", s.map.voxel_threshold);
    maybe(m, "covariance_gate_mm2", s.map.covariance_gate_mm2);
  }

  if (j.contains("controller")) {
    const auto& c = j.at("controller");
    maybe(c, "k_p", s.controller.gains.k_p);
    maybe(c, "k_v", s.controller.gains.k_v);
    maybe(c, "gamma_rep", s.controller.gains.gamma_rep);
    maybe(c, "moment_threshold", s.controller.gains.moment_threshold);
    if (c.contains("command")) {
      const auto& cmd = c.at("command");
      maybe_vec3(cmd, "start", s.controller.command.start);
      maybe_vec3(cmd, "velocity", s.controller.command.velocity);
      maybe(cmd, "duration", s.controller.command.duration);
    }
    maybe(c, "mounts_azimuth", s.controller.mounts_azimuth);
    maybe(c, "mounts_rings", s.controller.mounts_rings);
    maybe(c, "mount_ring_radius", s.controller.mount_ring_radius);
    maybe(c, "mount_ring_spacing", s.controller.mount_ring_spacing);
    maybe(c, "mount_forward_tilt", s.controller.mount_forward_tilt);
    s.controller.options.counts_per_newton_meter = s.whisker.counts_per_nm;
    s.controller.options.rate_hz = s.rate_hz;
    if (c.contains("ee_half_extents")) {
      s.controller.options.ee_half_extents = vec3_from(c.at("ee_half_extents"));
    }
  }
  return s;
}

Scenario Scenario::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j, std::filesystem::path(path).parent_path().string());
}

}  // namespace whisker
