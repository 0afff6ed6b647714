#include "whisker/controller.hpp"

#include <cmath>
#include <stdexcept>

namespace whisker {

double repulsion_force(const MomentReading& reading_counts,
                       const ControllerGains& gains) {
  return gains.gamma_rep *
         std::max(reading_counts.m.norm() - gains.moment_threshold, 0.0);
}

AdmittanceState admittance_step(const AdmittanceState& state,
                                const std::vector<SensorMount>& mounts,
                                const std::vector<MomentReading>& readings_counts,
                                const ControllerGains& gains, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("admittance_step: dt must be positive");
  if (mounts.size() != readings_counts.size()) {
    throw std::invalid_argument("admittance_step: one reading per mount required");
  }

  AdmittanceState next = state;
  Vec3 goal_velocity = Vec3::Zero();
  for (size_t i = 0; i < mounts.size(); ++i) {
    const double f = repulsion_force(readings_counts[i], gains);
    if (f == 0.0) continue;
    // Contact presses the whisker inward along -outward; the wrench map of
    // the rigid mount transfers that force (and a torque we do not use while
    // orientation is fixed) to the end-effector frame.
    goal_velocity += f * (-mounts[i].outward);
  }
  next.goal = state.goal + dt * goal_velocity;

  const Vec3 accel = -gains.k_v * state.velocity + gains.k_p * (next.goal - state.position);
  next.velocity = state.velocity + dt * accel;
  next.position = state.position + dt * next.velocity;
  return next;
}

std::vector<SensorMount> default_mount_array(const WhiskerRod& rod, int n_azimuth,
                                             int n_rings, double ring_radius,
                                             double ring_z_spacing,
                                             double forward_tilt) {
  if (n_azimuth < 1 || n_rings < 1) {
    throw std::invalid_argument("default_mount_array: need at least one mount");
  }
  std::vector<SensorMount> mounts;
  mounts.reserve(n_azimuth * n_rings);
  for (int ring = 0; ring < n_rings; ++ring) {
    const double z = (ring - 0.5 * (n_rings - 1)) * ring_z_spacing;
    for (int k = 0; k < n_azimuth; ++k) {
      const double a = 2.0 * M_PI * k / n_azimuth;
      const Vec3 radial(std::cos(a), std::sin(a), 0.0);
      // Whisker +z_B points radially out, tilted toward +x travel.
      Vec3 dir = radial;
      const Vec3 axis = radial.cross(Vec3::UnitX());
      if (axis.norm() > 1e-9) {
        dir = rotation_exp(forward_tilt * axis.normalized()) * radial;
      }
      SensorMount m;
      m.rod = rod;
      m.outward = radial;
      m.pose_in_ee.R =
          Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), dir).toRotationMatrix();
      m.pose_in_ee.t = ring_radius * radial + Vec3(0.0, 0.0, z);
      mounts.push_back(std::move(m));
    }
  }
  return mounts;
}

namespace {

double hull_clearance(const Scene& scene, const Vec3& position,
                      const Vec3& half_extents, int samples) {
  if (scene.shapes.empty()) return std::numeric_limits<double>::infinity();
  double min_d = std::numeric_limits<double>::infinity();
  // Box corners plus face centers plus the center give a cheap hull probe.
  static const double kFaces[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                      {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  std::vector<Vec3> probes;
  probes.push_back(Vec3::Zero());
  for (int sx = -1; sx <= 1; sx += 2)
    for (int sy = -1; sy <= 1; sy += 2)
      for (int sz = -1; sz <= 1; sz += 2)
        probes.push_back(Vec3(sx * half_extents.x(), sy * half_extents.y(),
                              sz * half_extents.z()));
  for (const auto& f : kFaces) {
    probes.push_back(Vec3(f[0] * half_extents.x(), f[1] * half_extents.y(),
                          f[2] * half_extents.z()));
  }
  const int n = std::min<int>(samples, static_cast<int>(probes.size()));
  for (int i = 0; i < n; ++i) {
    min_d = std::min(min_d, sdf_eval(scene, position + probes[i]).distance);
  }
  return min_d;
}

}  // namespace

AvoidanceMetrics run_avoidance_scenario(const Scene& scene,
                                        const AvoidanceCommand& command,
                                        const std::vector<SensorMount>& mounts,
                                        const ControllerGains& gains,
                                        const AvoidanceOptions& options) {
  const double dt = 1.0 / options.rate_hz;
  const int n_steps = static_cast<int>(command.duration * options.rate_hz);

  AdmittanceState state;
  state.position = command.start;
  state.goal = command.start;

  std::vector<RodSolver> solvers;
  solvers.reserve(mounts.size());
  for (const SensorMount& m : mounts) solvers.emplace_back(m.rod);

  AvoidanceMetrics metrics;
  metrics.log.reserve(n_steps);
  std::vector<MomentReading> readings(mounts.size());

  for (int step = 0; step < n_steps; ++step) {
    Pose ee;
    ee.t = state.position;
    double max_defl = 0.0;
    for (size_t i = 0; i < mounts.size(); ++i) {
      const Pose base = ee * mounts[i].pose_in_ee;
      RodSolver::Result res;
      try {
        res = solvers[i].solve(base, scene);
      } catch (const std::exception& e) {
        throw std::runtime_error("avoidance step " + std::to_string(step) +
                                 ", whisker " + std::to_string(i) + ": " + e.what());
      }
      readings[i].m = res.moment.m * options.counts_per_newton_meter;
      max_defl = std::max(max_defl, readings[i].m.norm());
    }

    state.goal += dt * command.velocity;  // commanded goal motion
    state = admittance_step(state, mounts, readings, gains, dt);

    AvoidanceStepLog log;
    log.t = step * dt;
    log.position = state.position;
    log.goal = state.goal;
    log.max_deflection_counts = max_defl;
    log.clearance = hull_clearance(scene, state.position, options.ee_half_extents,
                                   options.clearance_samples);
    metrics.log.push_back(log);

    metrics.min_clearance = std::min(metrics.min_clearance, log.clearance);
    metrics.max_deflection_counts = std::max(metrics.max_deflection_counts, max_defl);
    if (log.clearance < 0.0) metrics.hard_collision = true;
  }
  metrics.final_position = state.position;
  return metrics;
}

}  // namespace whisker
