#pragma once

#include <vector>

#include "whisker/geometry.hpp"
#include "whisker/rod.hpp"
#include "whisker/scene.hpp"

namespace whisker {

/// One whisker rigidly mounted on the end-effector. `outward` is the unit
/// direction of the mount's normal in the end-effector frame; repulsion acts
/// along this line, pushing the goal away from the contacted side.
struct SensorMount {
  Pose pose_in_ee;
  Vec3 outward = Vec3::UnitZ();
  WhiskerRod rod;
};

struct ControllerGains {
  double k_p = 25.0;             // goal-attraction stiffness [1/s^2]
  double k_v = 10.0;             // damping [1/s]
  double gamma_rep = 2e-3;       // repulsion scale [(m/s) / count]
  double moment_threshold = 5.0; // deflection deadband [counts]
};

/// gamma * max(|m| - threshold, 0); readings in counts.
double repulsion_force(const MomentReading& reading_counts,
                       const ControllerGains& gains);

/// End-effector translational admittance state [m].
struct AdmittanceState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 goal = Vec3::Zero();
};

/// One semi-implicit Euler step under F* = -k_v xdot + k_p (x_g - x) with
/// unit virtual mass. The goal integrates the repulsion wrench mapped from
/// each mount by its rigid transform (orientation is held fixed, so only the
/// force component of the wrench drives the translational goal).
AdmittanceState admittance_step(const AdmittanceState& state,
                                const std::vector<SensorMount>& mounts,
                                const std::vector<MomentReading>& readings_counts,
                                const ControllerGains& gains, double dt);

/// 16 semi-curved whiskers in two rings of eight around the end-effector
/// z-axis, tilted forward so the tips lead the body along +x travel.
std::vector<SensorMount> default_mount_array(const WhiskerRod& rod,
                                             int n_azimuth = 8, int n_rings = 2,
                                             double ring_radius = 0.03,
                                             double ring_z_spacing = 0.05,
                                             double forward_tilt = 0.6);

struct AvoidanceCommand {
  Vec3 start = Vec3::Zero();        // [m]
  Vec3 velocity = Vec3::Zero();     // commanded goal velocity [m/s]
  double duration = 2.0;            // [s]
};

struct AvoidanceStepLog {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  Vec3 goal = Vec3::Zero();
  double max_deflection_counts = 0.0;
  double clearance = 0.0;  // end-effector hull to nearest object [m]
};

struct AvoidanceMetrics {
  double min_clearance = std::numeric_limits<double>::infinity();
  double max_deflection_counts = 0.0;
  bool hard_collision = false;
  Vec3 final_position = Vec3::Zero();
  std::vector<AvoidanceStepLog> log;
};

struct AvoidanceOptions {
  double rate_hz = 250.0;
  double counts_per_newton_meter = 5e6;
  Vec3 ee_half_extents = Vec3(0.03, 0.03, 0.05);  // hull box [m]
  int clearance_samples = 26;
};

/// Closed loop: per step every whisker is solved quasi-statically at its
/// mount pose, readings are thresholded into repulsion, and the admittance
/// state integrates. The end-effector orientation stays identity.
AvoidanceMetrics run_avoidance_scenario(const Scene& scene,
                                        const AvoidanceCommand& command,
                                        const std::vector<SensorMount>& mounts,
                                        const ControllerGains& gains,
                                        const AvoidanceOptions& options = {});

}  // namespace whisker
