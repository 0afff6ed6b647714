#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "whisker/controller.hpp"

using namespace whisker;

namespace {

SensorMount mount_with_outward(const Vec3& outward) {
  SensorMount m;
  m.outward = outward.normalized();
  m.rod = build_whisker(WhiskerShape::SemiCurved, 0.055, 30);
  m.pose_in_ee.t = 0.03 * m.outward;
  return m;
}

MomentReading counts(double x, double y) {
  MomentReading r;
  r.m = Vec2(x, y);
  return r;
}

}  // namespace

TEST_CASE("repulsion force deadband and linearity") {
  ControllerGains gains;
  gains.gamma_rep = 2e-3;
  gains.moment_threshold = 5.0;
  CHECK(repulsion_force(counts(3.0, 0.0), gains) == 0.0);
  CHECK(repulsion_force(counts(0.0, 4.999), gains) == 0.0);
  CHECK(repulsion_force(counts(6.0, 0.0), gains) ==
        doctest::Approx(gains.gamma_rep * 1.0));
  ControllerGains doubled = gains;
  doubled.gamma_rep *= 2.0;
  CHECK(repulsion_force(counts(40.0, 0.0), doubled) ==
        doctest::Approx(2.0 * repulsion_force(counts(40.0, 0.0), gains)));
}

TEST_CASE("admittance without contact converges to the goal without overshoot") {
  ControllerGains gains;  // k_v^2 = 100 >= 4 k_p = 100, critically damped
  const std::vector<SensorMount> mounts;
  const std::vector<MomentReading> readings;
  AdmittanceState s;
  s.goal = Vec3(0.1, 0.0, 0.0);
  const double dt = 1.0 / 250.0;
  double max_x = 0.0;
  for (int i = 0; i < 3000; ++i) {
    s = admittance_step(s, mounts, readings, gains, dt);
    CHECK((s.goal - Vec3(0.1, 0.0, 0.0)).norm() == 0.0);  // goal untouched
    max_x = std::max(max_x, s.position.x());
  }
  CHECK((s.position - s.goal).norm() < 1e-4);
  CHECK(max_x < 0.1 * 1.01);  // overshoot below 1%
}

TEST_CASE("below-threshold readings contribute exactly zero goal motion") {
  ControllerGains gains;
  gains.moment_threshold = 5.0;
  const std::vector<SensorMount> mounts = {mount_with_outward(Vec3(1, 0, 0)),
                                           mount_with_outward(Vec3(0, 1, 0))};
  const std::vector<MomentReading> readings = {counts(4.9, 0.0), counts(0.0, 4.9)};
  AdmittanceState s;
  const AdmittanceState next = admittance_step(s, mounts, readings, gains, 0.004);
  CHECK(next.goal.norm() == 0.0);
}

TEST_CASE("symmetric opposite contacts cancel") {
  ControllerGains gains;
  const std::vector<SensorMount> mounts = {mount_with_outward(Vec3(1, 0, 0)),
                                           mount_with_outward(Vec3(-1, 0, 0))};
  const std::vector<MomentReading> readings = {counts(50.0, 0.0), counts(0.0, 50.0)};
  AdmittanceState s;
  const AdmittanceState next = admittance_step(s, mounts, readings, gains, 0.004);
  CHECK(std::abs(next.goal.x()) < 1e-9);
  CHECK(std::abs(next.goal.y()) < 1e-9);
}

TEST_CASE("single side contact pushes the goal away from that side") {
  ControllerGains gains;
  const std::vector<SensorMount> mounts = {mount_with_outward(Vec3(0, 1, 0))};
  const std::vector<MomentReading> readings = {counts(0.0, 80.0)};
  AdmittanceState s;
  const AdmittanceState next = admittance_step(s, mounts, readings, gains, 0.004);
  CHECK(next.goal.y() < 0.0);  // contact on +y side, goal retreats to -y
  CHECK(next.goal.x() == 0.0);
}

TEST_CASE("virtual energy decays between contact events") {
  ControllerGains gains;
  const std::vector<SensorMount> mounts;
  const std::vector<MomentReading> readings;
  AdmittanceState s;
  s.position = Vec3(0.05, -0.02, 0.01);  // offset from a static goal at origin
  const double dt = 1.0 / 250.0;
  double prev_energy = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 2000; ++i) {
    s = admittance_step(s, mounts, readings, gains, dt);
    const double energy = 0.5 * s.velocity.squaredNorm() +
                          0.5 * gains.k_p * (s.goal - s.position).squaredNorm();
    CHECK(energy <= prev_energy + 1e-12);
    prev_energy = energy;
  }
}

TEST_CASE("default mount array geometry") {
  const WhiskerRod rod = build_whisker(WhiskerShape::SemiCurved, 0.055, 30);
  const auto mounts = default_mount_array(rod);
  CHECK(mounts.size() == 16);
  for (const SensorMount& m : mounts) {
    CHECK(m.outward.norm() == doctest::Approx(1.0));
    CHECK(m.pose_in_ee.is_valid(1e-9));
    // whisker root direction tilts toward +x travel but stays outward-facing
    const Vec3 root_dir = m.pose_in_ee.R * Vec3::UnitZ();
    CHECK(root_dir.dot(m.outward) > 0.5);
  }
  CHECK_THROWS_AS(default_mount_array(rod, 0), std::invalid_argument);
}

TEST_CASE("empty scene scenario follows the commanded trajectory") {
  const WhiskerRod rod = build_whisker(WhiskerShape::SemiCurved, 0.055, 24);
  const auto mounts = default_mount_array(rod, 4, 1);
  ControllerGains gains;
  AvoidanceCommand cmd;
  cmd.velocity = Vec3(0.04, 0.0, 0.0);
  cmd.duration = 1.0;
  AvoidanceOptions options;
  options.rate_hz = 125.0;  // lighter loop for the unit test
  const AvoidanceMetrics metrics =
      run_avoidance_scenario(Scene{}, cmd, mounts, gains, options);
  CHECK_FALSE(metrics.hard_collision);
  CHECK(metrics.max_deflection_counts == 0.0);
  // tracks the moving goal with the steady-state lag k_v |v| / k_p
  const double lag = gains.k_v * cmd.velocity.norm() / gains.k_p;
  CHECK(metrics.final_position.x() > 0.04 - lag - 0.005);
  CHECK(metrics.final_position.x() < 0.04 + 0.005);
  CHECK(std::isinf(metrics.min_clearance));
}

TEST_CASE("admittance step validates inputs") {
  ControllerGains gains;
  AdmittanceState s;
  CHECK_THROWS_AS(admittance_step(s, {}, {counts(1, 1)}, gains, 0.004),
                  std::invalid_argument);
  CHECK_THROWS_AS(admittance_step(s, {}, {}, gains, 0.0), std::invalid_argument);
}
