#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "whisker/geometry.hpp"
#include "whisker/scene.hpp"

namespace whisker {

enum class WhiskerShape { Straight, Curved, SemiCurved };

/// Pre-curved discretized elastic whisker, node 0 at the origin of the base
/// frame {B}, root tangent along +z. The pre-curve lies in the x-z plane and
/// bends toward +x. All lengths in meters.
struct WhiskerRod {
  std::vector<Vec3> rest_nodes;        // N+1 equally spaced nodes
  double bending_stiffness = 6.0e-6;   // EI [N m^2]
  double base_rotational_stiffness = 1.7e-4;  // [N m / rad]
  double length = 0.055;               // total arc length [m]
  WhiskerShape shape_kind = WhiskerShape::SemiCurved;

  int n_segments() const { return static_cast<int>(rest_nodes.size()) - 1; }
  double segment_length() const { return length / n_segments(); }
  /// Point on the rest centerline at arc coordinate s in [0, length].
  Vec3 rest_point_at_arc(double s) const;
};

struct RodParams {
  double bending_stiffness = 6.0e-6;
  double base_rotational_stiffness = 1.7e-4;
  double arc_angle = 1.6;          // total turn of the curved section [rad]
  double straight_fraction = 0.45; // semi-curved: leading straight portion
};

/// Analytic rest shapes: straight line, constant-curvature arc, or a straight
/// section followed by an arc (tangent-continuous).
WhiskerRod build_whisker(WhiskerShape kind, double length, int n_segments,
                         const RodParams& params = {});

/// Two-axis bending moment at the base [N m]: torque of the compliant base
/// spring about {B}'s x and y axes.
struct MomentReading {
  Vec2 m = Vec2::Zero();
};

/// True iff the Euclidean channel magnitude strictly exceeds the threshold.
bool detect_contact(const MomentReading& reading, double threshold);

struct ContactTruth {
  Vec3 point_b = Vec3::Zero();   // contact point in {B} [m]
  Vec3 point_s = Vec3::Zero();   // same point in {S} [m]
  double arc_coord = 0.0;        // along the deflected rod [m]
  Vec3 force = Vec3::Zero();     // contact force on the rod, {S} [N]
  bool in_contact = false;
};

struct SolveOptions {
  double grad_tol = 1e-9;             // residual torque [N m]
  int max_iterations = 20000;
  double penetration_tol = 1e-5;      // [m]
  double contact_stiffness = 1e3;     // initial penalty [N/m]
  double contact_stiffness_max = 1e9;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class MultiContactError : public std::runtime_error {
 public:
  explicit MultiContactError(const std::string& what)
      : std::runtime_error(what) {}
};

/// Quasi-static equilibrium solver. The rod is modeled as an articulated
/// chain of inextensible segments with an isotropic lumped bending spring at
/// each interior node (stiffness EI / segment length) and the compliant base
/// spring at the root. Contact is a quadratic penalty on SDF violation,
/// minimized by preconditioned projected gradient descent with warm starts.
class RodSolver {
 public:
  struct Result {
    std::vector<Vec3> nodes_b;       // deflected nodes in {B}
    MomentReading moment;
    ContactTruth contact;
    int iterations = 0;
    double residual = 0.0;           // final |gradient|_inf [N m]
    double energy = 0.0;
    std::vector<double> energy_trace;  // accepted iterates, final penalty stage
  };

  explicit RodSolver(WhiskerRod rod, SolveOptions opts = {});

  /// Solve at the given base pose. Warm-starts from the previous call.
  Result solve(const Pose& base, const Scene& scene);

  /// Forget the warm start (next solve starts from the rest shape).
  void reset();

  const WhiskerRod& rod() const { return rod_; }

 private:
  WhiskerRod rod_;
  SolveOptions opts_;
  std::vector<Eigen::Quaterniond> joints_;  // deviation rotation per joint
  std::vector<Vec3> rest_dirs_;
};

/// One-shot solve from the rest configuration.
RodSolver::Result solve_quasi_static(const WhiskerRod& rod, const Pose& base,
                                     const Scene& scene,
                                     const SolveOptions& opts = {});

struct SweepRecord {
  double t = 0.0;
  Pose base;
  MomentReading moment;        // with additive channel noise
  MomentReading moment_clean;
  ContactTruth truth;
};

/// Warm-started solve per pose at the given rate. noise_sigma is the
/// per-channel additive Gaussian std in the reading's own unit [N m].
/// Solver errors are rethrown with the trajectory index attached.
std::vector<SweepRecord> sweep_trajectory(const WhiskerRod& rod,
                                          const std::vector<Pose>& poses,
                                          const Scene& scene,
                                          double noise_sigma, uint64_t seed,
                                          double rate_hz = 250.0,
                                          const SolveOptions& opts = {});

}  // namespace whisker
