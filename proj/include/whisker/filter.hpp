#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "whisker/geometry.hpp"
#include "whisker/gpr.hpp"
#include "whisker/random.hpp"
#include "whisker/rod.hpp"

namespace whisker {

enum class FilterKind { Ekf, Ukf, Pf };

struct FilterConfig {
  FilterKind kind = FilterKind::Ukf;
  Mat3 process_noise = 1e-5 * Mat3::Identity();  // [mm^2]
  Mat2 measurement_noise = 0.25 * Mat2::Identity();  // [counts^2]
  double fading_memory = 1.004;   // prior covariance scale per step
  int n_particles = 1000;
  int inflation_period = 0;       // steps; 0 disables periodic inflation
  double inflation_factor = 1.0;
  // Standard (unscaled) spread: sigma points straddle the belief at
  // +-sqrt(3) sigma so the transform sees the model over the whole
  // uncertain region, which is what makes distant priors recoverable.
  double ukf_alpha = 1.0;
  double ukf_beta = 2.0;
  double ukf_kappa = 0.0;
  /// Innovations with Mahalanobis distance beyond this many sigma are
  /// skipped as outliers (contact-transition spikes); 0 disables the gate.
  /// The gate targets isolated spikes: after max_consecutive_rejections
  /// skipped readings in a row the next update is forced through.
  double outlier_gate_sigma = 6.0;
  int max_consecutive_rejections = 2;

  static FilterConfig pf_defaults() {
    FilterConfig c;
    c.kind = FilterKind::Pf;
    c.process_noise = 1e-3 * Mat3::Identity();
    c.measurement_noise = Mat2::Identity();
    return c;
  }
};

/// Gaussian belief over the contact point in {B} [mm]; the particle set is
/// populated only for the PF, with the Gaussian moments kept in sync.
struct Belief {
  Vec3 mean = Vec3::Zero();
  Mat3 cov = Mat3::Identity();
  Eigen::Matrix<double, Eigen::Dynamic, 3> particles;
  Eigen::VectorXd weights;

  bool has_particles() const { return particles.rows() > 0; }

  static Belief gaussian(const Vec3& mean_mm, const Mat3& cov_mm2);
  static Belief from_particles(
      const Eigen::Matrix<double, Eigen::Dynamic, 3>& particles,
      const Eigen::VectorXd& weights);
  /// Particle cloud sampled from a Gaussian prior.
  static Belief sample_particles(const Vec3& mean_mm, const Mat3& cov_mm2,
                                 int n, Rng& rng);
};

/// Process model: the contact point is fixed in the world, so its body-frame
/// velocity is v_rel = -v - w x p (with v converted to mm/s). The covariance
/// propagates through F = I - dt [w], scaled by the fading-memory factor,
/// plus process noise. Particles receive the same map plus sampled noise.
Belief predict_step(const Belief& belief, const Twist& base_twist, double dt,
                    const FilterConfig& config, Rng* rng = nullptr);

/// Joseph-form EKF measurement update, linearized through the model Jacobian.
/// When the outlier gate rejects the reading the belief is returned
/// unchanged and *rejected (if given) is set.
Belief update_ekf(const Belief& belief, const Vec2& reading,
                  const MeasurementModel& model, const FilterConfig& config,
                  bool* rejected = nullptr);

/// Scaled unscented transform update. Every inflation_period-th step
/// (step_index counts from 1) the prior covariance is pre-scaled by
/// inflation_factor before the sigma points are drawn.
Belief update_ukf(const Belief& belief, const Vec2& reading,
                  const MeasurementModel& model, const FilterConfig& config,
                  int step_index = 1, bool* rejected = nullptr);

/// Importance reweighting by the Gaussian innovation likelihood with
/// systematic resampling when the effective sample size drops below N/2.
/// Throws when every particle weight underflows (track lost).
Belief update_pf(const Belief& belief, const Vec2& reading,
                 const MeasurementModel& model, const FilterConfig& config,
                 Rng& rng);

/// Deterministic single-point baseline for straight whiskers: rigid
/// propagation of the previous estimate, projection onto the centerline,
/// then an arc-length correction ds = (measured - predicted) / (dM/ds)
/// from the calibrated model along the whisker line.
struct BaselineEstimate {
  Vec3 point_mm = Vec3::Zero();
  bool clamped = false;
};
BaselineEstimate baseline_solomon(const Vec3& prev_estimate_mm,
                                  const Vec2& reading, const Twist& base_twist,
                                  double dt, const MeasurementModel& model,
                                  const WhiskerRod& rod);

struct TraceInput {
  double t = 0.0;
  Pose base;
  Vec2 moment_counts = Vec2::Zero();
};

struct PriorSpec {
  Vec3 mean_mm = Vec3::Zero();
  Mat3 cov_mm2 = 25.0 * Mat3::Identity();
};

/// Called once per contact segment with the base pose at first contact.
using PriorProvider = std::function<PriorSpec(const Pose& base)>;

/// Mid-arc rest point with (5 mm)^2 I covariance.
PriorProvider default_prior(const WhiskerRod& rod);

struct TrackStep {
  double t = 0.0;
  int segment = -1;
  Belief belief;
  Vec3 world_mm = Vec3::Zero();
  double innovation_norm = 0.0;
};

struct TrackResult {
  std::vector<TrackStep> steps;  // one per in-contact input record
  int segments = 0;
};

/// Segments the series at detect_contact transitions and runs an
/// independently initialized filter over each contact segment.
TrackResult track_trace(const std::vector<TraceInput>& series,
                        const MeasurementModel& model,
                        const FilterConfig& config, const PriorProvider& prior,
                        double contact_threshold_counts, uint64_t seed);

/// Baseline analog of track_trace: per contact segment the estimate starts
/// at the prior mean and advances through baseline_solomon. Covariances in
/// the result are zero (the baseline is a point estimator).
TrackResult track_baseline(const std::vector<TraceInput>& series,
                           const MeasurementModel& model,
                           const PriorProvider& prior,
                           double contact_threshold_counts,
                           const WhiskerRod& rod);

}  // namespace whisker
