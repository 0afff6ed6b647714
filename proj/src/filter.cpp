#include "whisker/filter.hpp"

#include <cmath>
#include <stdexcept>

namespace whisker {

namespace {

constexpr double kMmPerM = 1e3;

Mat3 symmetrize(const Mat3& m) { return 0.5 * (m + m.transpose()); }

// Cholesky with escalating jitter; throws on persistent failure.
Mat3 covariance_sqrt(const Mat3& cov) {
  Eigen::LLT<Mat3> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  for (double jitter = 1e-12; jitter <= 1.1e-6; jitter *= 10.0) {
    llt.compute(cov + jitter * Mat3::Identity());
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw std::runtime_error("covariance square root failed after jitter escalation");
}

Vec3 relative_velocity_mm(const Vec3& p_mm, const Twist& xi) {
  return -kMmPerM * xi.v - xi.w.cross(p_mm);
}

void weighted_moments(const Eigen::Matrix<double, Eigen::Dynamic, 3>& particles,
                      const Eigen::VectorXd& weights, Vec3* mean, Mat3* cov) {
  *mean = particles.transpose() * weights;
  Mat3 c = Mat3::Zero();
  for (int i = 0; i < particles.rows(); ++i) {
    const Vec3 d = particles.row(i).transpose() - *mean;
    c += weights[i] * d * d.transpose();
  }
  *cov = symmetrize(c);
}

}  // namespace

Belief Belief::gaussian(const Vec3& mean_mm, const Mat3& cov_mm2) {
  Belief b;
  b.mean = mean_mm;
  b.cov = symmetrize(cov_mm2);
  return b;
}

Belief Belief::from_particles(
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& particles,
    const Eigen::VectorXd& weights) {
  if (particles.rows() != weights.size() || particles.rows() == 0) {
    throw std::invalid_argument("Belief::from_particles: size mismatch");
  }
  Belief b;
  b.particles = particles;
  b.weights = weights / weights.sum();
  weighted_moments(b.particles, b.weights, &b.mean, &b.cov);
  return b;
}

Belief Belief::sample_particles(const Vec3& mean_mm, const Mat3& cov_mm2, int n,
                                Rng& rng) {
  if (n < 10) throw std::invalid_argument("need at least 10 particles");
  const Mat3 l = covariance_sqrt(symmetrize(cov_mm2));
  Eigen::Matrix<double, Eigen::Dynamic, 3> particles(n, 3);
  for (int i = 0; i < n; ++i) {
    particles.row(i) = (mean_mm + l * rng.gaussian_vec3()).transpose();
  }
  return from_particles(particles, Eigen::VectorXd::Constant(n, 1.0 / n));
}

Belief predict_step(const Belief& belief, const Twist& xi, double dt,
                    const FilterConfig& config, Rng* rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("predict_step: dt must be positive");

  Belief out = belief;
  out.mean = belief.mean + dt * relative_velocity_mm(belief.mean, xi);
  const Mat3 f = Mat3::Identity() - dt * skew(xi.w);
  out.cov = symmetrize(config.fading_memory * (f * belief.cov * f.transpose()) +
                       config.process_noise);

  if (belief.has_particles()) {
    if (rng == nullptr) {
      throw std::invalid_argument("predict_step: particle belief needs an rng");
    }
    const Mat3 l = covariance_sqrt(config.process_noise);
    out.particles.resizeLike(belief.particles);
    for (int i = 0; i < belief.particles.rows(); ++i) {
      const Vec3 p = belief.particles.row(i).transpose();
      out.particles.row(i) =
          (p + dt * relative_velocity_mm(p, xi) + l * rng->gaussian_vec3())
              .transpose();
    }
    weighted_moments(out.particles, out.weights, &out.mean, &out.cov);
  }
  return out;
}

Belief update_ekf(const Belief& belief, const Vec2& reading,
                  const MeasurementModel& model, const FilterConfig& config,
                  bool* rejected) {
  if (rejected != nullptr) *rejected = false;
  const Mat23 h = model.jacobian(belief.mean);
  const Vec2 innovation = reading - model.mean(belief.mean);
  const Mat2 s = h * belief.cov * h.transpose() + config.measurement_noise;
  Eigen::LLT<Mat2> llt(s);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("update_ekf: innovation covariance not invertible");
  }
  if (config.outlier_gate_sigma > 0.0) {
    const double m2 = innovation.dot(llt.solve(innovation));
    if (m2 > config.outlier_gate_sigma * config.outlier_gate_sigma) {
      if (rejected != nullptr) *rejected = true;
      return belief;
    }
  }
  const Eigen::Matrix<double, 3, 2> gain =
      belief.cov * h.transpose() * llt.solve(Mat2::Identity());
  Belief out;
  out.mean = belief.mean + gain * innovation;
  const Mat3 ikh = Mat3::Identity() - gain * h;
  out.cov = symmetrize(ikh * belief.cov * ikh.transpose() +
                       gain * config.measurement_noise * gain.transpose());
  return out;
}

Belief update_ukf(const Belief& belief, const Vec2& reading,
                  const MeasurementModel& model, const FilterConfig& config,
                  int step_index, bool* rejected) {
  if (rejected != nullptr) *rejected = false;
  constexpr int n = 3;
  Mat3 cov = belief.cov;
  if (config.inflation_period > 0 && step_index > 0 &&
      step_index % config.inflation_period == 0) {
    cov *= config.inflation_factor;
  }

  const double lambda =
      config.ukf_alpha * config.ukf_alpha * (n + config.ukf_kappa) - n;
  const double gamma = std::sqrt(n + lambda);
  const double wm0 = lambda / (n + lambda);
  const double wc0 = wm0 + 1.0 - config.ukf_alpha * config.ukf_alpha + config.ukf_beta;
  const double wi = 0.5 / (n + lambda);

  const Mat3 l = covariance_sqrt(cov);
  Eigen::Matrix<double, 3, 2 * n + 1> chi;
  chi.col(0) = belief.mean;
  for (int i = 0; i < n; ++i) {
    chi.col(1 + i) = belief.mean + gamma * l.col(i);
    chi.col(1 + n + i) = belief.mean - gamma * l.col(i);
  }

  Eigen::Matrix<double, 2, 2 * n + 1> z;
  for (int i = 0; i < 2 * n + 1; ++i) z.col(i) = model.mean(chi.col(i));
  // wm0 = 1 - 2n*wi, so recombining around z0 avoids the cancellation of
  // the huge scaled-UT weights.
  Vec2 z_bar = z.col(0);
  for (int i = 1; i < 2 * n + 1; ++i) z_bar += wi * (z.col(i) - z.col(0));

  Mat2 s = config.measurement_noise;
  Eigen::Matrix<double, 3, 2> cross = Eigen::Matrix<double, 3, 2>::Zero();
  for (int i = 0; i < 2 * n + 1; ++i) {
    const double wc = i == 0 ? wc0 : wi;
    const Vec2 dz = z.col(i) - z_bar;
    s += wc * dz * dz.transpose();
    cross += wc * (chi.col(i) - belief.mean) * dz.transpose();
  }

  Eigen::LLT<Mat2> llt(s);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("update_ukf: innovation covariance not invertible");
  }
  const Vec2 innovation = reading - z_bar;
  if (config.outlier_gate_sigma > 0.0) {
    const double m2 = innovation.dot(llt.solve(innovation));
    if (m2 > config.outlier_gate_sigma * config.outlier_gate_sigma) {
      if (rejected != nullptr) *rejected = true;
      Belief out = belief;
      out.cov = symmetrize(cov);  // inflation still applies
      return out;
    }
  }
  const Eigen::Matrix<double, 3, 2> gain = cross * llt.solve(Mat2::Identity());

  Belief out;
  out.mean = belief.mean + gain * innovation;
  out.cov = symmetrize(cov - gain * s * gain.transpose());
  return out;
}

Belief update_pf(const Belief& belief, const Vec2& reading,
                 const MeasurementModel& model, const FilterConfig& config,
                 Rng& rng) {
  if (!belief.has_particles()) {
    throw std::invalid_argument("update_pf: belief has no particles");
  }
  const int n = static_cast<int>(belief.particles.rows());
  const Mat2 r_inv = config.measurement_noise.inverse();

  Eigen::VectorXd log_w(n);
  double max_lw = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const Vec2 innovation =
        reading - model.mean(belief.particles.row(i).transpose());
    const double ll = -0.5 * innovation.dot(r_inv * innovation);
    log_w[i] = std::log(std::max(belief.weights[i], 1e-300)) + ll;
    max_lw = std::max(max_lw, log_w[i]);
  }
  if (!std::isfinite(max_lw) || max_lw < -700.0) {
    throw std::runtime_error("update_pf: all particle weights underflowed (track lost)");
  }
  Eigen::VectorXd w = (log_w.array() - max_lw).exp();
  w /= w.sum();

  Belief out;
  out.particles = belief.particles;
  out.weights = w;

  const double ess = 1.0 / w.squaredNorm();
  if (ess < 0.5 * n) {
    // systematic resampling
    Eigen::Matrix<double, Eigen::Dynamic, 3> resampled(n, 3);
    const double u0 = rng.uniform() / n;
    double cumulative = w[0];
    int j = 0;
    for (int i = 0; i < n; ++i) {
      const double u = u0 + static_cast<double>(i) / n;
      while (u > cumulative && j + 1 < n) cumulative += w[++j];
      resampled.row(i) = belief.particles.row(j);
    }
    out.particles = std::move(resampled);
    out.weights.setConstant(n, 1.0 / n);
  }
  weighted_moments(out.particles, out.weights, &out.mean, &out.cov);
  return out;
}

BaselineEstimate baseline_solomon(const Vec3& prev_estimate_mm,
                                  const Vec2& reading, const Twist& base_twist,
                                  double dt, const MeasurementModel& model,
                                  const WhiskerRod& rod) {
  if (rod.shape_kind != WhiskerShape::Straight) {
    throw std::invalid_argument("baseline_solomon: straight whiskers only");
  }
  const double length_mm = rod.length * kMmPerM;

  // Rigid propagation of the previous point, then projection onto the
  // straight centerline (the +z axis of {B}).
  const Vec3 propagated =
      prev_estimate_mm + dt * relative_velocity_mm(prev_estimate_mm, base_twist);
  double s = std::clamp(propagated.z(), 0.0, length_mm);

  const auto moment_at = [&](double arc) {
    return model.mean(Vec3(0.0, 0.0, arc)).norm();
  };
  const double h = 0.5;  // [mm]
  const double predicted = moment_at(s);
  const double slope = (moment_at(std::min(s + h, length_mm)) -
                        moment_at(std::max(s - h, 0.0))) /
                       (std::min(s + h, length_mm) - std::max(s - h, 0.0));

  BaselineEstimate est;
  double corrected = s;
  if (std::abs(slope) > 1e-12) {
    corrected = s + (reading.norm() - predicted) / slope;
  }
  if (corrected < 0.0 || corrected > length_mm) {
    est.clamped = true;
    corrected = std::clamp(corrected, 0.0, length_mm);
  }
  est.point_mm = Vec3(0.0, 0.0, corrected);
  return est;
}

PriorProvider default_prior(const WhiskerRod& rod) {
  const Vec3 mid_mm = rod.rest_point_at_arc(0.5 * rod.length) * kMmPerM;
  return [mid_mm](const Pose&) {
    PriorSpec prior;
    prior.mean_mm = mid_mm;
    prior.cov_mm2 = 25.0 * Mat3::Identity();
    return prior;
  };
}

TrackResult track_trace(const std::vector<TraceInput>& series,
                        const MeasurementModel& model,
                        const FilterConfig& config, const PriorProvider& prior,
                        double contact_threshold_counts, uint64_t seed) {
  TrackResult result;
  Rng rng(derive_seed(seed, "track"));

  Belief belief;
  bool in_segment = false;
  int step_in_segment = 0;
  int rejection_streak = 0;

  for (size_t i = 0; i < series.size(); ++i) {
    const TraceInput& rec = series[i];
    MomentReading reading;
    reading.m = rec.moment_counts;
    const bool contact = detect_contact(reading, contact_threshold_counts);

    if (!contact) {
      in_segment = false;
      continue;
    }

    try {
      if (!in_segment) {
        const PriorSpec p = prior(rec.base);
        if (config.kind == FilterKind::Pf) {
          belief = Belief::sample_particles(p.mean_mm, p.cov_mm2,
                                            config.n_particles, rng);
        } else {
          belief = Belief::gaussian(p.mean_mm, p.cov_mm2);
        }
        in_segment = true;
        step_in_segment = 0;
        rejection_streak = 0;
        ++result.segments;
      } else {
        const double dt = rec.t - series[i - 1].t;
        const Twist xi = body_twist_between(series[i - 1].base, rec.base, dt);
        belief = predict_step(belief, xi, dt, config, &rng);
      }
      ++step_in_segment;

      const double innovation_norm =
          (rec.moment_counts - model.mean(belief.mean)).norm();
      FilterConfig step_config = config;
      if (config.outlier_gate_sigma > 0.0 &&
          rejection_streak >= config.max_consecutive_rejections) {
        step_config.outlier_gate_sigma = 0.0;  // force this update through
      }
      bool rejected = false;
      switch (config.kind) {
        case FilterKind::Ekf:
          belief = update_ekf(belief, rec.moment_counts, model, step_config,
                              &rejected);
          break;
        case FilterKind::Ukf:
          belief = update_ukf(belief, rec.moment_counts, model, step_config,
                              step_in_segment, &rejected);
          break;
        case FilterKind::Pf:
          belief = update_pf(belief, rec.moment_counts, model, step_config, rng);
          break;
      }
      rejection_streak = rejected ? rejection_streak + 1 : 0;

      TrackStep step;
      step.t = rec.t;
      step.segment = result.segments - 1;
      step.belief = belief;
      step.world_mm = (rec.base * (belief.mean / kMmPerM)) * kMmPerM;
      step.innovation_norm = innovation_norm;
      result.steps.push_back(std::move(step));
    } catch (const std::exception& e) {
      throw std::runtime_error("track_trace failed at t=" + std::to_string(rec.t) +
                               ": " + e.what());
    }
  }
  return result;
}

TrackResult track_baseline(const std::vector<TraceInput>& series,
                           const MeasurementModel& model,
                           const PriorProvider& prior,
                           double contact_threshold_counts,
                           const WhiskerRod& rod) {
  TrackResult result;
  Vec3 estimate = Vec3::Zero();
  bool in_segment = false;

  for (size_t i = 0; i < series.size(); ++i) {
    const TraceInput& rec = series[i];
    MomentReading reading;
    reading.m = rec.moment_counts;
    if (!detect_contact(reading, contact_threshold_counts)) {
      in_segment = false;
      continue;
    }
    if (!in_segment) {
      estimate = prior(rec.base).mean_mm;
      in_segment = true;
      ++result.segments;
    } else {
      const double dt = rec.t - series[i - 1].t;
      const Twist xi = body_twist_between(series[i - 1].base, rec.base, dt);
      estimate = baseline_solomon(estimate, rec.moment_counts, xi, dt, model, rod)
                     .point_mm;
    }
    TrackStep step;
    step.t = rec.t;
    step.segment = result.segments - 1;
    step.belief = Belief::gaussian(estimate, Mat3::Zero());
    step.world_mm = (rec.base * (estimate / kMmPerM)) * kMmPerM;
    step.innovation_norm = (rec.moment_counts - model.mean(estimate)).norm();
    result.steps.push_back(std::move(step));
  }
  return result;
}

}  // namespace whisker
