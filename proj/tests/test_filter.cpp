#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "whisker/filter.hpp"
#include "whisker/random.hpp"

using namespace whisker;

namespace {

struct LinearModel final : MeasurementModel {
  Mat23 a = Mat23::Zero();
  Vec2 b = Vec2::Zero();
  Vec2 mean(const Vec3& x) const override { return a * x + b; }
  Mat23 jacobian(const Vec3&) const override { return a; }
};

struct ConstantModel final : MeasurementModel {
  Vec2 value = Vec2::Zero();
  Vec2 mean(const Vec3&) const override { return value; }
  Mat23 jacobian(const Vec3&) const override { return Mat23::Zero(); }
};

LinearModel default_linear() {
  LinearModel m;
  m.a << 3.0, -1.0, 0.5, 0.2, 2.0, -0.7;
  m.b << 1.0, -2.0;
  return m;
}

// Closed-form Kalman measurement update (the oracle for EKF/UKF).
void kalman_update(const Vec3& mean, const Mat3& cov, const Vec2& z,
                   const LinearModel& m, const Mat2& r, Vec3* out_mean,
                   Mat3* out_cov) {
  const Mat2 s = m.a * cov * m.a.transpose() + r;
  const Eigen::Matrix<double, 3, 2> k = cov * m.a.transpose() * s.inverse();
  *out_mean = mean + k * (z - (m.a * mean + m.b));
  *out_cov = (Mat3::Identity() - k * m.a) * cov;
}

Mat3 random_spd(Rng& rng, double scale) {
  const Mat3 a = scale * Mat3::Random();
  return a * a.transpose() + 0.1 * scale * scale * Mat3::Identity();
}

FilterConfig oracle_config() {
  FilterConfig c;
  c.outlier_gate_sigma = 0.0;  // oracle-equivalence mode
  return c;
}

}  // namespace

TEST_CASE("predict with zero twist adds process noise only") {
  FilterConfig cfg;
  cfg.fading_memory = 1.0;
  const Belief prior = Belief::gaussian(Vec3(1, 2, 3), 4.0 * Mat3::Identity());
  const Belief post = predict_step(prior, Twist{}, 0.004, cfg);
  CHECK((post.mean - prior.mean).norm() == 0.0);
  CHECK((post.cov - (prior.cov + cfg.process_noise)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("fading memory scales the covariance exactly") {
  FilterConfig cfg;
  cfg.fading_memory = 1.004;
  cfg.process_noise = Mat3::Zero();
  Rng rng(50);
  const Belief prior = Belief::gaussian(Vec3::Zero(), random_spd(rng, 2.0));
  const Belief post = predict_step(prior, Twist{}, 0.004, cfg);
  CHECK((post.cov - 1.004 * prior.cov).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("predicted mean is world-fixed under base motion") {
  // Oracle: transform both means into {S} with the exact pose update; the
  // world-frame displacement must be O(dt^2).
  Rng rng(51);
  const double dt = 0.004;
  for (int trial = 0; trial < 100; ++trial) {
    Twist xi;
    xi.v = 0.05 * rng.gaussian_vec3();   // m/s
    xi.w = 2.0 * rng.gaussian_vec3();    // rad/s
    const Vec3 p_mm = 30.0 * rng.gaussian_vec3();

    FilterConfig cfg;
    const Belief prior = Belief::gaussian(p_mm, Mat3::Identity());
    const Belief post = predict_step(prior, xi, dt, cfg);

    Pose base0;  // arbitrary; world-fixity is frame-independent
    base0.R = rotation_exp(rng.gaussian_vec3());
    base0.t = rng.gaussian_vec3();
    const Pose base1 = integrate_twist(base0, xi, dt);
    const Vec3 world0 = base0 * (prior.mean * 1e-3);
    const Vec3 world1 = base1 * (post.mean * 1e-3);
    const double bound =
        1e-5 * 1e-3 * std::max(1.0, prior.mean.norm());  // 1e-5 mm * |p|
    CHECK((world1 - world0).norm() < bound + dt * dt * (xi.w.norm() + 1.0) *
                                                 (xi.v.norm() * 1e0 +
                                                  xi.w.norm() * p_mm.norm() * 1e-3));
  }
}

TEST_CASE("pure base rotation example") {
  Twist xi;
  xi.w = Vec3(0, 0, 1);
  const double dt = 0.004;
  const Vec3 p_mm(20.0, 5.0, 10.0);
  FilterConfig cfg;
  const Belief post = predict_step(Belief::gaussian(p_mm, Mat3::Identity()), xi, dt, cfg);
  const Pose base1 = integrate_twist(Pose{}, xi, dt);
  const Vec3 world1 = base1 * (post.mean * 1e-3);
  CHECK((world1 * 1e3 - p_mm).norm() < 1e-5 * p_mm.norm());
}

TEST_CASE("ekf equals the closed-form kalman update on a linear model") {
  Rng rng(52);
  const LinearModel model = default_linear();
  const FilterConfig cfg = oracle_config();
  for (int trial = 0; trial < 50; ++trial) {
    const Belief prior =
        Belief::gaussian(5.0 * rng.gaussian_vec3(), random_spd(rng, 2.0));
    const Vec2 z(10.0 * rng.gaussian(), 10.0 * rng.gaussian());
    Vec3 mean;
    Mat3 cov;
    kalman_update(prior.mean, prior.cov, z, model, cfg.measurement_noise, &mean, &cov);
    const Belief post = update_ekf(prior, z, model, cfg);
    CHECK((post.mean - mean).norm() < 1e-9);
    CHECK((post.cov - cov).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("ukf equals the closed-form kalman update on a linear model") {
  Rng rng(53);
  const LinearModel model = default_linear();
  const FilterConfig cfg = oracle_config();
  for (int trial = 0; trial < 50; ++trial) {
    const Belief prior =
        Belief::gaussian(5.0 * rng.gaussian_vec3(), random_spd(rng, 2.0));
    const Vec2 z(10.0 * rng.gaussian(), 10.0 * rng.gaussian());
    Vec3 mean;
    Mat3 cov;
    kalman_update(prior.mean, prior.cov, z, model, cfg.measurement_noise, &mean, &cov);
    const Belief post = update_ukf(prior, z, model, cfg, 1);
    CHECK((post.mean - mean).norm() < 1e-8);
    CHECK((post.cov - cov).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("zero innovation leaves the mean unchanged") {
  const LinearModel model = default_linear();
  const FilterConfig cfg = oracle_config();
  const Belief prior = Belief::gaussian(Vec3(1, -2, 3), 2.0 * Mat3::Identity());
  const Vec2 z = model.mean(prior.mean);
  const Belief ekf = update_ekf(prior, z, model, cfg);
  CHECK((ekf.mean - prior.mean).norm() < 1e-12);
  CHECK(ekf.cov.trace() <= prior.cov.trace());
  const Belief ukf = update_ukf(prior, z, model, cfg, 1);
  CHECK((ukf.mean - prior.mean).norm() < 1e-10);

  CHECK(ukf.cov.trace() <= prior.cov.trace());
}

TEST_CASE("flat-model update is a no-op apart from psd maintenance") {
  ConstantModel model;
  model.value = Vec2(3.0, 4.0);
  const FilterConfig cfg = oracle_config();
  const Belief prior = Belief::gaussian(Vec3(1, 1, 1), 2.0 * Mat3::Identity());
  const Belief post = update_ekf(prior, Vec2(10.0, -3.0), model, cfg);
  CHECK((post.mean - prior.mean).norm() == 0.0);
  CHECK((post.cov - prior.cov).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ukf periodic inflation doubles the prior trace at the period") {
  ConstantModel model;  // no information: posterior cov equals the prior cov
  FilterConfig cfg = oracle_config();
  cfg.inflation_period = 10;
  cfg.inflation_factor = 2.0;
  const Belief prior = Belief::gaussian(Vec3::Zero(), 3.0 * Mat3::Identity());
  const Belief at9 = update_ukf(prior, Vec2::Zero(), model, cfg, 9);
  CHECK(at9.cov.trace() == doctest::Approx(prior.cov.trace()).epsilon(1e-9));
  const Belief at10 = update_ukf(prior, Vec2::Zero(), model, cfg, 10);
  CHECK(at10.cov.trace() == doctest::Approx(2.0 * prior.cov.trace()).epsilon(1e-9));
}

TEST_CASE("outlier gate skips wild readings and recovers") {
  const LinearModel model = default_linear();
  FilterConfig cfg;
  cfg.outlier_gate_sigma = 6.0;
  const Belief prior = Belief::gaussian(Vec3(0, 0, 0), 0.01 * Mat3::Identity());
  bool rejected = false;
  const Vec2 spike = model.mean(prior.mean) + Vec2(1e4, -1e4);
  const Belief post = update_ekf(prior, spike, model, cfg, &rejected);
  CHECK(rejected);
  CHECK((post.mean - prior.mean).norm() == 0.0);
  rejected = true;
  const Belief ok = update_ekf(prior, model.mean(prior.mean), model, cfg, &rejected);
  CHECK_FALSE(rejected);
  CHECK((ok.mean - prior.mean).norm() < 1e-12);
}

TEST_CASE("particle filter with identical particles returns that particle") {
  Eigen::Matrix<double, Eigen::Dynamic, 3> particles(64, 3);
  for (int i = 0; i < 64; ++i) particles.row(i) = Vec3(2, -1, 5).transpose();
  Belief belief = Belief::from_particles(
      particles, Eigen::VectorXd::Constant(64, 1.0 / 64));
  const LinearModel model = default_linear();
  Rng rng(54);
  FilterConfig cfg = FilterConfig::pf_defaults();
  const Belief post = update_pf(belief, model.mean(Vec3(2, -1, 5)), model, cfg, rng);
  CHECK((post.mean - Vec3(2, -1, 5)).norm() < 1e-12);
}

TEST_CASE("particle filter matches the analytic gaussian posterior") {
  // Linear-Gaussian toy: prior N(mu0, P0), one linear measurement. The
  // analytic posterior comes from the Kalman identity.
  const int n = 100000;
  const LinearModel model = default_linear();
  FilterConfig cfg = FilterConfig::pf_defaults();
  cfg.n_particles = n;

  const Vec3 mu0(1.0, -1.0, 2.0);
  const Mat3 p0 = 4.0 * Mat3::Identity();
  const Vec3 truth(1.8, -0.2, 2.5);
  Rng rng(55);
  Belief belief = Belief::sample_particles(mu0, p0, n, rng);
  const Vec2 z = model.mean(truth);
  const Belief post = update_pf(belief, z, model, cfg, rng);

  Vec3 mean;
  Mat3 cov;
  LinearModel lm = model;
  kalman_update(mu0, p0, z, lm, cfg.measurement_noise, &mean, &cov);
  const double tol = 3.0 * std::sqrt(cov.diagonal().maxCoeff()) / std::sqrt(double(n));
  // sampling error of the prior cloud enters as well; allow both terms
  const double prior_tol = 3.0 * std::sqrt(p0(0, 0) / n);
  CHECK((post.mean - mean).cwiseAbs().maxCoeff() < 10.0 * (tol + prior_tol));
}

TEST_CASE("particle filter is deterministic under a fixed seed") {
  const LinearModel model = default_linear();
  FilterConfig cfg = FilterConfig::pf_defaults();
  cfg.n_particles = 500;
  auto run = [&] {
    Rng rng(56);
    Belief b = Belief::sample_particles(Vec3::Zero(), Mat3::Identity(), 500, rng);
    for (int i = 0; i < 10; ++i) {
      b = predict_step(b, Twist{}, 0.004, cfg, &rng);
      b = update_pf(b, Vec2(0.5 * i, -0.2 * i), model, cfg, rng);
    }
    return b;
  };
  const Belief a = run();
  const Belief b = run();
  CHECK(a.mean == b.mean);
  CHECK(a.particles == b.particles);
}

TEST_CASE("particle filter reports track loss on weight underflow") {
  const LinearModel model = default_linear();
  FilterConfig cfg = FilterConfig::pf_defaults();
  cfg.measurement_noise = 1e-6 * Mat2::Identity();
  Rng rng(57);
  Belief b = Belief::sample_particles(Vec3::Zero(), 1e-6 * Mat3::Identity(), 100, rng);
  CHECK_THROWS_AS(update_pf(b, Vec2(1e6, 1e6), model, cfg, rng),
                  std::runtime_error);
}

TEST_CASE("covariance stays symmetric psd through long random filtering") {
  Rng rng(58);
  const LinearModel model = default_linear();
  FilterConfig cfg;
  cfg.outlier_gate_sigma = 0.0;
  Belief b = Belief::gaussian(Vec3::Zero(), 25.0 * Mat3::Identity());
  for (int i = 1; i <= 10000; ++i) {
    Twist xi;
    xi.v = 0.02 * rng.gaussian_vec3();
    xi.w = 1.0 * rng.gaussian_vec3();
    b = predict_step(b, xi, 0.004, cfg);
    const Vec2 z = model.mean(b.mean) + Vec2(rng.gaussian(), rng.gaussian());
    b = i % 2 == 0 ? update_ekf(b, z, model, cfg) : update_ukf(b, z, model, cfg, i);
    CHECK((b.cov - b.cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    const double min_eig =
        Eigen::SelfAdjointEigenSolver<Mat3>(b.cov).eigenvalues().minCoeff();
    CHECK(min_eig > -1e-9);
  }
}

TEST_CASE("fading memory grows covariance geometrically without information") {
  ConstantModel model;
  FilterConfig cfg = oracle_config();
  cfg.process_noise = Mat3::Zero();
  Belief b = Belief::gaussian(Vec3::Zero(), Mat3::Identity());
  const double t0 = b.cov.trace();
  for (int i = 1; i <= 100; ++i) {
    b = predict_step(b, Twist{}, 0.004, cfg);
    b = update_ekf(b, Vec2::Zero(), model, cfg);
  }
  CHECK(b.cov.trace() ==
        doctest::Approx(t0 * std::pow(1.004, 100)).epsilon(1e-9));
}

TEST_CASE("baseline: matching moments give pure kinematic propagation") {
  const WhiskerRod rod = build_whisker(WhiskerShape::Straight, 0.055, 50);
  // |g| grows linearly in z: M(s) = 4 s
  LinearModel model;
  model.a << 0, 0, 4.0, 0, 0, 0;
  const Vec3 prev(0.0, 0.0, 30.0);
  Twist xi;
  xi.v = Vec3(0, 0, -0.01);  // base moving -z at 10 mm/s
  const double dt =  0.004;
  // after propagation the point sits at z = 30.04 mm
  const Vec2 reading = model.mean(Vec3(0, 0, 30.04));
  const BaselineEstimate est = baseline_solomon(prev, reading, xi, dt, model, rod);
  CHECK_FALSE(est.clamped);
  CHECK((est.point_mm - Vec3(0, 0, 30.04)).norm() < 1e-9);
}

TEST_CASE("baseline: static base with constant reading is a fixed point") {
  const WhiskerRod rod = build_whisker(WhiskerShape::Straight, 0.055, 50);
  LinearModel model;
  model.a << 0, 0, 4.0, 0, 0, 0;
  const Vec2 reading = model.mean(Vec3(0, 0, 25.0));
  Vec3 estimate(0, 0, 40.0);
  for (int i = 0; i < 2; ++i) {
    estimate = baseline_solomon(estimate, reading, Twist{}, 0.004, model, rod).point_mm;
  }
  const Vec3 once = baseline_solomon(estimate, reading, Twist{}, 0.004, model, rod).point_mm;
  CHECK((once - estimate).norm() < 1e-9);
  CHECK(std::abs(estimate.z() - 25.0) < 1e-9);
}

TEST_CASE("baseline clamps corrections beyond the whisker") {
  const WhiskerRod rod = build_whisker(WhiskerShape::Straight, 0.055, 50);
  LinearModel model;
  model.a << 0, 0, 4.0, 0, 0, 0;
  const BaselineEstimate est =
      baseline_solomon(Vec3(0, 0, 50.0), Vec2(4.0 * 300.0, 0.0), Twist{}, 0.004,
                       model, rod);
  CHECK(est.clamped);
  CHECK(est.point_mm.z() == doctest::Approx(55.0));
}

TEST_CASE("baseline requires a straight whisker") {
  const WhiskerRod rod = build_whisker(WhiskerShape::Curved, 0.055, 50);
  LinearModel model;
  CHECK_THROWS_AS(
      baseline_solomon(Vec3::Zero(), Vec2::Zero(), Twist{}, 0.004, model, rod),
      std::invalid_argument);
}

TEST_CASE("track_trace with no contact yields no segments") {
  const LinearModel model = default_linear();
  std::vector<TraceInput> series;
  for (int i = 0; i < 100; ++i) {
    series.push_back({i / 250.0, Pose{}, Vec2(0.1, 0.1)});
  }
  const TrackResult r = track_trace(series, model, FilterConfig{},
                                    default_prior(build_whisker(
                                        WhiskerShape::Straight, 0.055, 30)),
                                    4.0, 1);
  CHECK(r.segments == 0);
  CHECK(r.steps.empty());
}

TEST_CASE("track_trace segments at contact transitions") {
  const LinearModel model = default_linear();
  std::vector<TraceInput> series;
  for (int i = 0; i < 90; ++i) {
    const bool contact = (i >= 10 && i < 30) || (i >= 50 && i < 80);
    const Vec2 z = contact ? model.mean(Vec3(2, 2, 2)) : Vec2(0.1, 0.0);
    series.push_back({i / 250.0, Pose{}, z});
  }
  FilterConfig cfg;
  cfg.outlier_gate_sigma = 0.0;
  const TrackResult r = track_trace(
      series, model, cfg,
      default_prior(build_whisker(WhiskerShape::Straight, 0.055, 30)), 4.0, 1);
  REQUIRE(r.segments == 2);
  REQUIRE(r.steps.size() == 20 + 30);
  CHECK(r.steps.front().segment == 0);
  CHECK(r.steps.back().segment == 1);
}
