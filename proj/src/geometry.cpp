#include "whisker/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace whisker {

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return s;
}

Mat3 rotation_exp(const Vec3& r) {
  const double theta = r.norm();
  const Mat3 k = skew(r);
  if (theta < 1e-12) {
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * k + b * k * k;
}

Vec3 rotation_log(const Mat3& R) {
  const double tr = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(tr);
  if (theta >= M_PI - 1e-6) {
    throw std::domain_error("rotation_log: angle within 1e-6 of pi, ambiguous");
  }
  const Vec3 axis_raw(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  if (theta < 1e-9) {
    // log(R) ~ (R - R^T)/2 to leading order
    return 0.5 * axis_raw;
  }
  return (theta / (2.0 * std::sin(theta))) * axis_raw;
}

Mat3 so3_left_jacobian(const Vec3& r) {
  const double theta = r.norm();
  const Mat3 k = skew(r);
  if (theta < 1e-9) {
    return Mat3::Identity() + 0.5 * k + (1.0 / 6.0) * k * k;
  }
  const double t2 = theta * theta;
  const double a = (1.0 - std::cos(theta)) / t2;
  const double b = (theta - std::sin(theta)) / (t2 * theta);
  return Mat3::Identity() + a * k + b * k * k;
}

Mat3 so3_left_jacobian_inv(const Vec3& r) {
  const double theta = r.norm();
  const Mat3 k = skew(r);
  if (theta < 1e-9) {
    return Mat3::Identity() - 0.5 * k + (1.0 / 12.0) * k * k;
  }
  const double half = 0.5 * theta;
  const double cot = half / std::tan(half);
  return Mat3::Identity() - 0.5 * k + ((1.0 - cot) / (theta * theta)) * k * k;
}

bool Pose::is_valid(double tol) const {
  const Mat3 err = R.transpose() * R - Mat3::Identity();
  if (err.cwiseAbs().maxCoeff() > tol) return false;
  if (std::abs(R.determinant() - 1.0) > tol) return false;
  return t.allFinite();
}

Pose Pose::from_quaternion(const Vec3& translation, double qw, double qx,
                           double qy, double qz) {
  Eigen::Quaterniond q(qw, qx, qy, qz);
  q.normalize();
  return Pose{q.toRotationMatrix(), translation};
}

Twist body_twist_between(const Pose& p0, const Pose& p1, double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("body_twist_between: dt must be positive");
  }
  const Pose rel = p0.inverse() * p1;
  const Vec3 phi = rotation_log(rel.R);  // = w * dt
  Twist xi;
  xi.w = phi / dt;
  xi.v = so3_left_jacobian_inv(phi) * rel.t / dt;
  return xi;
}

Pose integrate_twist(const Pose& p0, const Twist& xi, double dt) {
  const Vec3 phi = xi.w * dt;
  Pose rel;
  rel.R = rotation_exp(phi);
  rel.t = so3_left_jacobian(phi) * (xi.v * dt);
  return p0 * rel;
}

}  // namespace whisker
