#pragma once

#include <Eigen/Dense>

namespace whisker {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat2 = Eigen::Matrix2d;

/// Skew-symmetric matrix S of v, such that S*u == v.cross(u).
Mat3 skew(const Vec3& v);

/// Rotation matrix from a rotation vector (axis * angle).
Mat3 rotation_exp(const Vec3& r);

/// Rotation vector of R. Throws std::domain_error for angles >= pi - 1e-6,
/// where the logarithm is ambiguous. Trajectories are expected to be sampled
/// finely enough that per-step rotations stay well below this.
Vec3 rotation_log(const Mat3& R);

/// Left Jacobian of SO(3) at rotation vector r, and its inverse.
Mat3 so3_left_jacobian(const Vec3& r);
Mat3 so3_left_jacobian_inv(const Vec3& r);

/// Rigid transform of frame {B} in frame {S}. Units: meters.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 operator*(const Vec3& p) const { return R * p + t; }
  Pose operator*(const Pose& o) const { return Pose{R * o.R, R * o.t + t}; }
  Pose inverse() const { return Pose{R.transpose(), -(R.transpose() * t)}; }

  /// R orthonormal with det +1 within tol.
  bool is_valid(double tol = 1e-9) const;

  static Pose from_quaternion(const Vec3& translation, double qw, double qx,
                              double qy, double qz);
  Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(R); }
};

/// Body-frame velocity pair of {B} relative to {S}: v [m/s], w [rad/s].
struct Twist {
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();

  bool is_zero(double tol = 0.0) const {
    return v.norm() <= tol && w.norm() <= tol;
  }
};

/// Body twist taking p0 to p1 over dt seconds, recovered from the SE(3)
/// logarithm of p0^-1 * p1. Throws std::invalid_argument for dt <= 0 and
/// std::domain_error when the relative rotation reaches pi.
Twist body_twist_between(const Pose& p0, const Pose& p1, double dt);

/// Exact exponential integration of a constant body twist from p0 over dt.
/// Inverse of body_twist_between.
Pose integrate_twist(const Pose& p0, const Twist& xi, double dt);

}  // namespace whisker
