#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "whisker/geometry.hpp"

namespace whisker {

/// Measurement map from a 3D contact position in {B} [mm] to the two base
/// moment channels [counts]. Implemented by the calibrated GPR model; tests
/// substitute closed-form models through the same interface.
struct MeasurementModel {
  virtual ~MeasurementModel() = default;
  virtual Vec2 mean(const Vec3& x_mm) const = 0;
  virtual Mat23 jacobian(const Vec3& x_mm) const = 0;
};

enum class SensorKernelKind { SquaredExponential, ThinPlate };

/// Stationary kernels on the pairwise distance r [mm]:
///   SE: exp(-r^2 / 2 l^2)
///   TP: (2|r|^3 - 3 R r^2 + R^3) / 12, valid for r < R.
struct SensorKernel {
  SensorKernelKind kind = SensorKernelKind::ThinPlate;
  double length_scale = 5.0;  // l [mm], SE
  double radius = 100.0;      // R [mm], TP

  double eval(double r) const;
  /// dk/dr divided by r; finite everywhere including r = 0, so kernel
  /// gradients are simply (x - xi) * eval_slope(r).
  double eval_slope(double r) const;
};

/// Calibration pairs: contact positions in {B} [mm] against moment channel
/// readings [counts].
struct CalibrationDataset {
  Eigen::MatrixX3d inputs;
  Eigen::MatrixX2d targets;

  int size() const { return static_cast<int>(inputs.rows()); }
  /// Finite, no duplicate inputs closer than 1e-6 mm, at least min_size
  /// samples (10 for calibration products; fit itself accepts any n >= 1).
  void validate(int min_size = 10) const;
  double diameter() const;
};

class GprSensorModel final : public MeasurementModel {
 public:
  /// Exact GPR fit with fixed hyperparameters: solves (K + sigma^2 I) W = Y
  /// per channel by Cholesky, escalating diagonal jitter from 1e-10 to 1e-6
  /// if the Gram matrix is numerically indefinite. For the TP kernel the
  /// radius must exceed the dataset diameter.
  static GprSensorModel fit(const CalibrationDataset& data,
                            const SensorKernel& kernel, double noise_var);

  Vec2 predict_mean(const Vec3& x_mm) const;
  Mat23 predict_jacobian(const Vec3& x_mm) const;

  Vec2 mean(const Vec3& x_mm) const override { return predict_mean(x_mm); }
  Mat23 jacobian(const Vec3& x_mm) const override {
    return predict_jacobian(x_mm);
  }

  /// Per-channel 1 - SS_res / SS_tot on the given dataset. Throws on
  /// zero-variance targets.
  Vec2 r_squared(const CalibrationDataset& data) const;

  nlohmann::json to_json() const;
  static GprSensorModel from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static GprSensorModel load(const std::string& path);

  const SensorKernel& kernel() const { return kernel_; }
  double noise_variance() const { return noise_var_; }
  const Eigen::MatrixX3d& train_inputs() const { return train_inputs_; }
  const Eigen::MatrixX2d& dual_weights() const { return dual_weights_; }
  const Eigen::MatrixXd& cholesky_factor() const { return chol_; }

 private:
  GprSensorModel() = default;

  SensorKernel kernel_;
  double noise_var_ = 0.25;
  Eigen::MatrixX3d train_inputs_;
  Eigen::MatrixX2d dual_weights_;
  Eigen::MatrixXd chol_;  // lower factor of K + sigma^2 I (+ jitter)
};

/// Coefficient of determination of any measurement model on a dataset.
Vec2 r_squared(const MeasurementModel& model, const CalibrationDataset& data);

}  // namespace whisker
