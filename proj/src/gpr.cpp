#include "whisker/gpr.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace whisker {

double SensorKernel::eval(double r) const {
  switch (kind) {
    case SensorKernelKind::SquaredExponential:
      return std::exp(-r * r / (2.0 * length_scale * length_scale));
    case SensorKernelKind::ThinPlate: {
      const double a = std::abs(r);
      return (2.0 * a * a * a - 3.0 * radius * r * r +
              radius * radius * radius) /
             12.0;
    }
  }
  throw std::logic_error("SensorKernel::eval: unknown kind");
}

double SensorKernel::eval_slope(double r) const {
  switch (kind) {
    case SensorKernelKind::SquaredExponential:
      return -eval(r) / (length_scale * length_scale);
    case SensorKernelKind::ThinPlate:
      // dk/dr = (r^2 - R r)/2, so dk/dr / r = (r - R)/2.
      return (std::abs(r) - radius) / 2.0;
  }
  throw std::logic_error("SensorKernel::eval_slope: unknown kind");
}

void CalibrationDataset::validate(int min_size) const {
  const int n = size();
  if (n < min_size) {
    throw std::invalid_argument("calibration dataset needs at least " +
                                std::to_string(min_size) + " samples, got " +
                                std::to_string(n));
  }
  if (targets.rows() != n) {
    throw std::invalid_argument("calibration dataset inputs/targets size mismatch");
  }
  if (!inputs.allFinite() || !targets.allFinite()) {
    throw std::invalid_argument("calibration dataset has non-finite entries");
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if ((inputs.row(i) - inputs.row(j)).norm() < 1e-6) {
        throw std::invalid_argument("duplicate calibration inputs at rows " +
                                    std::to_string(i) + " and " + std::to_string(j));
      }
    }
  }
}

double CalibrationDataset::diameter() const {
  double d = 0.0;
  for (int i = 0; i < size(); ++i) {
    for (int j = i + 1; j < size(); ++j) {
      d = std::max(d, (inputs.row(i) - inputs.row(j)).norm());
    }
  }
  return d;
}

GprSensorModel GprSensorModel::fit(const CalibrationDataset& data,
                                   const SensorKernel& kernel,
                                   double noise_var) {
  data.validate(1);
  if (kernel.kind == SensorKernelKind::ThinPlate) {
    const double diam = data.diameter();
    if (kernel.radius <= diam) {
      std::ostringstream msg;
      msg << "thin-plate radius " << kernel.radius
          << " mm must exceed the dataset diameter " << diam << " mm";
      throw std::invalid_argument(msg.str());
    }
  }

  const int n = data.size();
  Eigen::MatrixXd gram(n, n);
  for (int i = 0; i < n; ++i) {
    gram(i, i) = kernel.eval(0.0);
    for (int j = i + 1; j < n; ++j) {
      const double k = kernel.eval((data.inputs.row(i) - data.inputs.row(j)).norm());
      gram(i, j) = k;
      gram(j, i) = k;
    }
  }

  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
  bool ok = false;
  for (double j = 1e-10; j <= 1.1e-6; j *= 10.0) {
    llt.compute(gram + (noise_var + jitter) * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) {
      ok = true;
      break;
    }
    jitter = (jitter == 0.0) ? 1e-10 : jitter * 10.0;
  }
  if (!ok) {
    std::ostringstream msg;
    msg << "Cholesky factorization failed for "
        << (kernel.kind == SensorKernelKind::ThinPlate ? "thin-plate"
                                                       : "squared-exponential")
        << " kernel after jitter escalation to 1e-6";
    throw std::runtime_error(msg.str());
  }

  GprSensorModel model;
  model.kernel_ = kernel;
  model.noise_var_ = noise_var;
  model.train_inputs_ = data.inputs;
  model.dual_weights_ = llt.solve(data.targets);
  model.chol_ = llt.matrixL();
  return model;
}

Vec2 GprSensorModel::predict_mean(const Vec3& x_mm) const {
  Vec2 out = Vec2::Zero();
  for (int i = 0; i < train_inputs_.rows(); ++i) {
    const double k = kernel_.eval((x_mm.transpose() - train_inputs_.row(i)).norm());
    out += k * dual_weights_.row(i).transpose();
  }
  return out;
}

Mat23 GprSensorModel::predict_jacobian(const Vec3& x_mm) const {
  Mat23 jac = Mat23::Zero();
  for (int i = 0; i < train_inputs_.rows(); ++i) {
    const Vec3 d = x_mm - train_inputs_.row(i).transpose();
    const double slope = kernel_.eval_slope(d.norm());
    jac += dual_weights_.row(i).transpose() * (slope * d).transpose();
  }
  return jac;
}

Vec2 r_squared(const MeasurementModel& model, const CalibrationDataset& data) {
  const int n = data.size();
  Eigen::MatrixX2d pred(n, 2);
  for (int i = 0; i < n; ++i) {
    pred.row(i) = model.mean(data.inputs.row(i).transpose()).transpose();
  }
  Vec2 out;
  for (int c = 0; c < 2; ++c) {
    const double mean = data.targets.col(c).mean();
    const double ss_tot = (data.targets.col(c).array() - mean).square().sum();
    if (ss_tot <= 0.0) {
      throw std::invalid_argument("r_squared: zero-variance targets in channel " +
                                  std::to_string(c));
    }
    const double ss_res = (data.targets.col(c) - pred.col(c)).squaredNorm();
    out[c] = 1.0 - ss_res / ss_tot;
  }
  return out;
}

Vec2 GprSensorModel::r_squared(const CalibrationDataset& data) const {
  return whisker::r_squared(static_cast<const MeasurementModel&>(*this), data);
}

nlohmann::json GprSensorModel::to_json() const {
  nlohmann::json j;
  j["kernel"]["kind"] = kernel_.kind == SensorKernelKind::ThinPlate ? "tp" : "se";
  j["kernel"]["length_scale"] = kernel_.length_scale;
  j["kernel"]["radius"] = kernel_.radius;
  j["noise_var"] = noise_var_;
  nlohmann::json inputs = nlohmann::json::array();
  nlohmann::json weights = nlohmann::json::array();
  for (int i = 0; i < train_inputs_.rows(); ++i) {
    inputs.push_back({train_inputs_(i, 0), train_inputs_(i, 1), train_inputs_(i, 2)});
    weights.push_back({dual_weights_(i, 0), dual_weights_(i, 1)});
  }
  j["train_inputs"] = std::move(inputs);
  j["dual_weights"] = std::move(weights);
  return j;
}

GprSensorModel GprSensorModel::from_json(const nlohmann::json& j) {
  GprSensorModel model;
  const std::string kind = j.at("kernel").at("kind").get<std::string>();
  model.kernel_.kind = kind == "tp" ? SensorKernelKind::ThinPlate
                                    : SensorKernelKind::SquaredExponential;
  model.kernel_.length_scale = j.at("kernel").at("length_scale").get<double>();
  model.kernel_.radius = j.at("kernel").at("radius").get<double>();
  model.noise_var_ = j.at("noise_var").get<double>();
  const auto& inputs = j.at("train_inputs");
  const auto& weights = j.at("dual_weights");
  const int n = static_cast<int>(inputs.size());
  model.train_inputs_.resize(n, 3);
  model.dual_weights_.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) model.train_inputs_(i, c) = inputs.at(i).at(c).get<double>();
    for (int c = 0; c < 2; ++c) model.dual_weights_(i, c) = weights.at(i).at(c).get<double>();
  }
  // Rebuild the factor so the PSD invariant is checked on load as well.
  Eigen::MatrixXd gram(n, n);
  for (int i = 0; i < n; ++i) {
    gram(i, i) = model.kernel_.eval(0.0);
    for (int k = i + 1; k < n; ++k) {
      const double v =
          model.kernel_.eval((model.train_inputs_.row(i) - model.train_inputs_.row(k)).norm());
      gram(i, k) = v;
      gram(k, i) = v;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(
      gram + (model.noise_var_ + 1e-10) * Eigen::MatrixXd::Identity(n, n));
  if (llt.info() == Eigen::Success) model.chol_ = llt.matrixL();
  return model;
}

void GprSensorModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << to_json().dump(2) << "\n";
}

GprSensorModel GprSensorModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read model file: " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

}  // namespace whisker
