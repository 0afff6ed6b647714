#include "whisker/bhm.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "whisker/random.hpp"

namespace whisker {

Vec3 HingeGrid::point(int index) const {
  const int nx = counts[0], ny = counts[1];
  const int iz = index / (nx * ny);
  const int iy = (index - iz * nx * ny) / nx;
  const int ix = index - iz * nx * ny - iy * nx;
  return min_corner + spacing * Vec3(ix, iy, iz);
}

HingeGrid HingeGrid::cover(const Vec3& lo, const Vec3& hi, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("hinge spacing must be positive");
  HingeGrid g;
  g.spacing = spacing;
  g.min_corner = lo;
  for (int a = 0; a < 3; ++a) {
    g.counts[a] = std::max(1, static_cast<int>(std::ceil((hi[a] - lo[a]) / spacing)) + 1);
  }
  return g;
}

double MapKernel::eval(const Vec3& a, const Vec3& b) const {
  const Vec3 d = a - b;
  switch (kind) {
    case MapKernelKind::Rbf:
      return std::exp(-gamma * d.squaredNorm());
    case MapKernelKind::Ebf:
      return std::exp(-gamma * d.cwiseProduct(omega).squaredNorm());
  }
  throw std::logic_error("MapKernel::eval: unknown kind");
}

BhmModel::BhmModel(HingeGrid grid, MapKernel kernel, double prior_variance)
    : grid_(std::move(grid)), kernel_(kernel) {
  if (!(prior_variance > 0.0)) {
    throw std::invalid_argument("prior variance must be positive");
  }
  const int h = grid_.size() + 1;
  weight_mean_ = Eigen::VectorXd::Zero(h);
  weight_var_ = Eigen::VectorXd::Constant(h, prior_variance);
}

Eigen::VectorXd BhmModel::feature_vector(const Vec3& x_mm) const {
  if (!x_mm.allFinite()) throw std::invalid_argument("feature_vector: non-finite point");
  Eigen::VectorXd phi(grid_.size() + 1);
  phi[0] = 1.0;
  for (int i = 0; i < grid_.size(); ++i) {
    phi[i + 1] = kernel_.eval(x_mm, grid_.point(i));
  }
  return phi;
}

void BhmModel::update(const std::vector<Vec3>& occupied,
                      const std::vector<Vec3>& free_points) {
  const int n = static_cast<int>(occupied.size() + free_points.size());
  if (n == 0) return;
  const int h = grid_.size() + 1;

  Eigen::MatrixXd phi(n, h);
  Eigen::VectorXd y(n);
  int row = 0;
  for (const Vec3& p : occupied) {
    phi.row(row) = feature_vector(p).transpose();
    y[row++] = 1.0;
  }
  for (const Vec3& p : free_points) {
    phi.row(row) = feature_vector(p).transpose();
    y[row++] = 0.0;
  }
  const Eigen::MatrixXd phi_sq = phi.cwiseProduct(phi);

  const Eigen::VectorXd prior_mean = weight_mean_;
  const Eigen::VectorXd prior_prec = weight_var_.cwiseInverse();
  // Independent of xi; precomputed outside the bound iteration.
  const Eigen::VectorXd data_lin = phi.transpose() * (y.array() - 0.5).matrix();

  // Jaakkola-Jordan local bound with per-datum variational parameter xi,
  // iterated to convergence under the diagonal posterior approximation.
  Eigen::VectorXd mean = prior_mean;
  Eigen::VectorXd var = weight_var_;
  Eigen::VectorXd xi = Eigen::VectorXd::Ones(n);
  for (int iter = 0; iter < 100; ++iter) {
    Eigen::VectorXd lambda(n);
    for (int i = 0; i < n; ++i) {
      lambda[i] = xi[i] < 1e-8 ? 0.125 : std::tanh(0.5 * xi[i]) / (4.0 * xi[i]);
    }
    const Eigen::VectorXd prec =
        prior_prec + 2.0 * (phi_sq.transpose() * lambda);
    const Eigen::VectorXd new_var = prec.cwiseInverse();
    const Eigen::VectorXd new_mean =
        new_var.cwiseProduct(prior_prec.cwiseProduct(prior_mean) + data_lin);

    // xi^2 = E[(w^T phi)^2] under the diagonal posterior.
    const Eigen::VectorXd proj = phi * new_mean;
    const Eigen::VectorXd spread = phi_sq * new_var;
    xi = (proj.array().square() + spread.array()).sqrt();

    const double delta = (new_mean - mean).cwiseAbs().maxCoeff();
    mean = new_mean;
    var = new_var;
    if (delta < 1e-6 && iter > 0) break;
  }
  weight_mean_ = mean;
  weight_var_ = var;
}

double BhmModel::log_odds(const Vec3& x_mm) const {
  return weight_mean_.dot(feature_vector(x_mm));
}

double BhmModel::query(const Vec3& x_mm) const {
  return 1.0 / (1.0 + std::exp(-log_odds(x_mm)));
}

double BhmModel::query_moderated(const Vec3& x_mm) const {
  const Eigen::VectorXd phi = feature_vector(x_mm);
  const double a = weight_mean_.dot(phi);
  const double v = weight_var_.dot(phi.cwiseProduct(phi));
  const double kappa = 1.0 / std::sqrt(1.0 + M_PI * v / 8.0);
  return 1.0 / (1.0 + std::exp(-kappa * a));
}

nlohmann::json BhmModel::to_json() const {
  nlohmann::json j;
  j["grid"]["min_corner"] = {grid_.min_corner.x(), grid_.min_corner.y(),
                             grid_.min_corner.z()};
  j["grid"]["spacing"] = grid_.spacing;
  j["grid"]["counts"] = {grid_.counts[0], grid_.counts[1], grid_.counts[2]};
  j["kernel"]["kind"] = kernel_.kind == MapKernelKind::Ebf ? "ebf" : "rbf";
  j["kernel"]["gamma"] = kernel_.gamma;
  j["kernel"]["omega"] = {kernel_.omega.x(), kernel_.omega.y(), kernel_.omega.z()};
  j["weight_mean"] = std::vector<double>(weight_mean_.data(),
                                         weight_mean_.data() + weight_mean_.size());
  j["weight_variance"] = std::vector<double>(weight_var_.data(),
                                             weight_var_.data() + weight_var_.size());
  return j;
}

BhmModel BhmModel::from_json(const nlohmann::json& j) {
  HingeGrid grid;
  const auto& gj = j.at("grid");
  grid.min_corner = Vec3(gj.at("min_corner").at(0).get<double>(),
                         gj.at("min_corner").at(1).get<double>(),
                         gj.at("min_corner").at(2).get<double>());
  grid.spacing = gj.at("spacing").get<double>();
  for (int a = 0; a < 3; ++a) grid.counts[a] = gj.at("counts").at(a).get<int>();

  MapKernel kernel;
  kernel.kind = j.at("kernel").at("kind").get<std::string>() == "ebf"
                    ? MapKernelKind::Ebf
                    : MapKernelKind::Rbf;
  kernel.gamma = j.at("kernel").at("gamma").get<double>();
  kernel.omega = Vec3(j.at("kernel").at("omega").at(0).get<double>(),
                      j.at("kernel").at("omega").at(1).get<double>(),
                      j.at("kernel").at("omega").at(2).get<double>());

  BhmModel model(grid, kernel);
  const auto& wm = j.at("weight_mean");
  const auto& wv = j.at("weight_variance");
  if (static_cast<int>(wm.size()) != model.grid_.size() + 1) {
    throw std::invalid_argument("BhmModel::from_json: weight size mismatch");
  }
  for (int i = 0; i < model.weight_mean_.size(); ++i) {
    model.weight_mean_[i] = wm.at(i).get<double>();
    model.weight_var_[i] = wv.at(i).get<double>();
  }
  return model;
}

std::pair<int, Vec3> prior_from_map(const BhmModel& map,
                                    const std::vector<Vec3>& query_points_mm) {
  if (query_points_mm.size() < 2) {
    throw std::invalid_argument("prior_from_map: need at least 2 query points");
  }
  int best = 0;
  double best_a = map.log_odds(query_points_mm[0]);
  for (size_t i = 1; i < query_points_mm.size(); ++i) {
    const double a = map.log_odds(query_points_mm[i]);
    if (a > best_a) {
      best_a = a;
      best = static_cast<int>(i);
    }
  }
  return {best, query_points_mm[best]};
}

std::vector<Vec3> sample_free_points(const Vec3& box_min_mm, const Vec3& box_max_mm,
                                     int n, uint64_t seed) {
  if ((box_max_mm - box_min_mm).minCoeff() < 0.0) {
    throw std::invalid_argument("sample_free_points: inverted box");
  }
  Rng rng(derive_seed(seed, "free-points"));
  std::vector<Vec3> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    pts.emplace_back(rng.uniform(box_min_mm.x(), box_max_mm.x()),
                     rng.uniform(box_min_mm.y(), box_max_mm.y()),
                     rng.uniform(box_min_mm.z(), box_max_mm.z()));
  }
  return pts;
}

std::vector<Voxel> voxelize(const BhmModel& map, const Vec3& lo_mm,
                            const Vec3& hi_mm, double resolution_mm,
                            double threshold) {
  if (!(resolution_mm > 0.0)) {
    throw std::invalid_argument("voxelize: resolution must be positive");
  }
  std::vector<Voxel> out;
  for (double z = lo_mm.z() + 0.5 * resolution_mm; z < hi_mm.z(); z += resolution_mm) {
    for (double y = lo_mm.y() + 0.5 * resolution_mm; y < hi_mm.y(); y += resolution_mm) {
      for (double x = lo_mm.x() + 0.5 * resolution_mm; x < hi_mm.x(); x += resolution_mm) {
        const Vec3 c(x, y, z);
        const double p = map.query(c);
        if (p >= threshold) out.push_back({c, p});
      }
    }
  }
  return out;
}

}  // namespace whisker
