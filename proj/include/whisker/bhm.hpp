#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "whisker/geometry.hpp"

namespace whisker {

/// Regular lattice of kernel centers fixed in the world [mm].
struct HingeGrid {
  Vec3 min_corner = Vec3::Zero();
  double spacing = 10.0;
  std::array<int, 3> counts = {1, 1, 1};

  int size() const { return counts[0] * counts[1] * counts[2]; }
  Vec3 point(int index) const;
  /// Smallest grid at the given spacing whose hinge points cover the box.
  static HingeGrid cover(const Vec3& lo, const Vec3& hi, double spacing);
};

enum class MapKernelKind { Rbf, Ebf };

/// RBF: exp(-gamma |x - h|^2).  EBF: exp(-gamma |omega .* (x - h)|^2) with
/// per-axis inverse length-scales omega; omega = (1,1,1) recovers the RBF.
struct MapKernel {
  MapKernelKind kind = MapKernelKind::Ebf;
  double gamma = 0.01;  // [1/mm^2]
  Vec3 omega = Vec3(1.0, 1.0, 0.2);

  double eval(const Vec3& a, const Vec3& b) const;
};

/// Bayesian Hilbert Map: variational logistic regression with a diagonal
/// Gaussian posterior over the weights of (1, k(x, h_1), ..., k(x, h_H)).
/// Updates are sequential: each posterior becomes the next prior.
class BhmModel {
 public:
  BhmModel(HingeGrid grid, MapKernel kernel, double prior_variance = 10.0);

  Eigen::VectorXd feature_vector(const Vec3& x_mm) const;

  /// One variational update from labeled points (occupied y=1, free y=0).
  /// No-op when both lists are empty.
  void update(const std::vector<Vec3>& occupied, const std::vector<Vec3>& free_points);

  /// Occupancy probability from the mean weights.
  double query(const Vec3& x_mm) const;
  /// Linear activation (log-odds) under the mean weights; monotone in
  /// query(), safe from sigmoid saturation when ranking points.
  double log_odds(const Vec3& x_mm) const;
  /// Variance-aware (moderated) sigmoid variant.
  double query_moderated(const Vec3& x_mm) const;

  const HingeGrid& grid() const { return grid_; }
  const MapKernel& kernel() const { return kernel_; }
  const Eigen::VectorXd& weight_mean() const { return weight_mean_; }
  const Eigen::VectorXd& weight_variance() const { return weight_var_; }

  nlohmann::json to_json() const;
  static BhmModel from_json(const nlohmann::json& j);

 private:
  HingeGrid grid_;
  MapKernel kernel_;
  Eigen::VectorXd weight_mean_;  // H+1, bias first
  Eigen::VectorXd weight_var_;
};

/// Index and location of the query point most likely to be occupied;
/// exact ties resolve to the smallest index (closest to the whisker base).
std::pair<int, Vec3> prior_from_map(const BhmModel& map,
                                    const std::vector<Vec3>& query_points_mm);

/// Uniform samples inside an axis-aligned box, deterministic under seed.
std::vector<Vec3> sample_free_points(const Vec3& box_min_mm, const Vec3& box_max_mm,
                                     int n, uint64_t seed);

struct Voxel {
  Vec3 center = Vec3::Zero();
  double probability = 0.0;
};

/// Centers of grid cells whose queried occupancy reaches the threshold.
std::vector<Voxel> voxelize(const BhmModel& map, const Vec3& lo_mm,
                            const Vec3& hi_mm, double resolution_mm,
                            double threshold);

}  // namespace whisker
