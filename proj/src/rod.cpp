#include "whisker/rod.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "whisker/random.hpp"

namespace whisker {

Vec3 WhiskerRod::rest_point_at_arc(double s) const {
  const double l = segment_length();
  const double u = std::clamp(s, 0.0, length) / l;
  const int i = std::min(static_cast<int>(u), n_segments() - 1);
  const double f = u - i;
  return rest_nodes[i] + f * (rest_nodes[i + 1] - rest_nodes[i]);
}

WhiskerRod build_whisker(WhiskerShape kind, double length, int n_segments,
                         const RodParams& params) {
  if (length <= 0.0 || params.bending_stiffness <= 0.0 ||
      params.base_rotational_stiffness <= 0.0) {
    throw std::invalid_argument("build_whisker: dimensions must be positive");
  }
  if (n_segments < 20) {
    throw std::invalid_argument("build_whisker: need at least 20 segments");
  }

  WhiskerRod rod;
  rod.length = length;
  rod.bending_stiffness = params.bending_stiffness;
  rod.base_rotational_stiffness = params.base_rotational_stiffness;
  rod.shape_kind = kind;
  rod.rest_nodes.reserve(n_segments + 1);

  double straight_len = length;
  double arc_len = 0.0;
  double arc_angle = params.arc_angle;
  switch (kind) {
    case WhiskerShape::Straight:
      break;
    case WhiskerShape::Curved:
      straight_len = 0.0;
      arc_len = length;
      break;
    case WhiskerShape::SemiCurved:
      straight_len = params.straight_fraction * length;
      arc_len = length - straight_len;
      break;
  }
  if (arc_len <= 0.0 || arc_angle < 1e-9) {
    straight_len = length;
    arc_len = 0.0;
  }

  // Arc center sits at (rho, 0, straight_len); tangent continuous with the
  // straight section along +z, curving toward +x.
  const double rho = arc_len > 0.0 ? arc_len / arc_angle : 0.0;
  for (int i = 0; i <= n_segments; ++i) {
    const double s = length * i / n_segments;
    if (s <= straight_len + 1e-15 || arc_len <= 0.0) {
      rod.rest_nodes.emplace_back(0.0, 0.0, std::min(s, straight_len));
      if (s > straight_len) rod.rest_nodes.back().z() = s;  // arc_len == 0
    } else {
      const double a = (s - straight_len) / rho;
      rod.rest_nodes.emplace_back(rho * (1.0 - std::cos(a)), 0.0,
                                  straight_len + rho * std::sin(a));
    }
  }
  return rod;
}

bool detect_contact(const MomentReading& reading, double threshold) {
  if (!(threshold > 0.0)) {
    throw std::invalid_argument("detect_contact: threshold must be positive");
  }
  return reading.m.norm() > threshold;
}

namespace {

Vec3 quat_log(const Eigen::Quaterniond& q_in) {
  Eigen::Quaterniond q = q_in;
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  const double vn = q.vec().norm();
  if (vn < 1e-12) return 2.0 * q.vec();
  const double angle = 2.0 * std::atan2(vn, q.w());
  return (angle / vn) * q.vec();
}

Eigen::Quaterniond quat_exp(const Vec3& r) {
  const double theta = r.norm();
  if (theta < 1e-12) {
    Eigen::Quaterniond q(1.0, 0.5 * r.x(), 0.5 * r.y(), 0.5 * r.z());
    q.normalize();
    return q;
  }
  const double half = 0.5 * theta;
  const Vec3 axis = r / theta;
  const double s = std::sin(half);
  return Eigen::Quaterniond(std::cos(half), s * axis.x(), s * axis.y(),
                            s * axis.z());
}

struct ChainEval {
  double energy = 0.0;
  std::vector<Mat3> frames;        // cumulative W_j per segment
  std::vector<Vec3> nodes;         // N+1 nodes in {B}
  std::vector<Vec3> spring_log;    // log(R_j) per joint
  std::vector<double> penetration; // per node, >= 0
  std::vector<Vec3> normals_s;     // contact normal in {S} per node
  std::vector<Vec3> grad;          // dE/d(spatial rotation at joint j)
  std::vector<double> precond;     // diagonal curvature estimate per joint
  double max_penetration = 0.0;
};

}  // namespace

RodSolver::RodSolver(WhiskerRod rod, SolveOptions opts)
    : rod_(std::move(rod)), opts_(opts) {
  const int n = rod_.n_segments();
  if (n < 1) throw std::invalid_argument("RodSolver: rod has no segments");
  const double l = rod_.segment_length();
  rest_dirs_.reserve(n);
  for (int i = 0; i < n; ++i) {
    rest_dirs_.push_back((rod_.rest_nodes[i + 1] - rod_.rest_nodes[i]) / l);
  }
  joints_.assign(n, Eigen::Quaterniond::Identity());
}

void RodSolver::reset() {
  joints_.assign(rod_.n_segments(), Eigen::Quaterniond::Identity());
}

namespace {

void evaluate(const WhiskerRod& rod, const std::vector<Vec3>& rest_dirs,
              const std::vector<Eigen::Quaterniond>& joints, const Pose& base,
              const Scene& scene, double contact_stiffness, ChainEval& out) {
  const int n = rod.n_segments();
  const double l = rod.segment_length();
  const double k_bend = rod.bending_stiffness / l;

  out.frames.resize(n);
  out.nodes.resize(n + 1);
  out.spring_log.resize(n);
  out.penetration.assign(n + 1, 0.0);
  out.normals_s.assign(n + 1, Vec3::Zero());
  out.grad.assign(n, Vec3::Zero());
  out.precond.assign(n, 0.0);
  out.energy = 0.0;
  out.max_penetration = 0.0;

  // Forward pass: frames, nodes, spring energy.
  Mat3 w = Mat3::Identity();
  out.nodes[0].setZero();
  for (int j = 0; j < n; ++j) {
    w = w * joints[j].toRotationMatrix();
    out.frames[j] = w;
    out.nodes[j + 1] = out.nodes[j] + l * (w * rest_dirs[j]);
    const Vec3 r = quat_log(joints[j]);
    out.spring_log[j] = r;
    const double k = j == 0 ? rod.base_rotational_stiffness : k_bend;
    out.energy += 0.5 * k * r.squaredNorm();
  }

  // Contact penalty, node forces pulled back into {B}.
  std::vector<Vec3> node_grad(n + 1, Vec3::Zero());
  bool any_contact = false;
  if (!scene.shapes.empty()) {
    for (int k = 1; k <= n; ++k) {
      const Vec3 p_s = base * out.nodes[k];
      const SdfResult sdf = sdf_eval(scene, p_s);
      if (sdf.distance < 0.0) {
        any_contact = true;
        const double pen = -sdf.distance;
        out.penetration[k] = pen;
        out.max_penetration = std::max(out.max_penetration, pen);
        out.normals_s[k] = sdf.normal;
        out.energy += 0.5 * contact_stiffness * pen * pen;
        // dE/dp in {B}; distance gradient is the outward normal.
        node_grad[k] =
            contact_stiffness * sdf.distance * (base.R.transpose() * sdf.normal);
      }
    }
  }

  // Reverse pass: gradient w.r.t. a spatial rotation at each joint. Rotating
  // joint j moves nodes k > j rigidly about node j, and changes only spring j.
  Vec3 sum_q = Vec3::Zero();
  Vec3 sum_pxq = Vec3::Zero();
  double sum_p2 = 0.0;
  Vec3 sum_p = Vec3::Zero();
  int n_active = 0;
  for (int j = n - 1; j >= 0; --j) {
    const int k = j + 1;
    if (any_contact && out.penetration[k] > 0.0) {
      sum_q += node_grad[k];
      sum_pxq += out.nodes[k].cross(node_grad[k]);
      sum_p2 += out.nodes[k].squaredNorm();
      sum_p += out.nodes[k];
      ++n_active;
    }
    const double kj = j == 0 ? rod.base_rotational_stiffness : k_bend;
    const Mat3& w_prev = j == 0 ? Mat3::Identity().eval() : out.frames[j - 1];
    out.grad[j] = kj * (w_prev * out.spring_log[j]) + sum_pxq -
                  out.nodes[j].cross(sum_q);
    const double lever2 = sum_p2 - 2.0 * out.nodes[j].dot(sum_p) +
                          n_active * out.nodes[j].squaredNorm();
    out.precond[j] = kj + contact_stiffness * std::max(lever2, 0.0);
  }
}

double grad_inf_norm(const ChainEval& e) {
  double g = 0.0;
  for (const Vec3& v : e.grad) g = std::max(g, v.cwiseAbs().maxCoeff());
  return g;
}

}  // namespace

namespace {

// L-BFGS two-loop recursion over flattened joint-tangent coordinates.
// History pairs live in slowly drifting tangent frames; with the per-step
// rotation cap the drift is small enough that no transport is needed.
class LbfgsHistory {
 public:
  explicit LbfgsHistory(int memory) : memory_(memory) {}

  void clear() { pairs_.clear(); }

  void push(Eigen::VectorXd s, Eigen::VectorXd y) {
    const double sy = s.dot(y);
    if (sy <= 1e-14 * s.norm() * y.norm()) return;  // curvature guard
    pairs_.push_back({std::move(s), std::move(y), sy});
    if (static_cast<int>(pairs_.size()) > memory_) pairs_.erase(pairs_.begin());
  }

  Eigen::VectorXd direction(const Eigen::VectorXd& grad) const {
    Eigen::VectorXd q = -grad;
    if (pairs_.empty()) return q;
    std::vector<double> alpha(pairs_.size());
    for (int i = static_cast<int>(pairs_.size()) - 1; i >= 0; --i) {
      alpha[i] = pairs_[i].s.dot(q) / pairs_[i].sy;
      q -= alpha[i] * pairs_[i].y;
    }
    const auto& last = pairs_.back();
    q *= last.sy / last.y.squaredNorm();
    for (size_t i = 0; i < pairs_.size(); ++i) {
      const double beta = pairs_[i].y.dot(q) / pairs_[i].sy;
      q += (alpha[i] - beta) * pairs_[i].s;
    }
    return q;
  }

 private:
  struct Pair {
    Eigen::VectorXd s, y;
    double sy;
  };
  int memory_;
  std::vector<Pair> pairs_;
};

Eigen::VectorXd flatten_grad(const ChainEval& e) {
  Eigen::VectorXd g(3 * e.grad.size());
  for (size_t j = 0; j < e.grad.size(); ++j) g.segment<3>(3 * j) = e.grad[j];
  return g;
}

}  // namespace

RodSolver::Result RodSolver::solve(const Pose& base, const Scene& scene) {
  const int n = rod_.n_segments();
  double kc = opts_.contact_stiffness;

  ChainEval cur;
  evaluate(rod_, rest_dirs_, joints_, base, scene, kc, cur);
  Eigen::VectorXd grad = flatten_grad(cur);

  LbfgsHistory history(16);
  int total_iters = 0;
  std::vector<double> energy_trace{cur.energy};

  while (true) {
    bool stage_converged = false;
    history.clear();
    while (total_iters < opts_.max_iterations) {
      if (grad.cwiseAbs().maxCoeff() < opts_.grad_tol) {
        stage_converged = true;
        break;
      }

      Eigen::VectorXd dir = history.direction(grad);
      double descent = -dir.dot(grad);
      if (descent <= 0.0) {  // fall back to preconditioned steepest descent
        dir.resize(3 * n);
        for (int j = 0; j < n; ++j) {
          dir.segment<3>(3 * j) = -cur.grad[j] / cur.precond[j];
        }
        descent = -dir.dot(grad);
        history.clear();
      }

      // Keep per-joint rotations below 0.2 rad so the chain cannot tunnel
      // through obstacles in one step.
      double max_d = 0.0;
      for (int j = 0; j < n; ++j) {
        max_d = std::max(max_d, dir.segment<3>(3 * j).norm());
      }
      const double a0 = std::min(1.0, 0.2 / std::max(max_d, 1e-12));

      double a = a0;
      bool accepted = false;
      ChainEval trial;
      std::vector<Eigen::Quaterniond> joints_try(n);
      for (int bt = 0; bt < 60; ++bt) {
        for (int j = 0; j < n; ++j) {
          const Mat3& w_prev =
              j == 0 ? Mat3::Identity().eval() : cur.frames[j - 1];
          const Vec3 delta_body =
              w_prev.transpose() * (a * dir.segment<3>(3 * j));
          joints_try[j] = (quat_exp(delta_body) * joints_[j]).normalized();
        }
        evaluate(rod_, rest_dirs_, joints_try, base, scene, kc, trial);
        if (trial.energy <= cur.energy - 1e-4 * a * descent) {
          accepted = true;
          break;
        }
        a *= 0.5;
      }
      if (!accepted) break;  // at the numerical floor for this stage

      Eigen::VectorXd new_grad = flatten_grad(trial);
      history.push(a * dir, new_grad - grad);
      grad = std::move(new_grad);
      joints_ = joints_try;
      cur = std::move(trial);
      energy_trace.push_back(cur.energy);
      ++total_iters;
    }

    const double residual = grad_inf_norm(cur);
    if (!stage_converged && residual > 1e3 * opts_.grad_tol) {
      std::ostringstream msg;
      msg << "rod solver did not converge (residual " << residual << " N m after "
          << total_iters << " iterations, contact stiffness " << kc << ")";
      throw SolverError(msg.str(), residual);
    }
    if (cur.max_penetration <= opts_.penetration_tol) break;
    if (kc >= opts_.contact_stiffness_max) {
      std::ostringstream msg;
      msg << "rod solver could not resolve penetration " << cur.max_penetration
          << " m at maximum contact stiffness";
      throw SolverError(msg.str(), cur.max_penetration);
    }
    kc *= 10.0;
    evaluate(rod_, rest_dirs_, joints_, base, scene, kc, cur);
    grad = flatten_grad(cur);
    energy_trace.assign(1, cur.energy);
  }

  bool in_contact = cur.max_penetration > 0.0;

  // Without contact the unique minimum is the rest shape; snap to it exactly
  // (when collision-free) so no-contact readings are exactly zero.
  if (!in_contact) {
    std::vector<Eigen::Quaterniond> rest(n, Eigen::Quaterniond::Identity());
    ChainEval rest_eval;
    evaluate(rod_, rest_dirs_, rest, base, scene, kc, rest_eval);
    if (rest_eval.max_penetration <= 0.0) {
      joints_ = std::move(rest);
      cur = std::move(rest_eval);
      energy_trace.push_back(cur.energy);
    }
  }

  Result result;
  result.nodes_b = cur.nodes;
  result.iterations = total_iters;
  result.residual = grad_inf_norm(cur);
  result.energy = cur.energy;
  result.energy_trace = std::move(energy_trace);

  const Vec3 base_torque =
      rod_.base_rotational_stiffness * cur.spring_log[0];
  result.moment.m = Vec2(base_torque.x(), base_torque.y());

  if (in_contact) {
    // Contiguity check: more than one disjoint contact region violates the
    // single-contact assumption.
    int regions = 0;
    int gap = 1000;
    for (int k = 1; k <= n; ++k) {
      if (cur.penetration[k] > 0.0) {
        if (gap > 2) ++regions;
        gap = 0;
      } else {
        ++gap;
      }
    }
    if (regions > 1) {
      throw MultiContactError(
          "multiple disjoint contact regions detected along the whisker");
    }

    int k_star = 1;
    for (int k = 2; k <= n; ++k) {
      if (cur.penetration[k] > cur.penetration[k_star]) k_star = k;
    }
    // Parabolic refinement of the deepest point along the node index.
    double delta = 0.0;
    if (k_star > 1 && k_star < n) {
      const double f0 = -cur.penetration[k_star - 1];
      const double f1 = -cur.penetration[k_star];
      const double f2 = -cur.penetration[k_star + 1];
      const double denom = f0 - 2.0 * f1 + f2;
      if (std::abs(denom) > 1e-18) {
        delta = std::clamp(0.5 * (f0 - f2) / denom, -0.5, 0.5);
      }
    }
    const double l = rod_.segment_length();
    const double idx = k_star + delta;
    const int i0 = std::clamp(static_cast<int>(std::floor(idx)), 0, n - 1);
    const double f = idx - i0;
    result.contact.point_b =
        cur.nodes[i0] + f * (cur.nodes[i0 + 1] - cur.nodes[i0]);
    result.contact.point_s = base * result.contact.point_b;
    result.contact.arc_coord = idx * l;
    result.contact.in_contact = true;
    Vec3 force = Vec3::Zero();
    for (int k = 1; k <= n; ++k) {
      if (cur.penetration[k] > 0.0) {
        force += kc * cur.penetration[k] * cur.normals_s[k];
      }
    }
    result.contact.force = force;
  }
  return result;
}

RodSolver::Result solve_quasi_static(const WhiskerRod& rod, const Pose& base,
                                     const Scene& scene,
                                     const SolveOptions& opts) {
  RodSolver solver(rod, opts);
  return solver.solve(base, scene);
}

std::vector<SweepRecord> sweep_trajectory(const WhiskerRod& rod,
                                          const std::vector<Pose>& poses,
                                          const Scene& scene,
                                          double noise_sigma, uint64_t seed,
                                          double rate_hz,
                                          const SolveOptions& opts) {
  if (poses.size() < 2) {
    throw std::invalid_argument("sweep_trajectory: need at least 2 poses");
  }
  RodSolver solver(rod, opts);
  Rng rng(derive_seed(seed, "sweep-noise"));
  std::vector<SweepRecord> records;
  records.reserve(poses.size());
  for (size_t i = 0; i < poses.size(); ++i) {
    RodSolver::Result res;
    try {
      res = solver.solve(poses[i], scene);
    } catch (const MultiContactError& e) {
      throw MultiContactError("step " + std::to_string(i) + ": " + e.what());
    } catch (const SolverError& e) {
      throw SolverError("step " + std::to_string(i) + ": " + e.what(),
                        e.residual());
    }
    SweepRecord rec;
    rec.t = static_cast<double>(i) / rate_hz;
    rec.base = poses[i];
    rec.moment_clean = res.moment;
    rec.moment.m = res.moment.m +
                   noise_sigma * Vec2(rng.gaussian(), rng.gaussian());
    rec.truth = res.contact;
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace whisker
