#include "whisker/harness.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "whisker/csv.hpp"

namespace whisker {

namespace {

bool verbose_logging() {
  const char* env = std::getenv("WHISKER_LOG");
  return env != nullptr && std::string(env) != "0" && std::string(env) != "";
}

void log_info(const std::string& msg) {
  if (verbose_logging()) std::cerr << "[whisker] " << msg << "\n";
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace

EvalResult eval_trace_error(const std::vector<Vec3>& world_points_mm,
                            const Scene& scene, double whisker_length_m) {
  if (world_points_mm.empty()) {
    throw std::invalid_argument("eval_trace_error: no estimates");
  }
  EvalResult r;
  r.per_point_mm.reserve(world_points_mm.size());
  double sum = 0.0, sum2 = 0.0;
  for (const Vec3& p_mm : world_points_mm) {
    const double d_mm = nearest_surface_distance(scene, p_mm * 1e-3) * 1e3;
    r.per_point_mm.push_back(d_mm);
    sum += d_mm;
    sum2 += d_mm * d_mm;
  }
  const double n = static_cast<double>(r.per_point_mm.size());
  r.mean_mm = sum / n;
  r.rms_mm = std::sqrt(sum2 / n);
  double dev2 = 0.0;
  for (const double d : r.per_point_mm) dev2 += (d - r.mean_mm) * (d - r.mean_mm);
  r.sd_mm = std::sqrt(dev2 / n);
  r.normalized = r.mean_mm / (whisker_length_m * 1e3);
  return r;
}

std::vector<SweepRecord> scan_records(const Scenario& s, const RunOverrides& o) {
  const WhiskerRod rod = s.whisker.build();
  const uint64_t seed = o.seed.value_or(s.seed);
  const double sigma_nm = s.noise_sigma_counts / s.whisker.counts_per_nm;
  return sweep_trajectory(rod, s.trajectory.poses(s.rate_hz), s.scene, sigma_nm,
                          seed, s.rate_hz);
}

std::vector<TraceInput> trace_inputs_from_records(
    const std::vector<SweepRecord>& records, double counts_per_nm) {
  std::vector<TraceInput> inputs;
  inputs.reserve(records.size());
  for (const SweepRecord& r : records) {
    inputs.push_back({r.t, r.base, r.moment.m * counts_per_nm});
  }
  return inputs;
}

std::vector<Vec3> whisker_query_points(const WhiskerRod& rod, const Pose& base, int n) {
  std::vector<Vec3> points;
  points.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double arc = rod.length * i / (n - 1);
    points.push_back((base * rod.rest_point_at_arc(arc)) * 1e3);
  }
  return points;
}

PriorProvider make_prior_provider(const Scenario& s, const WhiskerRod& rod,
                                  const std::string& out_dir) {
  switch (s.filter.prior.type) {
    case PriorSpecConfig::Type::Default:
      return default_prior(rod);
    case PriorSpecConfig::Type::Point: {
      const PriorSpecConfig cfg = s.filter.prior;
      return [cfg](const Pose&) {
        PriorSpec p;
        p.mean_mm = cfg.point_mm;
        p.cov_mm2 = cfg.sigma_mm * cfg.sigma_mm * Mat3::Identity();
        return p;
      };
    }
    case PriorSpecConfig::Type::Map: {
      std::string path = s.filter.prior.map_path;
      if (path.empty()) path = join(out_dir, "map.json");
      std::ifstream in(path);
      if (!in) throw std::runtime_error("prior map not found: " + path);
      nlohmann::json j;
      in >> j;
      auto map = std::make_shared<BhmModel>(BhmModel::from_json(j.at("model")));
      const double sigma = s.filter.prior.sigma_mm;
      return [map, rod, sigma](const Pose& base) {
        const auto points = whisker_query_points(rod, base, 40);
        const auto [index, world_mm] = prior_from_map(*map, points);
        (void)index;
        PriorSpec p;
        // The filter state lives in {B}.
        p.mean_mm = (base.inverse() * (world_mm * 1e-3)) * 1e3;
        p.cov_mm2 = sigma * sigma * Mat3::Identity();
        return p;
      };
    }
  }
  throw std::logic_error("make_prior_provider: unknown prior type");
}

void write_calibration_csv(const std::string& path, const CalibrationDataset& data) {
  CsvWriter csv(path, {"x_mm", "y_mm", "z_mm", "m_x_counts", "m_y_counts"});
  for (int i = 0; i < data.size(); ++i) {
    csv.write_row({data.inputs(i, 0), data.inputs(i, 1), data.inputs(i, 2),
                   data.targets(i, 0), data.targets(i, 1)});
  }
}

CalibrationDataset read_calibration_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  CalibrationDataset data;
  const int n = static_cast<int>(table.rows.size());
  data.inputs.resize(n, 3);
  data.targets.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) data.inputs(i, c) = table.rows[i][c];
    for (int c = 0; c < 2; ++c) data.targets(i, c) = table.rows[i][3 + c];
  }
  return data;
}

void write_scan_csv(const std::string& path, const std::vector<SweepRecord>& records,
                    double counts_per_nm) {
  CsvWriter csv(path, {"t", "px_mm", "py_mm", "pz_mm", "qw", "qx", "qy", "qz",
                       "m_x_counts", "m_y_counts", "contact", "truth_x_mm",
                       "truth_y_mm", "truth_z_mm"});
  for (const SweepRecord& r : records) {
    const Eigen::Quaterniond q = r.base.quaternion();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    csv.write_row({r.t, r.base.t.x() * 1e3, r.base.t.y() * 1e3, r.base.t.z() * 1e3,
                   q.w(), q.x(), q.y(), q.z(),
                   r.moment.m.x() * counts_per_nm, r.moment.m.y() * counts_per_nm,
                   r.truth.in_contact ? 1.0 : 0.0,
                   r.truth.in_contact ? r.truth.point_s.x() * 1e3 : nan,
                   r.truth.in_contact ? r.truth.point_s.y() * 1e3 : nan,
                   r.truth.in_contact ? r.truth.point_s.z() * 1e3 : nan});
  }
}

std::vector<SweepRecord> read_scan_csv(const std::string& path, double counts_per_nm) {
  const CsvTable table = read_csv(path);
  std::vector<SweepRecord> records;
  records.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    SweepRecord r;
    r.t = row[0];
    r.base = Pose::from_quaternion(Vec3(row[1], row[2], row[3]) * 1e-3, row[4],
                                   row[5], row[6], row[7]);
    r.moment.m = Vec2(row[8], row[9]) / counts_per_nm;
    r.moment_clean = r.moment;
    r.truth.in_contact = row[10] != 0.0;
    if (r.truth.in_contact) {
      r.truth.point_s = Vec3(row[11], row[12], row[13]) * 1e-3;
      r.truth.point_b = r.base.inverse() * r.truth.point_s;
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_trace_csv(const std::string& path, const TrackResult& result) {
  CsvWriter csv(path, {"t", "segment", "mean_x_mm", "mean_y_mm", "mean_z_mm",
                       "cov_xx_mm2", "cov_yy_mm2", "cov_zz_mm2", "world_x_mm",
                       "world_y_mm", "world_z_mm", "innovation_counts"});
  for (const TrackStep& s : result.steps) {
    csv.write_row({s.t, static_cast<double>(s.segment), s.belief.mean.x(),
                   s.belief.mean.y(), s.belief.mean.z(), s.belief.cov(0, 0),
                   s.belief.cov(1, 1), s.belief.cov(2, 2), s.world_mm.x(),
                   s.world_mm.y(), s.world_mm.z(), s.innovation_norm});
  }
}

void run_calibrate(const Scenario& s, const std::string& out_dir, const RunOverrides& o) {
  const WhiskerRod rod = s.whisker.build();
  CalibrationSweep sweep = s.calibration;
  sweep.counts_per_newton_meter = s.whisker.counts_per_nm;
  const CalibrationDataset data = generate_calibration(rod, sweep, o.seed.value_or(s.seed));
  log_info("calibration dataset: " + std::to_string(data.size()) + " samples");
  write_calibration_csv(join(out_dir, "calibration.csv"), data);

  const bool want_tp = !o.kernel || *o.kernel == SensorKernelKind::ThinPlate;
  const bool want_se = !o.kernel || *o.kernel == SensorKernelKind::SquaredExponential;
  if (want_tp) {
    SensorKernel k;
    k.kind = SensorKernelKind::ThinPlate;
    GprSensorModel::fit(data, k, s.filter.measurement_noise).save(join(out_dir, "model_tp.json"));
  }
  if (want_se) {
    SensorKernel k;
    k.kind = SensorKernelKind::SquaredExponential;
    GprSensorModel::fit(data, k, s.filter.measurement_noise).save(join(out_dir, "model_se.json"));
  }
}

void run_scan(const Scenario& s, const std::string& out_dir, const RunOverrides& o) {
  const auto records = scan_records(s, o);
  write_scan_csv(join(out_dir, "scan.csv"), records, s.whisker.counts_per_nm);
  log_info("scan: " + std::to_string(records.size()) + " records");
}

void run_track(const Scenario& s, const std::string& out_dir, const RunOverrides& o) {
  const WhiskerRod rod = s.whisker.build();
  const auto records = read_scan_csv(join(out_dir, "scan.csv"), s.whisker.counts_per_nm);
  const auto inputs = trace_inputs_from_records(records, s.whisker.counts_per_nm);

  const SensorKernelKind kernel = o.kernel.value_or(SensorKernelKind::ThinPlate);
  const std::string model_file =
      kernel == SensorKernelKind::ThinPlate ? "model_tp.json" : "model_se.json";
  const GprSensorModel model = GprSensorModel::load(join(out_dir, model_file));

  FilterSpec fspec = s.filter;
  if (o.filter) fspec.kind = *o.filter;
  const FilterConfig config = fspec.config();
  const PriorProvider prior = make_prior_provider(s, rod, out_dir);

  TrackResult result;
  if (o.baseline) {
    result = track_baseline(inputs, model, prior, s.contact_threshold_counts, rod);
  } else {
    result = track_trace(inputs, model, config, prior, s.contact_threshold_counts,
                         o.seed.value_or(s.seed));
  }
  write_trace_csv(join(out_dir, "trace.csv"), result);
  log_info("track: " + std::to_string(result.segments) + " segments, " +
           std::to_string(result.steps.size()) + " steps");
}

void run_map(const Scenario& s, const std::string& out_dir, const RunOverrides& o) {
  const CsvTable trace = read_csv(join(out_dir, "trace.csv"));
  MapSpec spec = s.map;
  if (o.map_kernel) spec.kernel = *o.map_kernel;

  const HingeGrid grid = HingeGrid::cover(spec.bounds_lo_mm, spec.bounds_hi_mm,
                                          spec.spacing_mm);
  BhmModel model(grid, spec.map_kernel(), spec.prior_variance);

  std::vector<Vec3> occupied;
  for (const auto& row : trace.rows) {
    const double cov_trace = row[5] + row[6] + row[7];
    if (cov_trace > spec.covariance_gate_mm2) continue;
    occupied.emplace_back(row[8], row[9], row[10]);
  }
  const std::vector<Vec3> free_points = sample_free_points(
      spec.free_box_lo_mm, spec.free_box_hi_mm, spec.free_points,
      o.seed.value_or(s.seed));
  model.update(occupied, free_points);
  log_info("map: " + std::to_string(occupied.size()) + " occupied, " +
           std::to_string(free_points.size()) + " free points");

  const auto voxels = voxelize(model, spec.bounds_lo_mm, spec.bounds_hi_mm,
                               spec.voxel_resolution_mm, spec.voxel_threshold);
  CsvWriter csv(join(out_dir, "voxels.csv"), {"x_mm", "y_mm", "z_mm", "probability"});
  for (const Voxel& v : voxels) {
    csv.write_row({v.center.x(), v.center.y(), v.center.z(), v.probability});
  }

  nlohmann::json j;
  j["bounds_lo_mm"] = {spec.bounds_lo_mm.x(), spec.bounds_lo_mm.y(), spec.bounds_lo_mm.z()};
  j["bounds_hi_mm"] = {spec.bounds_hi_mm.x(), spec.bounds_hi_mm.y(), spec.bounds_hi_mm.z()};
  j["resolution_mm"] = spec.voxel_resolution_mm;
  j["threshold"] = spec.voxel_threshold;
  j["voxel_count"] = voxels.size();
  j["model"] = model.to_json();
  std::ofstream out(join(out_dir, "map.json"));
  out << j.dump(2) << "\n";
}

void run_avoid(const Scenario& s, const std::string& out_dir, const RunOverrides&) {
  const WhiskerRod rod = s.whisker.build();
  const auto mounts = default_mount_array(
      rod, s.controller.mounts_azimuth, s.controller.mounts_rings,
      s.controller.mount_ring_radius, s.controller.mount_ring_spacing,
      s.controller.mount_forward_tilt);
  AvoidanceOptions options = s.controller.options;
  options.rate_hz = s.rate_hz;
  options.counts_per_newton_meter = s.whisker.counts_per_nm;
  const AvoidanceMetrics metrics = run_avoidance_scenario(
      s.scene, s.controller.command, mounts, s.controller.gains, options);

  CsvWriter csv(join(out_dir, "avoid_log.csv"),
                {"t", "x_mm", "y_mm", "z_mm", "goal_x_mm", "goal_y_mm", "goal_z_mm",
                 "max_deflection_counts", "clearance_mm"});
  for (const auto& l : metrics.log) {
    csv.write_row({l.t, l.position.x() * 1e3, l.position.y() * 1e3,
                   l.position.z() * 1e3, l.goal.x() * 1e3, l.goal.y() * 1e3,
                   l.goal.z() * 1e3, l.max_deflection_counts, l.clearance * 1e3});
  }
  nlohmann::json j;
  j["min_clearance_mm"] = metrics.min_clearance * 1e3;
  j["max_deflection_counts"] = metrics.max_deflection_counts;
  j["hard_collision"] = metrics.hard_collision;
  j["final_position_mm"] = {metrics.final_position.x() * 1e3,
                            metrics.final_position.y() * 1e3,
                            metrics.final_position.z() * 1e3};
  std::ofstream out(join(out_dir, "avoid_metrics.json"));
  out << j.dump(2) << "\n";
}

void run_eval(const Scenario& s, const std::string& out_dir, const RunOverrides&) {
  const CsvTable trace = read_csv(join(out_dir, "trace.csv"));
  std::vector<Vec3> points;
  points.reserve(trace.rows.size());
  for (const auto& row : trace.rows) points.emplace_back(row[8], row[9], row[10]);
  const EvalResult r = eval_trace_error(points, s.scene, s.whisker.length_mm * 1e-3);

  CsvWriter csv(join(out_dir, "eval_points.csv"), {"index", "distance_mm"});
  for (size_t i = 0; i < r.per_point_mm.size(); ++i) {
    csv.write_row({static_cast<double>(i), r.per_point_mm[i]});
  }
  nlohmann::json j;
  j["mean_mm"] = r.mean_mm;
  j["sd_mm"] = r.sd_mm;
  j["rms_mm"] = r.rms_mm;
  j["normalized"] = r.normalized;
  j["count"] = r.per_point_mm.size();
  std::ofstream out(join(out_dir, "eval.json"));
  out << j.dump(2) << "\n";
}

int run_command(const std::string& command, const Scenario& s,
                const std::string& out_dir, const RunOverrides& o) {
  std::filesystem::create_directories(out_dir);
  try {
    if (command == "calibrate") run_calibrate(s, out_dir, o);
    else if (command == "scan") run_scan(s, out_dir, o);
    else if (command == "track") run_track(s, out_dir, o);
    else if (command == "map") run_map(s, out_dir, o);
    else if (command == "avoid") run_avoid(s, out_dir, o);
    else if (command == "eval") run_eval(s, out_dir, o);
    else {
      std::cerr << "unknown command: " << command
                << " (expected calibrate|scan|track|map|avoid|eval)\n";
      return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error [" << command << "]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace whisker
