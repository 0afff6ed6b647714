#pragma once

#include <optional>
#include <string>
#include <vector>

#include "whisker/scenario.hpp"

namespace whisker {

struct EvalResult {
  double mean_mm = 0.0;
  double sd_mm = 0.0;
  double rms_mm = 0.0;
  double normalized = 0.0;  // mean error / whisker length
  std::vector<double> per_point_mm;
};

/// Distance from each world-frame estimate [mm] to the nearest scene surface,
/// with summary statistics and the length-normalized mean.
EvalResult eval_trace_error(const std::vector<Vec3>& world_points_mm,
                            const Scene& scene, double whisker_length_m);

/// Optional per-invocation overrides of scenario fields (CLI flags).
struct RunOverrides {
  std::optional<uint64_t> seed;
  std::optional<FilterKind> filter;
  bool baseline = false;  // deterministic baseline instead of a Bayesian filter
  std::optional<SensorKernelKind> kernel;
  std::optional<MapKernelKind> map_kernel;
};

/// Scenario commands. Each writes its artifacts into out_dir with fixed
/// names and consumes artifacts of earlier stages from the same directory:
///   calibrate -> calibration.csv, model_tp.json, model_se.json
///   scan      -> scan.csv
///   track     -> trace.csv            (needs scan.csv + model_*.json)
///   map       -> map.json, voxels.csv (needs trace.csv)
///   avoid     -> avoid_log.csv, avoid_metrics.json
///   eval      -> eval.json, eval_points.csv (needs trace.csv)
void run_calibrate(const Scenario& s, const std::string& out_dir, const RunOverrides& o = {});
void run_scan(const Scenario& s, const std::string& out_dir, const RunOverrides& o = {});
void run_track(const Scenario& s, const std::string& out_dir, const RunOverrides& o = {});
void run_map(const Scenario& s, const std::string& out_dir, const RunOverrides& o = {});
void run_avoid(const Scenario& s, const std::string& out_dir, const RunOverrides& o = {});
void run_eval(const Scenario& s, const std::string& out_dir, const RunOverrides& o = {});

/// Dispatch by command name; returns a nonzero exit code with a message on
/// stderr for unknown commands or failed validation.
int run_command(const std::string& command, const Scenario& s,
                const std::string& out_dir, const RunOverrides& o = {});

// Shared helpers between commands and tests.
std::vector<SweepRecord> scan_records(const Scenario& s, const RunOverrides& o = {});
std::vector<TraceInput> trace_inputs_from_records(const std::vector<SweepRecord>& records,
                                                  double counts_per_nm);
PriorProvider make_prior_provider(const Scenario& s, const WhiskerRod& rod,
                                  const std::string& out_dir);
/// Query points evenly spread along the undeflected whisker, world frame [mm].
std::vector<Vec3> whisker_query_points(const WhiskerRod& rod, const Pose& base, int n);

void write_scan_csv(const std::string& path, const std::vector<SweepRecord>& records,
                    double counts_per_nm);
std::vector<SweepRecord> read_scan_csv(const std::string& path, double counts_per_nm);
void write_trace_csv(const std::string& path, const TrackResult& result);
void write_calibration_csv(const std::string& path, const CalibrationDataset& data);
CalibrationDataset read_calibration_csv(const std::string& path);

}  // namespace whisker
