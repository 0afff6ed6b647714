#pragma once

#include <cstdint>

#include "whisker/gpr.hpp"
#include "whisker/rod.hpp"

namespace whisker {

/// Simulated stage sweep standing in for the physical calibration rig: a
/// small sphere is pressed into the rest centerline on the convex side at a
/// grid of (arc fraction, depth, azimuth) stops, the quasi-static solve runs
/// with the base held at identity, and the resulting contact point / noisy
/// moment pairs form the dataset.
struct CalibrationSweep {
  double arc_min = 0.25;
  double arc_max = 0.98;
  int arc_steps = 24;
  double depth_min_mm = 0.5;
  double depth_max_mm = 10.0;
  int depth_steps = 10;
  double azimuth_min = -0.3;  // [rad] about the local tangent
  double azimuth_max = 0.3;
  int azimuth_steps = 3;
  double probe_radius_mm = 5.0;
  double noise_sigma_counts = 0.5;
  double counts_per_newton_meter = 5e6;
};

/// Deterministic under seed. Non-contact stops are excluded; duplicates
/// closer than 1e-6 mm are dropped. Throws if fewer than 10 contact samples
/// survive.
CalibrationDataset generate_calibration(const WhiskerRod& rod,
                                        const CalibrationSweep& sweep,
                                        uint64_t seed);

/// Commanded probe-sphere center for a sweep stop, in {B} [m]. Exposed for
/// coverage checks against the realized dataset.
Vec3 calibration_probe_center(const WhiskerRod& rod, const CalibrationSweep& sweep,
                              double arc_fraction, double depth_mm, double azimuth);

}  // namespace whisker
