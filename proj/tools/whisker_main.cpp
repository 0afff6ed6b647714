#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "whisker/harness.hpp"

using namespace whisker;

int main(int argc, char** argv) {
  CLI::App app{"Passive whisker contact localization and surface mapping"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir = "out";
  uint64_t seed = 0;
  bool seed_set = false;
  std::string filter_name, kernel_name, map_kernel_name;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "override scenario seed")
        ->each([&](const std::string&) { seed_set = true; });
    cmd->add_option("--filter", filter_name, "ekf|ukf|pf|baseline");
    cmd->add_option("--kernel", kernel_name, "se|tp");
    cmd->add_option("--map-kernel", map_kernel_name, "rbf|ebf");
  };

  const char* names[] = {"calibrate", "scan", "track", "map", "avoid", "eval"};
  const char* descriptions[] = {
      "generate a calibration dataset and fit sensor models",
      "simulate a whisker sweep and write the moment time series",
      "run contact-point tracking over a scan",
      "integrate a trace into a Bayesian Hilbert map and voxelize it",
      "run the reactive collision-avoidance scenario",
      "score a trace against the ground-truth scene"};
  for (int i = 0; i < 6; ++i) add_common(app.add_subcommand(names[i], descriptions[i]));

  CLI11_PARSE(app, argc, argv);

  RunOverrides overrides;
  if (seed_set) overrides.seed = seed;
  if (!filter_name.empty()) {
    if (filter_name == "ekf") overrides.filter = FilterKind::Ekf;
    else if (filter_name == "ukf") overrides.filter = FilterKind::Ukf;
    else if (filter_name == "pf") overrides.filter = FilterKind::Pf;
    else if (filter_name == "baseline") overrides.baseline = true;
    else {
      std::cerr << "unknown filter: " << filter_name << "\n";
      return 2;
    }
  }
  if (!kernel_name.empty()) {
    if (kernel_name == "se") overrides.kernel = SensorKernelKind::SquaredExponential;
    else if (kernel_name == "tp") overrides.kernel = SensorKernelKind::ThinPlate;
    else {
      std::cerr << "unknown kernel: " << kernel_name << "\n";
      return 2;
    }
  }
  if (!map_kernel_name.empty()) {
    if (map_kernel_name == "rbf") overrides.map_kernel = MapKernelKind::Rbf;
    else if (map_kernel_name == "ebf") overrides.map_kernel = MapKernelKind::Ebf;
    else {
      std::cerr << "unknown map kernel: " << map_kernel_name << "\n";
      return 2;
    }
  }

  Scenario scenario;
  try {
    scenario = Scenario::from_file(scenario_path);
  } catch (const std::exception& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  return run_command(command, scenario, out_dir, overrides);
}
