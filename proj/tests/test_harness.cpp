#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "whisker/csv.hpp"
#include "whisker/harness.hpp"

using namespace whisker;

namespace {

std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small, fast scenario: short brush of a cylinder with a coarse whisker.
nlohmann::json small_scenario_json() {
  return nlohmann::json{
      {"seed", 21},
      {"rate_hz", 250.0},
      {"contact_threshold_counts", 4.0},
      {"whisker", {{"shape", "semi_curved"}, {"segments", 30}}},
      {"scene",
       {{"shapes",
         {{{"type", "cylinder"},
           {"radius", 0.015},
           {"pose", {{"translation", {-0.005, 0.052, 0.0}}}}}}}}},
      {"calibration",
       {{"arc_steps", 10}, {"depth_steps", 5}, {"azimuth_steps", 2}}},
      {"trajectory",
       {{"start_mm", {30.0, 0.0, 0.0}},
        {"end_mm", {-10.0, 0.0, 0.0}},
        {"rpy_deg", {-90.0, 0.0, 0.0}},
        {"duration_s", 0.8}}},
      {"filter", {{"kind", "ukf"}}},
      {"map",
       {{"bounds_lo_mm", {-40.0, 20.0, -20.0}},
        {"bounds_hi_mm", {40.0, 80.0, 20.0}},
        {"free_box_lo_mm", {-30.0, -10.0, -10.0}},
        {"free_box_hi_mm", {30.0, 5.0, 10.0}}}}};
}

}  // namespace

TEST_CASE("eval_trace_error basics") {
  Scene scene;
  Shape sphere;
  sphere.type = ShapeType::Sphere;
  sphere.radius = 0.02;
  scene.shapes.push_back(sphere);

  SUBCASE("points on the surface score zero") {
    std::vector<Vec3> pts;
    for (int i = 0; i < 10; ++i) {
      const double a = 2.0 * M_PI * i / 10;
      pts.push_back(20.0 * Vec3(std::cos(a), std::sin(a), 0.0));
    }
    const EvalResult r = eval_trace_error(pts, scene, 0.055);
    CHECK(r.mean_mm < 1e-9);
    CHECK(r.sd_mm < 1e-9);
    CHECK(r.rms_mm < 1e-9);
  }

  SUBCASE("uniform 1 mm offset along normals") {
    std::vector<Vec3> pts;
    for (int i = 0; i < 16; ++i) {
      const double a = 2.0 * M_PI * i / 16;
      pts.push_back(21.0 * Vec3(std::cos(a), std::sin(a), 0.0));
    }
    const EvalResult r = eval_trace_error(pts, scene, 0.055);
    CHECK(r.mean_mm == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.sd_mm < 1e-9);
    CHECK(r.normalized == doctest::Approx(1.0 / 55.0).epsilon(1e-9));
  }

  SUBCASE("empty estimates are rejected") {
    CHECK_THROWS_AS(eval_trace_error({}, scene, 0.055), std::invalid_argument);
  }
}

TEST_CASE("scenario json parsing applies defaults and overrides") {
  const Scenario s = Scenario::from_json(small_scenario_json());
  CHECK(s.seed == 21);
  CHECK(s.whisker.segments == 30);
  CHECK(s.whisker.length_mm == 55.0);  // default
  CHECK(s.scene.shapes.size() == 1);
  CHECK(s.filter.kind == FilterKind::Ukf);
  CHECK(s.calibration.arc_steps == 10);
  CHECK(s.trajectory.duration_s == 0.8);
  CHECK_THROWS(Scenario::from_json(nlohmann::json{{"filter", {{"kind", "kalman"}}}}));
}

TEST_CASE("csv round trips") {
  const std::string dir = temp_dir("whisker_csv_test");
  const std::string path = dir + "/t.csv";
  {
    CsvWriter w(path, {"a", "b"});
    w.write_row({1.5, -2.25});
    w.write_row({3.0, 0.123871263871263});
  }
  const CsvTable t = read_csv(path);
  REQUIRE(t.header.size() == 2);
  CHECK(t.column("b") == 1);
  CHECK(t.column("missing") == -1);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1][1] == 0.123871263871263);  // exact round trip
  CHECK(t.rows[0][0] == 1.5);
}

TEST_CASE("pipeline stages produce artifacts and deterministic outputs") {
  const Scenario s = Scenario::from_json(small_scenario_json());
  const std::string dir1 = temp_dir("whisker_run1");
  const std::string dir2 = temp_dir("whisker_run2");

  for (const std::string& dir : {dir1, dir2}) {
    REQUIRE(run_command("calibrate", s, dir) == 0);
    REQUIRE(run_command("scan", s, dir) == 0);
    REQUIRE(run_command("track", s, dir) == 0);
    REQUIRE(run_command("map", s, dir) == 0);
    REQUIRE(run_command("eval", s, dir) == 0);
    for (const char* f : {"calibration.csv", "model_tp.json", "model_se.json",
                          "scan.csv", "trace.csv", "map.json", "voxels.csv",
                          "eval.json", "eval_points.csv"}) {
      CHECK(std::filesystem::exists(std::filesystem::path(dir) / f));
    }
  }
  for (const char* f : {"calibration.csv", "scan.csv", "trace.csv", "voxels.csv",
                        "eval_points.csv"}) {
    CHECK(slurp(dir1 + "/" + f) == slurp(dir2 + "/" + f));
  }

  // scan csv round trip preserves poses and moments
  const auto records = read_scan_csv(dir1 + "/scan.csv", s.whisker.counts_per_nm);
  const auto fresh = scan_records(s);
  REQUIRE(records.size() == fresh.size());
  for (size_t i = 0; i < records.size(); i += 17) {
    CHECK((records[i].base.t - fresh[i].base.t).norm() < 1e-15);
    CHECK((records[i].moment.m - fresh[i].moment.m).norm() < 1e-18);
    CHECK(records[i].truth.in_contact == fresh[i].truth.in_contact);
  }

  // the tracked estimates stay within the sanity envelope of the base
  const CsvTable trace = read_csv(dir1 + "/trace.csv");
  REQUIRE(!trace.rows.empty());
  for (const auto& row : trace.rows) {
    CHECK(Vec3(row[2], row[3], row[4]).norm() < 1.2 * s.whisker.length_mm);
  }

  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("unknown command returns a usage error") {
  const Scenario s = Scenario::from_json(small_scenario_json());
  CHECK(run_command("explode", s, temp_dir("whisker_bad_cmd")) == 2);
}

TEST_CASE("track without a scan fails cleanly") {
  const Scenario s = Scenario::from_json(small_scenario_json());
  CHECK(run_command("track", s, temp_dir("whisker_no_scan")) == 1);
}
