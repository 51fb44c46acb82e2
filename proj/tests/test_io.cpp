#include "magslam/io.hpp"

#include "magslam/simworld.hpp"

#include <doctest.h>

#include <cstring>
#include <fstream>
#include <sstream>

using namespace magslam;

namespace {

Dataset random_dataset(std::uint64_t seed, long count, bool with_truth) {
  Rng rng(seed);
  Dataset d;
  for (long t = 0; t < count; ++t) {
    SensorSample s;
    s.index = t;
    s.dt = 0.1;
    s.odom_pos = Vec2(rng.gaussian(0.3), rng.gaussian(0.3));
    s.odom_gyro = rng.gaussian(0.4);
    s.mag = Vec3(rng.gaussian(15.0), rng.gaussian(15.0), rng.gaussian(15.0) - 40.0);
    d.samples.push_back(s);
    if (with_truth) {
      d.gt_position.emplace_back(rng.gaussian(5.0), rng.gaussian(5.0));
      d.gt_heading.push_back(rng.gaussian(2.0));
    }
  }
  return d;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("dataset round trip is bit exact") {
  for (const bool with_truth : {false, true}) {
    const Dataset original = random_dataset(9, 50, with_truth);
    std::stringstream buffer;
    write_dataset(buffer, original);
    const Dataset parsed = parse_dataset(buffer, "buffer");

    REQUIRE(parsed.samples.size() == original.samples.size());
    CHECK(parsed.has_truth() == with_truth);
    for (size_t i = 0; i < parsed.samples.size(); ++i) {
      const auto& a = original.samples[i];
      const auto& b = parsed.samples[i];
      CHECK(a.index == b.index);
      CHECK(same_bits(a.dt, b.dt));
      CHECK(same_bits(a.odom_pos.x(), b.odom_pos.x()));
      CHECK(same_bits(a.odom_pos.y(), b.odom_pos.y()));
      CHECK(same_bits(a.odom_gyro, b.odom_gyro));
      CHECK(same_bits(a.mag.x(), b.mag.x()));
      CHECK(same_bits(a.mag.y(), b.mag.y()));
      CHECK(same_bits(a.mag.z(), b.mag.z()));
    }

    // and the re-serialized text is identical
    std::stringstream again;
    write_dataset(again, parsed);
    std::stringstream reference;
    write_dataset(reference, original);
    CHECK(again.str() == reference.str());
  }
}

TEST_CASE("simulated scenario round-trips through the dataset format") {
  const Scenario world = build_scenario(ScenarioSpec{});
  Dataset d;
  d.samples = world.samples;
  for (size_t t = 0; t + 1 < world.truth.size(); ++t) {
    d.gt_position.push_back(world.truth.position[t]);
    d.gt_heading.push_back(world.truth.heading[t]);
  }
  std::stringstream buffer;
  write_dataset(buffer, d);
  const Dataset parsed = parse_dataset(buffer, "buffer");
  REQUIRE(parsed.samples.size() == d.samples.size());
  for (size_t i = 0; i < parsed.samples.size(); ++i) {
    CHECK(same_bits(parsed.samples[i].mag.x(), d.samples[i].mag.x()));
    CHECK(same_bits(parsed.samples[i].odom_pos.y(), d.samples[i].odom_pos.y()));
  }
  for (size_t i = 0; i < parsed.gt_position.size(); ++i) {
    CHECK(same_bits(parsed.gt_position[i].x(), d.gt_position[i].x()));
    CHECK(same_bits(parsed.gt_heading[i], d.gt_heading[i]));
  }
}

TEST_CASE("parser reports the offending line") {
  SUBCASE("missing column in the header") {
    std::stringstream in("t,dt,yp_x,yp_y,y_omega,ym_x,ym_y\n");
    CHECK_THROWS_WITH_AS(parse_dataset(in, "f.csv"),
                         "f.csv:1: header must list 8 or 11 columns, got 7", DataError);
  }
  SUBCASE("wrong header name") {
    std::stringstream in("t,dt,yp_x,yp_y,y_omega,ym_x,ym_y,wrong\n");
    CHECK_THROWS_WITH_AS(parse_dataset(in, "f.csv"), "f.csv:1: missing column ym_z",
                         DataError);
  }
  SUBCASE("short row") {
    std::stringstream in(
        "t,dt,yp_x,yp_y,y_omega,ym_x,ym_y,ym_z\n"
        "0,0.1,0,0,0,1,2,3\n"
        "1,0.1,0,0,0,1,2\n");
    CHECK_THROWS_WITH_AS(parse_dataset(in, "f.csv"), "f.csv:3: expected 8 fields, got 7",
                         DataError);
  }
  SUBCASE("non-numeric field") {
    std::stringstream in(
        "t,dt,yp_x,yp_y,y_omega,ym_x,ym_y,ym_z\n"
        "0,0.1,zero,0,0,1,2,3\n");
    try {
      parse_dataset(in, "f.csv");
      FAIL("expected parse error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("f.csv:2") != std::string::npos);
    }
  }
  SUBCASE("non-monotone index") {
    std::stringstream in(
        "t,dt,yp_x,yp_y,y_omega,ym_x,ym_y,ym_z\n"
        "0,0.1,0,0,0,1,2,3\n"
        "0,0.1,0,0,0,1,2,3\n");
    CHECK_THROWS_WITH_AS(parse_dataset(in, "f.csv"),
                         "f.csv:3: sample index not strictly increasing", DataError);
  }
  SUBCASE("non-positive dt") {
    std::stringstream in(
        "t,dt,yp_x,yp_y,y_omega,ym_x,ym_y,ym_z\n"
        "0,0,0,0,0,1,2,3\n");
    CHECK_THROWS_AS(parse_dataset(in, "f.csv"), DataError);
  }
  SUBCASE("metadata is honored") {
    std::stringstream in(
        "# rate_hz 20\n"
        "t,dt,yp_x,yp_y,y_omega,ym_x,ym_y,ym_z\n"
        "0,0.05,0,0,0,1,2,3\n");
    const Dataset d = parse_dataset(in, "f.csv");
    CHECK(d.rate_hz == 20.0);
    CHECK(d.samples.size() == 1);
  }
}

TEST_CASE("config parsing") {
  std::stringstream in(
      "# comment\n"
      "kind = figure-eight\n"
      "size=3.5\n"
      "seed = 99   # trailing comment\n"
      "\n");
  const auto entries = parse_config(in, "c.cfg");
  REQUIRE(entries.size() == 3);
  ScenarioSpec spec;
  for (const auto& [key, value] : entries) apply_scenario_key(spec, key, value);
  CHECK(spec.kind == TrajectoryKind::kFigureEight);
  CHECK(spec.size_m == 3.5);
  CHECK(spec.seed == 99);

  std::stringstream bad("just words\n");
  CHECK_THROWS_AS(parse_config(bad, "c.cfg"), DataError);
  CHECK_THROWS_AS(apply_scenario_key(spec, "nonsense", "1"), DataError);
}

TEST_CASE("param keys cover the tuning table") {
  SlamParams params;
  apply_param_key(params, "n_lc", "5");
  apply_param_key(params, "gamma_ml", "0.1");
  apply_param_key(params, "sigma_lc", "0.5");
  apply_param_key(params, "process_noise_scale", "10");
  CHECK(params.n_lc == 5);
  CHECK(params.gamma_ml == 0.1);
  CHECK(params.sigma_lc == 0.5);
  CHECK(params.process_noise_scale == 10.0);
  CHECK_THROWS_AS(apply_param_key(params, "sigma_q", "1"), DataError);
}

TEST_CASE("result files carry the expected rows") {
  // tiny smoothed trajectory stub
  SmoothedTrajectory traj;
  traj.landmark_count = 1;
  for (int tau = 0; tau < 3; ++tau) {
    VecX mean = VecX::Zero(6);
    mean(0) = tau;
    mean(2) = 0.1 * tau;
    traj.means.push_back(mean);
    traj.covs.push_back(MatX::Identity(6, 6));
  }
  LoopClosureEvent e;
  e.landmark_index = 0;
  e.time_now = 60;
  e.time_then = 2;
  e.weight = 0.7;
  traj.events.push_back(e);

  const std::string prefix = "/tmp/magslam_io_test";
  WeightTrace trace;
  WeightRow row;
  row.t = 60;
  row.w_fwd = {0.5};
  row.w_bwd = {0.1};
  row.w_pos = {0.9};
  row.w_combined = {0.45};
  trace.rows.push_back(row);
  write_results(traj, &trace, prefix);

  auto count_lines = [](const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    long lines = 0;
    std::string line;
    while (std::getline(in, line)) ++lines;
    return lines;
  };
  CHECK(count_lines(prefix + "_trajectory.csv") == 4);  // header + 3
  CHECK(count_lines(prefix + "_events.csv") == 2);
  CHECK(count_lines(prefix + "_landmarks.csv") == 2);
  CHECK(count_lines(prefix + "_weights.csv") == 2);

  SUBCASE("zero events give a header-only file") {
    traj.events.clear();
    write_results(traj, nullptr, prefix);
    CHECK(count_lines(prefix + "_events.csv") == 1);
  }
}
