#pragma once

#include "magslam/core.hpp"
#include "magslam/simworld.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace magslam {

/// Optimal rigid registration (rotation + translation, determinant +1, no
/// scaling) of estimate onto reference; returns the transformed estimate.
/// Throws std::invalid_argument on length mismatch, fewer than two points,
/// or an all-identical reference.
std::vector<Vec2> procrustes_align(const std::vector<Vec2>& estimate,
                                   const std::vector<Vec2>& reference);

/// Root-mean-square point distance between equally long sequences.
double rmse(const std::vector<Vec2>& a, const std::vector<Vec2>& b);

enum class SweepParameter { kBias, kPosNoiseVar, kGyroNoiseVar };

const char* to_string(SweepParameter p);

struct McConfig {
  SweepParameter swept = SweepParameter::kBias;
  std::vector<double> values;
  int runs = 10;
  ScenarioSpec base_scenario;
  SlamParams base_params;
  std::uint64_t seed = 1;
};

struct McRunResult {
  double sweep_value = 0.0;
  int run = 0;
  double slam_rmse = 0.0;   // NaN when the run failed
  double odom_rmse = 0.0;
  int n_loop_closures = 0;
  std::string status;       // "ok" or "failed"
};

/// Per-run seed: splitmix64(splitmix64(master) + counter) with
/// counter = value_index * runs + run_index.
std::uint64_t derive_run_seed(std::uint64_t master, long counter);

/// Runs the sweep. For noise-variance sweeps both the scenario corruption
/// and the filter noise model take sqrt(value); the bias sweep corrupts
/// only the scenario (the filter estimates the bias as a state). Runs are
/// independent and results are keyed (value, run), so the output is
/// deterministic in (config, seed). SLAM failures are recorded, not fatal.
std::vector<McRunResult> monte_carlo(const McConfig& config);

/// Median of a non-empty vector (average of the middle pair for even sizes).
double median(std::vector<double> values);

}  // namespace magslam
