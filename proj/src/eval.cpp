#include "magslam/eval.hpp"

#include "magslam/slam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace magslam {

std::vector<Vec2> procrustes_align(const std::vector<Vec2>& estimate,
                                   const std::vector<Vec2>& reference) {
  if (estimate.size() != reference.size()) {
    throw std::invalid_argument("procrustes: sequences differ in length");
  }
  if (estimate.size() < 2) {
    throw std::invalid_argument("procrustes: need at least two points");
  }
  const double n = static_cast<double>(estimate.size());
  Vec2 mean_e = Vec2::Zero();
  Vec2 mean_r = Vec2::Zero();
  for (size_t i = 0; i < estimate.size(); ++i) {
    mean_e += estimate[i];
    mean_r += reference[i];
  }
  mean_e /= n;
  mean_r /= n;

  double ref_spread = 0.0;
  double dot = 0.0;    // sum r~ . e~
  double cross = 0.0;  // sum (r~_y e~_x - r~_x e~_y)
  for (size_t i = 0; i < estimate.size(); ++i) {
    const Vec2 e = estimate[i] - mean_e;
    const Vec2 r = reference[i] - mean_r;
    ref_spread += r.squaredNorm();
    dot += r.dot(e);
    cross += r.y() * e.x() - r.x() * e.y();
  }
  if (ref_spread <= 0.0) {
    throw std::invalid_argument("procrustes: degenerate reference (all points equal)");
  }

  // 2D closed form of the orthogonal solution constrained to det +1.
  const double theta = std::atan2(cross, dot);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Mat2 rot;
  rot << c, -s, s, c;

  std::vector<Vec2> aligned;
  aligned.reserve(estimate.size());
  for (const Vec2& e : estimate) {
    aligned.push_back(rot * (e - mean_e) + mean_r);
  }
  return aligned;
}

double rmse(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("rmse: sequences differ in length");
  if (a.empty()) throw std::invalid_argument("rmse: empty sequences");
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    sum += (a[i] - b[i]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(a.size()));
}

const char* to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::kBias: return "bias";
    case SweepParameter::kPosNoiseVar: return "pos-noise-var";
    case SweepParameter::kGyroNoiseVar: return "gyro-noise-var";
  }
  return "unknown";
}

std::uint64_t derive_run_seed(std::uint64_t master, long counter) {
  return splitmix64(splitmix64(master) + static_cast<std::uint64_t>(counter));
}

namespace {

McRunResult run_one(const McConfig& config, double value, int run, long counter) {
  McRunResult result;
  result.sweep_value = value;
  result.run = run;

  ScenarioSpec scenario = config.base_scenario;
  SlamParams params = config.base_params;
  switch (config.swept) {
    case SweepParameter::kBias:
      scenario.bias_omega = value;
      break;
    case SweepParameter::kPosNoiseVar:
      scenario.sigma_p = std::sqrt(value);
      params.sigma_p = std::sqrt(value);
      break;
    case SweepParameter::kGyroNoiseVar:
      scenario.sigma_omega = std::sqrt(value);
      params.sigma_omega = std::sqrt(value);
      break;
  }
  scenario.seed = derive_run_seed(config.seed, counter);

  const Scenario world = build_scenario(scenario);
  const std::vector<Vec2>& truth = world.truth.position;

  const std::vector<Vec2> odometry = dead_reckon(world.samples);
  result.odom_rmse = rmse(procrustes_align(odometry, truth), truth);

  try {
    SessionStats stats;
    const SmoothedTrajectory smoothed = run_slam(world.samples, params, &stats);
    std::vector<Vec2> positions;
    positions.reserve(smoothed.size());
    for (size_t tau = 0; tau < smoothed.size(); ++tau) {
      positions.push_back(smoothed.position(tau));
    }
    result.slam_rmse = rmse(procrustes_align(positions, truth), truth);
    result.n_loop_closures = static_cast<int>(smoothed.events.size());
    result.status = "ok";
  } catch (const std::exception&) {
    result.slam_rmse = std::numeric_limits<double>::quiet_NaN();
    result.n_loop_closures = 0;
    result.status = "failed";
  }
  return result;
}

}  // namespace

std::vector<McRunResult> monte_carlo(const McConfig& config) {
  if (config.runs < 1) throw std::invalid_argument("mc: runs must be >= 1");
  if (config.values.empty()) throw std::invalid_argument("mc: no sweep values");
  if (config.swept != SweepParameter::kBias) {
    for (double v : config.values) {
      if (!(v > 0.0)) throw std::invalid_argument("mc: noise variances must be positive");
    }
  }
  validate_params(config.base_params);
  validate_scenario(config.base_scenario);

  std::vector<McRunResult> results;
  results.reserve(config.values.size() * config.runs);
  long counter = 0;
  for (double value : config.values) {
    for (int run = 0; run < config.runs; ++run, ++counter) {
      results.push_back(run_one(config, value, run, counter));
    }
  }
  return results;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  std::sort(values.begin(), values.end());
  const size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace magslam
