#pragma once

#include "magslam/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace magslam {

/// Deterministic, platform-independent random stream: mt19937_64 raw draws
/// mapped straight to doubles, Gaussians via Box-Muller. Identical seeds
/// give identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix64(seed)), inc_(splitmix64(seed ^ 0xda3e39cb94b95bdbull) | 1) {}

  std::uint64_t next_u64() {
    // xorshift128+ style step over two splitmix-derived words; stable and
    // self-contained, no library distribution involved.
    std::uint64_t x = state_;
    const std::uint64_t y = inc_;
    state_ = y;
    x ^= x << 23;
    inc_ = x ^ y ^ (x >> 17) ^ (y >> 26);
    return inc_ + y;
  }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; one spare cached per pair.
  double gaussian();

  double gaussian(double stddev) { return stddev * gaussian(); }

 private:
  std::uint64_t state_;
  std::uint64_t inc_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// True poses sampled on a constant-speed trajectory. heading is unwrapped;
/// omega[k] = (heading[k+1] - heading[k]) / dt, zero at the final pose.
struct GroundTruthPath {
  std::vector<Vec2> position;
  std::vector<double> heading;
  std::vector<double> omega;
  double dt = 0.1;

  size_t size() const { return position.size(); }
  /// Number of sensor samples the path supports (poses minus one).
  size_t sample_count() const { return position.empty() ? 0 : position.size() - 1; }
};

/// Smooth synthetic magnetic environment: constant background plus a sum of
/// radial Gaussian bumps with 3-vector moments.
struct FieldModel {
  std::vector<Vec2> centers;   // [m]
  std::vector<Vec3> moments;   // [uT]
  double length_scale = 2.0;   // [m]
  Vec3 background = Vec3(20.0, 0.0, -40.0);  // world frame [uT]
};

enum class TrajectoryKind { kSquare, kFigureEight, kCorridorLoop, kFromFile };

const char* to_string(TrajectoryKind k);

/// Everything needed to synthesize one scenario deterministically.
struct ScenarioSpec {
  TrajectoryKind kind = TrajectoryKind::kSquare;
  double size_m = 5.0;       // square side / figure-eight radius / corridor length
  double laps = 4.0;         // may be fractional
  double speed = 1.0;        // [m/s]
  double dt = 0.1;           // 10 Hz
  std::uint64_t seed = 1;
  double bias_omega = 0.005; // injected constant gyro bias [rad/s]
  double sigma_p = 0.01;     // odometry position noise std per axis [m]
  double sigma_omega = 0.01; // gyro noise std [rad/s]
  double mag_noise = 0.5;    // magnetometer noise std per axis [uT]
  int anomaly_count = -1;    // -1: one bump per ~2.2 m of path
  double anomaly_strength = 12.0;        // typical bump amplitude [uT]
  double field_length_scale = 1.8;       // bump length scale [m]
  Vec3 background = Vec3(20.0, 0.0, -40.0);
  std::string path;          // trajectory file for kFromFile
};

/// Throws std::invalid_argument on an unusable spec.
void validate_scenario(const ScenarioSpec& spec);

/// Places field anomalies along the scenario trajectory. Deterministic in
/// seed. anomaly_count = 0 yields the constant background field.
FieldModel make_field(std::uint64_t seed, const ScenarioSpec& spec);

/// Body-frame field at a pose: horizontal world components rotated by
/// R(psi)^T, vertical passed through.
Vec3 field_at(const FieldModel& field, const Vec2& p, double psi);

GroundTruthPath generate_truth(const ScenarioSpec& spec);

/// Sample stream per the corruption model: body-frame increments plus
/// Gaussian noise, gyro plus bias plus noise, field at the pre-move pose
/// plus noise. Deterministic in spec.seed.
std::vector<SensorSample> synthesize_measurements(const GroundTruthPath& truth,
                                                  const FieldModel& field,
                                                  const ScenarioSpec& spec);

/// Convenience: truth, field and samples for a spec in one call.
struct Scenario {
  GroundTruthPath truth;
  FieldModel field;
  std::vector<SensorSample> samples;
};

Scenario build_scenario(const ScenarioSpec& spec);

}  // namespace magslam
