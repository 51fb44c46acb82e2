#include "magslam/simworld.hpp"

#include "magslam/ekf.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace magslam {

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

const char* to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::kSquare: return "square";
    case TrajectoryKind::kFigureEight: return "figure-eight";
    case TrajectoryKind::kCorridorLoop: return "corridor-loop";
    case TrajectoryKind::kFromFile: return "from-file";
  }
  return "unknown";
}

void validate_scenario(const ScenarioSpec& spec) {
  if (!(spec.speed > 0.0)) throw std::invalid_argument("scenario speed must be positive");
  if (!(spec.laps >= 1.0)) throw std::invalid_argument("scenario laps must be >= 1");
  if (!(spec.dt > 0.0)) throw std::invalid_argument("scenario dt must be positive");
  if (spec.kind != TrajectoryKind::kFromFile && !(spec.size_m > 0.0)) {
    throw std::invalid_argument("scenario size must be positive");
  }
  if (spec.kind == TrajectoryKind::kFromFile && spec.path.empty()) {
    throw std::invalid_argument("scenario kind from-file requires a path");
  }
  if (spec.sigma_p < 0.0 || spec.sigma_omega < 0.0 || spec.mag_noise < 0.0) {
    throw std::invalid_argument("scenario noise levels must be non-negative");
  }
  if (!(spec.field_length_scale > 0.0)) {
    throw std::invalid_argument("field length scale must be positive");
  }
}

namespace {

constexpr double kPi = std::numbers::pi;

// Snap bias: arc positions that land within ~1e-9 of a segment boundary are
// classified into the following segment so corner poses get the outgoing
// heading.
constexpr double kSegmentSnap = 1e-9;

struct PoseSample {
  Vec2 position;
  double heading;
};

PoseSample square_pose(double s, double side) {
  const double edge_total = std::floor(s / side + kSegmentSnap);
  const double rem = s - edge_total * side;
  const int edge = static_cast<int>(std::fmod(edge_total, 4.0));
  static const Vec2 corner[4] = {{0.0, 0.0}, {1.0, 0.0}, {1.0, -1.0}, {0.0, -1.0}};
  static const Vec2 dir[4] = {{1.0, 0.0}, {0.0, -1.0}, {-1.0, 0.0}, {0.0, 1.0}};
  PoseSample pose;
  pose.position = side * corner[edge] + rem * dir[edge];
  pose.heading = 0.5 * kPi * edge_total;
  return pose;
}

PoseSample figure_eight_pose(double s, double radius) {
  const double lap = 4.0 * kPi * radius;
  double u = std::fmod(s, lap);
  if (u < 0.0) u += lap;
  PoseSample pose;
  if (u <= 2.0 * kPi * radius) {
    const double theta = u / radius;
    pose.position = Vec2(radius * std::sin(theta), -radius + radius * std::cos(theta));
    pose.heading = theta;
  } else {
    const double phi = (u - 2.0 * kPi * radius) / radius;
    pose.position = Vec2(radius * std::sin(phi), radius - radius * std::cos(phi));
    pose.heading = 2.0 * kPi - phi;
  }
  return pose;
}

PoseSample corridor_pose(double s, double length) {
  const double turns = std::floor(s / length + kSegmentSnap);
  const double rem = s - turns * length;
  const bool outbound = std::fmod(turns, 2.0) == 0.0;
  PoseSample pose;
  pose.position = Vec2(outbound ? rem : length - rem, 0.0);
  pose.heading = kPi * turns;
  return pose;
}

GroundTruthPath truth_from_file(const ScenarioSpec& spec) {
  std::ifstream in(spec.path);
  if (!in) throw DataError("cannot open trajectory file: " + spec.path);
  GroundTruthPath truth;
  truth.dt = spec.dt;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string px, py, psi;
    if (!std::getline(ss, px, ',') || !std::getline(ss, py, ',') || !std::getline(ss, psi)) {
      throw DataError(spec.path + ":" + std::to_string(line_no) +
                      ": expected px,py,psi");
    }
    if (truth.position.empty() && px == "px") continue;  // header row
    try {
      truth.position.emplace_back(parse_number(px), parse_number(py));
      truth.heading.push_back(parse_number(psi));
    } catch (const DataError& e) {
      throw DataError(spec.path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (truth.position.size() < 2) {
    throw DataError("trajectory file needs at least two poses: " + spec.path);
  }
  return truth;
}

double lap_length(const ScenarioSpec& spec) {
  switch (spec.kind) {
    case TrajectoryKind::kSquare: return 4.0 * spec.size_m;
    case TrajectoryKind::kFigureEight: return 4.0 * kPi * spec.size_m;
    case TrajectoryKind::kCorridorLoop: return 2.0 * spec.size_m;
    case TrajectoryKind::kFromFile: return 0.0;
  }
  return 0.0;
}

}  // namespace

GroundTruthPath generate_truth(const ScenarioSpec& spec) {
  validate_scenario(spec);
  if (spec.kind == TrajectoryKind::kFromFile) {
    GroundTruthPath truth = truth_from_file(spec);
    truth.omega.assign(truth.size(), 0.0);
    for (size_t k = 0; k + 1 < truth.size(); ++k) {
      truth.omega[k] = (truth.heading[k + 1] - truth.heading[k]) / truth.dt;
    }
    return truth;
  }

  const double step = spec.speed * spec.dt;
  const double total = spec.laps * lap_length(spec);
  const long n_steps = std::llround(total / step);
  if (n_steps < 1) throw std::invalid_argument("scenario too short for one step");

  GroundTruthPath truth;
  truth.dt = spec.dt;
  truth.position.reserve(n_steps + 1);
  truth.heading.reserve(n_steps + 1);
  for (long k = 0; k <= n_steps; ++k) {
    const double s = static_cast<double>(k) * step;
    PoseSample pose{};
    switch (spec.kind) {
      case TrajectoryKind::kSquare: pose = square_pose(s, spec.size_m); break;
      case TrajectoryKind::kFigureEight: pose = figure_eight_pose(s, spec.size_m); break;
      case TrajectoryKind::kCorridorLoop: pose = corridor_pose(s, spec.size_m); break;
      case TrajectoryKind::kFromFile: break;  // handled above
    }
    truth.position.push_back(pose.position);
    truth.heading.push_back(pose.heading);
  }
  truth.omega.assign(truth.size(), 0.0);
  for (size_t k = 0; k + 1 < truth.size(); ++k) {
    truth.omega[k] = (truth.heading[k + 1] - truth.heading[k]) / truth.dt;
  }
  return truth;
}

FieldModel make_field(std::uint64_t seed, const ScenarioSpec& spec) {
  validate_scenario(spec);
  FieldModel field;
  field.background = spec.background;
  field.length_scale = spec.field_length_scale;

  const GroundTruthPath truth = generate_truth(spec);
  const double path_len = static_cast<double>(truth.sample_count()) * spec.speed * spec.dt;
  long count = spec.anomaly_count;
  if (count < 0) count = std::max<long>(3, std::llround(path_len / (2.2 * std::max(1.0, spec.laps))));
  if (count == 0) return field;

  Rng rng(seed);
  const long poses = static_cast<long>(truth.size());
  for (long j = 0; j < count; ++j) {
    const long idx = std::min<long>(poses - 1,
        static_cast<long>((static_cast<double>(j) + 0.5) * poses / static_cast<double>(count)));
    Vec2 center = truth.position[idx];
    center.x() += rng.gaussian(0.6);
    center.y() += rng.gaussian(0.6);
    Vec3 direction(rng.gaussian(), rng.gaussian(), rng.gaussian());
    if (direction.norm() < 1e-9) direction = Vec3::UnitX();
    direction.normalize();
    const double amplitude = spec.anomaly_strength * rng.uniform(0.7, 1.3);
    field.centers.push_back(center);
    field.moments.push_back(amplitude * direction);
  }
  return field;
}

Vec3 field_at(const FieldModel& field, const Vec2& p, double psi) {
  Vec3 world = field.background;
  const double inv_two_ls2 = 0.5 / (field.length_scale * field.length_scale);
  for (size_t j = 0; j < field.centers.size(); ++j) {
    const double d2 = (p - field.centers[j]).squaredNorm();
    world += field.moments[j] * std::exp(-d2 * inv_two_ls2);
  }
  Vec3 body;
  body.head<2>() = rotation_matrix(psi).transpose() * world.head<2>();
  body.z() = world.z();
  return body;
}

std::vector<SensorSample> synthesize_measurements(const GroundTruthPath& truth,
                                                  const FieldModel& field,
                                                  const ScenarioSpec& spec) {
  if (truth.size() < 2) throw std::invalid_argument("ground truth has no increments");
  Rng rng(splitmix64(spec.seed ^ 0x6d656173ull));  // measurement noise stream
  std::vector<SensorSample> samples;
  samples.reserve(truth.sample_count());
  for (size_t t = 0; t + 1 < truth.size(); ++t) {
    SensorSample s;
    s.index = static_cast<long>(t);
    s.dt = truth.dt;
    const Vec2 increment = truth.position[t + 1] - truth.position[t];
    s.odom_pos = rotation_matrix(truth.heading[t]).transpose() * increment;
    s.odom_pos.x() += rng.gaussian(spec.sigma_p);
    s.odom_pos.y() += rng.gaussian(spec.sigma_p);
    s.odom_gyro = truth.omega[t] + spec.bias_omega + rng.gaussian(spec.sigma_omega);
    s.mag = field_at(field, truth.position[t], truth.heading[t]);
    s.mag.x() += rng.gaussian(spec.mag_noise);
    s.mag.y() += rng.gaussian(spec.mag_noise);
    s.mag.z() += rng.gaussian(spec.mag_noise);
    samples.push_back(s);
  }
  return samples;
}

Scenario build_scenario(const ScenarioSpec& spec) {
  Scenario scenario;
  scenario.truth = generate_truth(spec);
  scenario.field = make_field(splitmix64(spec.seed ^ 0x6669656c64ull), spec);
  scenario.samples = synthesize_measurements(scenario.truth, scenario.field, spec);
  return scenario;
}

}  // namespace magslam
