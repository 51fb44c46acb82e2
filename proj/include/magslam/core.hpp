#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace magslam {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Thrown when a filter or smoother step degenerates (indefinite covariance,
/// singular residual covariance, non-finite state).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown on malformed input (datasets, configs, inconsistent streams).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One time step of body-frame odometry increments plus a magnetometer
/// reading. Units: seconds, meters, rad/s, microtesla.
struct SensorSample {
  long index = 0;               // time step t
  double dt = 0.1;              // sampling interval [s]
  Vec2 odom_pos = Vec2::Zero(); // body-frame position increment [m]
  double odom_gyro = 0.0;       // angular rate reading [rad/s]
  Vec3 mag = Vec3::Zero();      // body-frame magnetic field [uT]
};

/// Returns false if dt <= 0 or any entry is non-finite.
bool is_valid_sample(const SensorSample& sample);

/// Gaussian belief over (p_x, p_y, psi, b_omega, l_1x, l_1y, ..., l_Kx, l_Ky).
/// Heading is kept unwrapped; wrap only when reporting.
struct StateBelief {
  VecX mean;
  MatX cov;
  int landmark_count = 0;

  int dim() const { return 4 + 2 * landmark_count; }
  Vec2 position() const { return mean.head<2>(); }
  double heading() const { return mean(2); }
  double gyro_bias() const { return mean(3); }
  Vec2 landmark(int k) const { return mean.segment<2>(4 + 2 * k); }
  Mat2 position_cov() const { return cov.topLeftCorner<2, 2>(); }
  Mat2 landmark_cov(int k) const { return cov.block<2, 2>(4 + 2 * k, 4 + 2 * k); }
};

/// Tuning parameters and noise levels. Defaults are the published tuning
/// table plus the prior variances used in the experiments.
struct SlamParams {
  double sigma_p = 0.01;      // odometry position noise std per axis [m]
  double sigma_omega = 0.01;  // gyro noise std [rad/s]
  double sigma_lc = 0.31622776601683794;  // sqrt(0.1), loop-closure std [m]
  double sigma_m = 3.0;       // magnetometer similarity scale [uT]
  int n_lc = 10;              // samples per matching window
  int n_lag = 50;             // most recent samples excluded from candidates
  int n_dist = 10;            // min samples between accepted loop closures
  double gamma = 0.25;        // combined-weight acceptance threshold
  double gamma_mag = 3.0;     // min field excitation over the window [uT]
  double gamma_ml = 1e-16;    // marginal-likelihood rejection threshold
  double p0_pos = 1e-8;       // initial position variance per axis [m^2]
  double p0_heading = 1e-8;   // initial heading variance [rad^2]
  double p0_bias = 1e-4;      // initial gyro-bias variance [rad^2/s^2]
  double p0_landmark = 1e4;   // initial landmark variance per axis [m^2]
  double process_noise_scale = 1.0;  // multiplier on (sigma_p^2, sigma_omega^2)
};

/// Returns params unchanged if every invariant holds, otherwise throws
/// std::invalid_argument naming the first violated field.
SlamParams validate_params(const SlamParams& params);

enum class TraversalDirection { kForward, kBackward };

const char* to_string(TraversalDirection d);
std::optional<TraversalDirection> traversal_direction_from_string(const std::string& s);

/// An accepted loop closure: landmark k ties the pose at time_now to the
/// pose at time_then (sample indices into the measurement stream).
struct LoopClosureEvent {
  int landmark_index = 0;
  long time_now = 0;
  long time_then = 0;
  TraversalDirection direction = TraversalDirection::kForward;
  double weight = 0.0;
};

/// All similarity weights computed at one time step, indexed by candidate
/// i = 0 .. t - n_lag. Candidates with invalid windows carry weight 0.
struct WeightRow {
  long t = 0;
  std::vector<double> w_fwd;
  std::vector<double> w_bwd;
  std::vector<double> w_pos;
  std::vector<double> w_combined;
  double sigma_wp = 0.0;  // position-weight scale at time t [m]

  size_t candidates() const { return w_combined.size(); }
};

/// Residual and residual covariance of a landmark measurement update,
/// captured before the update, plus the marginal likelihood of the match.
struct UpdateDiagnostics {
  Vec2 residual = Vec2::Zero();          // predicted position minus landmark
  Mat2 residual_cov = Mat2::Identity();  // innovation covariance
  double marginal_likelihood = 0.0;
};

/// Wraps an angle into (-pi, pi]. Internal state never wraps; this is for
/// report output only.
double wrap_angle(double angle);

// Matrix hygiene helpers shared by the filter and the tests.
bool is_symmetric(const MatX& m, double rel_tol = 1e-9);
double min_eigenvalue_sym(const MatX& m);
bool is_positive_semidefinite(const MatX& m, double rel_tol = 1e-9);
bool is_valid_belief(const StateBelief& belief);

/// Shortest round-trip decimal formatting; parse_number(format_number(x)) == x
/// bit-exactly for every finite double.
std::string format_number(double value);
std::string format_number(long value);

/// Strict full-string parse; throws DataError on anything else.
double parse_number(const std::string& text);
long parse_integer(const std::string& text);

/// Deterministic 64-bit mix used to derive independent sub-seeds.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace magslam
