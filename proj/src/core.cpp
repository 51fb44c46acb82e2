#include "magslam/core.hpp"

#include <Eigen/Eigenvalues>

#include <charconv>
#include <cmath>
#include <numbers>

namespace magslam {

bool is_valid_sample(const SensorSample& sample) {
  return sample.dt > 0.0 && std::isfinite(sample.dt) &&
         sample.odom_pos.allFinite() && std::isfinite(sample.odom_gyro) &&
         sample.mag.allFinite();
}

namespace {

void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

}  // namespace

SlamParams validate_params(const SlamParams& p) {
  require(p.sigma_p > 0.0, "sigma_p must be positive");
  require(p.sigma_omega > 0.0, "sigma_omega must be positive");
  require(p.sigma_lc > 0.0, "sigma_lc must be positive");
  require(p.sigma_m > 0.0, "sigma_m must be positive");
  require(p.n_lc >= 1, "n_lc must be >= 1");
  require(p.n_lag >= p.n_lc, "n_lag must be >= n_lc");
  require(p.n_dist >= 1, "n_dist must be >= 1");
  require(p.gamma > 0.0 && p.gamma <= 1.0, "gamma must be in (0, 1]");
  require(p.gamma_mag >= 0.0, "gamma_mag must be non-negative");
  require(p.gamma_ml >= 0.0, "gamma_ml must be non-negative");
  require(p.p0_pos > 0.0, "p0_pos must be positive");
  require(p.p0_heading > 0.0, "p0_heading must be positive");
  require(p.p0_bias > 0.0, "p0_bias must be positive");
  require(p.p0_landmark > 0.0, "p0_landmark must be positive");
  require(p.process_noise_scale > 0.0, "process_noise_scale must be positive");
  return p;
}

const char* to_string(TraversalDirection d) {
  return d == TraversalDirection::kForward ? "forward" : "backward";
}

std::optional<TraversalDirection> traversal_direction_from_string(const std::string& s) {
  if (s == "forward") return TraversalDirection::kForward;
  if (s == "backward") return TraversalDirection::kBackward;
  return std::nullopt;
}

double wrap_angle(double angle) {
  const double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

bool is_symmetric(const MatX& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

double min_eigenvalue_sym(const MatX& m) {
  Eigen::SelfAdjointEigenSolver<MatX> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

bool is_positive_semidefinite(const MatX& m, double rel_tol) {
  const double scale = std::max(1.0, m.trace());
  return min_eigenvalue_sym(m) >= -rel_tol * scale;
}

bool is_valid_belief(const StateBelief& belief) {
  if (belief.mean.size() != belief.dim()) return false;
  if (belief.cov.rows() != belief.dim() || belief.cov.cols() != belief.dim()) return false;
  if (!belief.mean.allFinite() || !belief.cov.allFinite()) return false;
  return is_symmetric(belief.cov) && is_positive_semidefinite(belief.cov);
}

std::string format_number(double value) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

std::string format_number(long value) {
  char buf[24];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

double parse_number(const std::string& text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || text.empty()) {
    throw DataError("not a number: '" + text + "'");
  }
  return value;
}

long parse_integer(const std::string& text) {
  long value = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || text.empty()) {
    throw DataError("not an integer: '" + text + "'");
  }
  return value;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace magslam
