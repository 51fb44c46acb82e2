#pragma once

#include "magslam/core.hpp"

#include <optional>
#include <span>

namespace magslam {

/// View over the filtering state the detector needs at time t:
/// every past magnetometer reading, the current position estimates for the
/// same instants, and the position covariance block at t.
struct DetectionContext {
  std::span<const Vec3> mag_history;   // y_m for sample indices 0..t
  std::span<const Vec2> pos_history;   // position estimate bound to each index
  Mat2 pos_cov_now = Mat2::Zero();     // position block of P at time t
  std::optional<long> last_accepted_t; // previous accepted loop closure

  long t() const { return static_cast<long>(mag_history.size()) - 1; }
};

/// 180 degree rotation about the z axis: (x, y, z) -> (-x, -y, z).
inline Vec3 yaw_flip(const Vec3& m) { return Vec3(-m.x(), -m.y(), m.z()); }

/// Forward magnetic similarity between the windows ending at i and t:
/// prod_n exp(-|y_m[i-n] - y_m[t-n]|^2 / (12 sigma_m^2)), n = 0..n_lc-1.
/// Accumulated in the log domain.
double magnetic_weight_fwd(const DetectionContext& ctx, long i, long t,
                           int n_lc, double sigma_m);

/// Backward variant: the stored window is traversed in reverse and the
/// current readings are yaw-flipped:
/// prod_n exp(-|y_m[i+n_lc-1-n] - flip(y_m[t-n])|^2 / (12 sigma_m^2)).
double magnetic_weight_bwd(const DetectionContext& ctx, long i, long t,
                           int n_lc, double sigma_m);

/// Position similarity exp(-|p_t - p_i|^2 / (8 sigma_wp^2)) with sigma_wp
/// the mean of the square roots of the diagonal of pos_cov_now. The
/// degenerate sigma_wp = 0 limit returns 1 for equal points, else 0.
double position_weight(const Vec2& p_t, const Vec2& p_i, const Mat2& pos_cov_now);

/// All weights for candidates i = 0..t-n_lag; empty when t < n_lag.
/// Combined weight is max(w_fwd*w_pos, w_bwd*w_pos), with 0 for windows
/// that do not fit.
WeightRow weight_row(const DetectionContext& ctx, const SlamParams& params);

/// Field excitation at t: per-component max minus min over the n_lc+1
/// readings y_m[t-n], n = 0..n_lc, then the Euclidean norm of that range
/// vector.
double magnetic_excitation(const DetectionContext& ctx, long t, int n_lc);

struct LoopClosureCandidate {
  long time_then = 0;
  TraversalDirection direction = TraversalDirection::kForward;
  double weight = 0.0;
};

/// Applies the acceptance threshold and the two pre-filter gates
/// (min distance from the previous acceptance, min field excitation).
/// Returns the argmax candidate, ties broken toward the smallest i.
/// For backward matches the partner instant is i + n_lc - 1.
std::optional<LoopClosureCandidate> detect(const DetectionContext& ctx,
                                           const WeightRow& weights,
                                           const SlamParams& params);

}  // namespace magslam
