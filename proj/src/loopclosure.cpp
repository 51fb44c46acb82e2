#include "magslam/loopclosure.hpp"

#include <cmath>

namespace magslam {

namespace {

void check_index(const DetectionContext& ctx, long idx, const char* what) {
  if (idx < 0 || idx >= static_cast<long>(ctx.mag_history.size())) {
    throw std::domain_error(std::string(what) + " window out of bounds");
  }
}

}  // namespace

double magnetic_weight_fwd(const DetectionContext& ctx, long i, long t,
                           int n_lc, double sigma_m) {
  check_index(ctx, i - (n_lc - 1), "forward magnetic");
  check_index(ctx, t, "forward magnetic");
  if (t - (n_lc - 1) < 0) throw std::domain_error("forward magnetic window out of bounds");
  double sq_sum = 0.0;
  for (int n = 0; n < n_lc; ++n) {
    sq_sum += (ctx.mag_history[i - n] - ctx.mag_history[t - n]).squaredNorm();
  }
  return std::exp(-sq_sum / (12.0 * sigma_m * sigma_m));
}

double magnetic_weight_bwd(const DetectionContext& ctx, long i, long t,
                           int n_lc, double sigma_m) {
  check_index(ctx, i, "backward magnetic");
  check_index(ctx, i + n_lc - 1, "backward magnetic");
  check_index(ctx, t, "backward magnetic");
  if (t - (n_lc - 1) < 0) throw std::domain_error("backward magnetic window out of bounds");
  double sq_sum = 0.0;
  for (int n = 0; n < n_lc; ++n) {
    sq_sum += (ctx.mag_history[i + n_lc - 1 - n] - yaw_flip(ctx.mag_history[t - n]))
                  .squaredNorm();
  }
  return std::exp(-sq_sum / (12.0 * sigma_m * sigma_m));
}

double position_weight(const Vec2& p_t, const Vec2& p_i, const Mat2& pos_cov_now) {
  const double d0 = pos_cov_now(0, 0);
  const double d1 = pos_cov_now(1, 1);
  if (d0 < 0.0 || d1 < 0.0) {
    throw std::domain_error("position covariance has negative diagonal");
  }
  const double sigma_wp = 0.5 * (std::sqrt(d0) + std::sqrt(d1));
  if (sigma_wp == 0.0) {
    return p_t == p_i ? 1.0 : 0.0;
  }
  return std::exp(-(p_t - p_i).squaredNorm() / (8.0 * sigma_wp * sigma_wp));
}

WeightRow weight_row(const DetectionContext& ctx, const SlamParams& params) {
  WeightRow row;
  row.t = ctx.t();
  {
    const double d0 = std::max(0.0, ctx.pos_cov_now(0, 0));
    const double d1 = std::max(0.0, ctx.pos_cov_now(1, 1));
    row.sigma_wp = 0.5 * (std::sqrt(d0) + std::sqrt(d1));
  }
  const long last = row.t - params.n_lag;
  if (last < 0) return row;

  const long count = last + 1;
  row.w_fwd.assign(count, 0.0);
  row.w_bwd.assign(count, 0.0);
  row.w_pos.assign(count, 0.0);
  row.w_combined.assign(count, 0.0);

  const Vec2 p_t = ctx.pos_history[row.t];
  const bool window_fits_t = row.t - (params.n_lc - 1) >= 0;
  for (long i = 0; i <= last; ++i) {
    row.w_pos[i] = position_weight(p_t, ctx.pos_history[i], ctx.pos_cov_now);
    if (window_fits_t && i - (params.n_lc - 1) >= 0) {
      row.w_fwd[i] = magnetic_weight_fwd(ctx, i, row.t, params.n_lc, params.sigma_m);
    }
    if (window_fits_t && i + params.n_lc - 1 <= last) {
      row.w_bwd[i] = magnetic_weight_bwd(ctx, i, row.t, params.n_lc, params.sigma_m);
    }
    row.w_combined[i] = std::max(row.w_fwd[i] * row.w_pos[i],
                                 row.w_bwd[i] * row.w_pos[i]);
  }
  return row;
}

double magnetic_excitation(const DetectionContext& ctx, long t, int n_lc) {
  check_index(ctx, t - n_lc, "excitation");
  check_index(ctx, t, "excitation");
  Vec3 lo = ctx.mag_history[t];
  Vec3 hi = ctx.mag_history[t];
  for (int n = 1; n <= n_lc; ++n) {
    lo = lo.cwiseMin(ctx.mag_history[t - n]);
    hi = hi.cwiseMax(ctx.mag_history[t - n]);
  }
  return (hi - lo).norm();
}

std::optional<LoopClosureCandidate> detect(const DetectionContext& ctx,
                                           const WeightRow& weights,
                                           const SlamParams& params) {
  if (weights.w_combined.empty()) return std::nullopt;

  long best = -1;
  double best_w = 0.0;
  for (long i = 0; i < static_cast<long>(weights.w_combined.size()); ++i) {
    if (weights.w_combined[i] > best_w) {
      best = i;
      best_w = weights.w_combined[i];
    }
  }
  if (best < 0 || !(best_w > params.gamma)) return std::nullopt;
  if (ctx.last_accepted_t &&
      weights.t - *ctx.last_accepted_t < params.n_dist) {
    return std::nullopt;
  }
  if (magnetic_excitation(ctx, weights.t, params.n_lc) < params.gamma_mag) {
    return std::nullopt;
  }

  const bool forward = weights.w_fwd[best] * weights.w_pos[best] >=
                       weights.w_bwd[best] * weights.w_pos[best];
  LoopClosureCandidate cand;
  cand.direction = forward ? TraversalDirection::kForward : TraversalDirection::kBackward;
  cand.time_then = forward ? best : best + params.n_lc - 1;
  cand.weight = best_w;
  return cand;
}

}  // namespace magslam
