#include "magslam/slam.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace magslam {

MatX StateTransition::dense(int n) const {
  MatX f = MatX::Identity(n, n);
  f(0, 2) = dp_dpsi(0);
  f(1, 2) = dp_dpsi(1);
  f(2, 3) = -dt;
  return f;
}

StateBelief init_belief(const SlamParams& params) {
  StateBelief belief;
  belief.landmark_count = 0;
  belief.mean = VecX::Zero(4);
  belief.cov = MatX::Zero(4, 4);
  belief.cov(0, 0) = params.p0_pos;
  belief.cov(1, 1) = params.p0_pos;
  belief.cov(2, 2) = params.p0_heading;
  belief.cov(3, 3) = params.p0_bias;
  return belief;
}

namespace {

StateTransition transition_for(const StateBelief& prior, const SensorSample& sample) {
  return {rotation_matrix_derivative(prior.heading()) * sample.odom_pos, sample.dt};
}

// Right-multiplies the top `rows` rows of P by F^T using the sparse
// structure; equals (P F^T).topRows(rows).
MatX top_rows_times_ft(const MatX& p, int rows, const StateTransition& f) {
  MatX a = p.topRows(rows);
  a.col(0) += f.dp_dpsi(0) * a.col(2);
  a.col(1) += f.dp_dpsi(1) * a.col(2);
  a.col(2) -= f.dt * a.col(3);
  return a;
}

}  // namespace

RerunResult rerun_with_loop_closure(const std::vector<SensorSample>& samples,
                                    const std::vector<LoopClosureEvent>& events,
                                    const SlamParams& params) {
  const long n_samples = static_cast<long>(samples.size());
  for (const auto& e : events) {
    if (e.time_then < 0 || e.time_now >= n_samples || e.time_then >= e.time_now) {
      throw std::invalid_argument("loop-closure event outside the sample buffer");
    }
  }

  // Update schedule: record index -> events updating there (stable order).
  std::vector<std::vector<int>> schedule(n_samples + 1);
  for (size_t e = 0; e < events.size(); ++e) {
    schedule[events[e].time_then + 1].push_back(static_cast<int>(e));
    schedule[events[e].time_now + 1].push_back(static_cast<int>(e));
  }

  StateBelief belief = init_belief(params);
  for (size_t e = 0; e < events.size(); ++e) {
    belief = augment_landmark(belief, params.p0_landmark);
  }
  const ProcessNoise noise = process_noise_from(params);
  const int tentative = static_cast<int>(events.size()) - 1;

  RerunResult result;
  result.history.samples = samples;
  result.history.events = events;
  result.history.records.reserve(n_samples + 1);
  {
    StepRecord prior;
    prior.filtered_mean = belief.mean;
    prior.filtered_cov = belief.cov;
    result.history.records.push_back(std::move(prior));
  }

  bool have_diag = false;
  for (long tau = 1; tau <= n_samples; ++tau) {
    const SensorSample& sample = samples[tau - 1];
    StepRecord record;
    record.transition = transition_for(belief, sample);
    time_update_in_place(belief, sample, noise);
    if (schedule[tau].empty()) {
      record.filtered_mean = belief.mean;
      record.filtered_cov = belief.cov;
    } else {
      record.has_measurement_update = true;
      record.predicted_mean_storage = belief.mean;
      record.predicted_cov_storage = belief.cov;
      for (int e : schedule[tau]) {
        auto [updated, diag] =
            landmark_measurement_update(belief, events[e].landmark_index, params.sigma_lc);
        belief = std::move(updated);
        if (e == tentative && events[e].time_now + 1 == tau) {
          result.tentative_diagnostics = diag;
          have_diag = true;
        }
      }
      record.filtered_mean = belief.mean;
      record.filtered_cov = belief.cov;
    }
    result.history.records.push_back(std::move(record));
  }
  if (!events.empty() && !have_diag) {
    throw std::logic_error("tentative event update never executed");
  }
  return result;
}

namespace {

// Shared backward recursion. The covariance recursion is optional: the
// smoother gains depend only on filter quantities, so skipping it leaves
// the smoothed means bit-identical.
SmoothedTrajectory rts_smooth_impl(const FilterHistory& history, bool with_covariance) {
  const auto& records = history.records;
  if (records.empty()) throw std::invalid_argument("empty history");
  if (records.size() != history.samples.size() + 1) {
    throw std::invalid_argument("history records do not match sample count");
  }

  const long last = static_cast<long>(records.size()) - 1;
  const int n = static_cast<int>(records.back().filtered_mean.size());
  const int n_land = n - 4;

  SmoothedTrajectory out;
  out.events = history.events;
  out.landmark_count = n_land / 2;
  out.means.resize(records.size());
  out.means[last] = records[last].filtered_mean;
  if (with_covariance) {
    out.covs.resize(records.size());
    out.covs[last] = records[last].filtered_cov;
  }

  Eigen::LLT<MatX> llt;
  MatX w_top(4, n);
  MatX c_top_t(n, 4);
  MatX c_top(4, n);
  VecX dx(n);
  MatX dp;
  MatX ce_top;
  if (with_covariance) {
    dp.resize(n, n);
    ce_top.resize(4, n);
  }

  for (long tau = last - 1; tau >= 0; --tau) {
    const StepRecord& cur = records[tau];
    const StepRecord& next = records[tau + 1];

    // Landmark rows of the gain are [0 I]; only the top 4 rows need the
    // solve: C_top = (P_filt F^T).topRows(4) * P_pred^{-1}.
    w_top = top_rows_times_ft(cur.filtered_cov, 4, next.transition);

    llt.compute(next.predicted_cov());
    bool solved = false;
    if (llt.info() == Eigen::Success) {
      c_top_t.noalias() = llt.solve(w_top.transpose());
      solved = c_top_t.allFinite();
    }
    if (!solved) {
      Eigen::LDLT<MatX> fallback(next.predicted_cov());
      c_top_t = fallback.solve(w_top.transpose());
      if (fallback.info() != Eigen::Success || !c_top_t.allFinite()) {
        MatX regularized = next.predicted_cov();
        regularized.diagonal().array() += 1e-12 * std::max(1.0, regularized.trace());
        fallback.compute(regularized);
        c_top_t = fallback.solve(w_top.transpose());
        if (fallback.info() != Eigen::Success || !c_top_t.allFinite()) {
          throw NumericalError("singular predicted covariance in smoother");
        }
      }
    }
    c_top = c_top_t.transpose();

    dx = out.means[tau + 1] - next.predicted_mean();
    VecX mean = cur.filtered_mean;
    mean.head<4>() += c_top * dx;
    mean.tail(n_land) += dx.tail(n_land);
    if (!mean.allFinite()) throw NumericalError("smoother produced non-finite state");
    out.means[tau] = std::move(mean);

    if (!with_covariance) continue;

    dp = out.covs[tau + 1] - next.predicted_cov();
    ce_top.noalias() = c_top * dp;
    MatX cov = cur.filtered_cov;
    cov.topLeftCorner(4, 4) += ce_top * c_top.transpose();
    if (n_land > 0) {
      cov.topRightCorner(4, n_land) += ce_top.rightCols(n_land);
      cov.bottomLeftCorner(n_land, 4) += ce_top.rightCols(n_land).transpose();
      cov.bottomRightCorner(n_land, n_land) += dp.bottomRightCorner(n_land, n_land);
    }
    cov = 0.5 * (cov + cov.transpose()).eval();
    if (!cov.allFinite()) throw NumericalError("smoother produced non-finite state");
    out.covs[tau] = std::move(cov);
  }
  return out;
}

}  // namespace

SmoothedTrajectory rts_smooth(const FilterHistory& history) {
  return rts_smooth_impl(history, true);
}

std::vector<Vec2> dead_reckon(const std::vector<SensorSample>& samples) {
  std::vector<Vec2> positions;
  positions.reserve(samples.size() + 1);
  Vec2 p = Vec2::Zero();
  double psi = 0.0;
  positions.push_back(p);
  for (const auto& s : samples) {
    p += rotation_matrix(psi) * s.odom_pos;
    psi += s.dt * s.odom_gyro;
    positions.push_back(p);
  }
  return positions;
}

SlamSession::SlamSession(const SlamParams& params)
    : params_(validate_params(params)), noise_(process_noise_from(params_)) {
  belief_ = init_belief(params_);
  StepRecord prior;
  prior.filtered_mean = belief_.mean;
  prior.filtered_cov = belief_.cov;
  history_.records.push_back(std::move(prior));
}

std::optional<LoopClosureEvent> SlamSession::step(const SensorSample& sample) {
  const long t = static_cast<long>(history_.samples.size());
  if (sample.index != t) {
    throw DataError("sample index " + std::to_string(sample.index) +
                    " not contiguous with history (expected " + std::to_string(t) + ")");
  }
  if (!is_valid_sample(sample)) {
    throw DataError("invalid sample at index " + std::to_string(sample.index));
  }

  history_.samples.push_back(sample);
  StepRecord record;
  record.transition = transition_for(belief_, sample);
  time_update_in_place(belief_, sample, noise_);
  record.filtered_mean = belief_.mean;
  record.filtered_cov = belief_.cov;
  history_.records.push_back(std::move(record));
  mag_history_.push_back(sample.mag);
  pos_history_.push_back(belief_.position());

  DetectionContext ctx{mag_history_, pos_history_, belief_.position_cov(), last_accepted_t_};
  const WeightRow row = weight_row(ctx, params_);
  if (on_weight_row_) on_weight_row_(row);
  const auto candidate = detect(ctx, row, params_);
  if (!candidate) return std::nullopt;

  ++stats_.candidates;
  LoopClosureEvent tentative;
  tentative.landmark_index = static_cast<int>(history_.events.size());
  tentative.time_now = t;
  tentative.time_then = candidate->time_then;
  tentative.direction = candidate->direction;
  tentative.weight = candidate->weight;

  std::vector<LoopClosureEvent> events = history_.events;
  events.push_back(tentative);

  RerunResult rerun;
  try {
    rerun = rerun_with_loop_closure(history_.samples, events, params_);
  } catch (const NumericalError&) {
    ++stats_.rejected_numerical;
    return std::nullopt;  // undo: main-line state untouched
  }
  if (rerun.tentative_diagnostics.marginal_likelihood < params_.gamma_ml) {
    ++stats_.rejected_likelihood;
    return std::nullopt;  // undo
  }

  // Commit the re-run as the new main line.
  history_ = std::move(rerun.history);
  const StepRecord& final_record = history_.records.back();
  belief_.landmark_count = history_.landmark_count();
  belief_.mean = final_record.filtered_mean;
  belief_.cov = final_record.filtered_cov;
  last_accepted_t_ = t;
  ++stats_.accepted;

  // The smoothing pass refreshes the position history used by the weight
  // computation; covariances are only produced when a listener wants the
  // full snapshot. The means are identical either way.
  const SmoothedTrajectory smoothed =
      rts_smooth_impl(history_, static_cast<bool>(on_event_));
  for (long i = 0; i <= t; ++i) {
    pos_history_[i] = smoothed.means[i + 1].head<2>();
  }
  if (on_event_) on_event_(smoothed, tentative);
  return tentative;
}

SmoothedTrajectory SlamSession::smooth() const { return rts_smooth(history_); }

SmoothedTrajectory run_slam(const std::vector<SensorSample>& samples,
                            const SlamParams& params, SessionStats* stats,
                            const EventCallback& on_event,
                            const WeightRowCallback& on_weight_row) {
  if (samples.empty()) throw DataError("empty sample stream");
  SlamSession session(params);
  if (on_event) session.set_event_callback(on_event);
  if (on_weight_row) session.set_weight_row_callback(on_weight_row);
  for (const auto& sample : samples) {
    try {
      session.step(sample);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " (sample " +
                           std::to_string(sample.index) + ")");
    }
  }
  if (stats) *stats = session.stats();
  return session.smooth();
}

}  // namespace magslam
