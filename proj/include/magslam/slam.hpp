#pragma once

#include "magslam/core.hpp"
#include "magslam/ekf.hpp"
#include "magslam/loopclosure.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace magslam {

/// Structured state-transition Jacobian: identity plus the heading column
/// of the position rows and the -dt bias coupling of the heading row.
struct StateTransition {
  Vec2 dp_dpsi = Vec2::Zero();
  double dt = 0.0;

  /// Dense n x n matrix (tests and oracles).
  MatX dense(int n) const;
};

/// One filter record: moments after the time update (predicted) and after
/// any measurement updates at the same instant (filtered), plus the
/// transition that produced the record. Predicted moments are stored only
/// when an update ran; otherwise they equal the filtered ones.
struct StepRecord {
  VecX filtered_mean;
  MatX filtered_cov;
  StateTransition transition;  // unused at record 0
  bool has_measurement_update = false;
  VecX predicted_mean_storage;
  MatX predicted_cov_storage;

  const VecX& predicted_mean() const {
    return has_measurement_update ? predicted_mean_storage : filtered_mean;
  }
  const MatX& predicted_cov() const {
    return has_measurement_update ? predicted_cov_storage : filtered_cov;
  }
};

/// Full forward-pass history: records[tau] for tau = 0..N where record 0 is
/// the prior and record t+1 absorbs sample t. Sample t's magnetometer
/// reading is bound to record t+1, the belief current when the reading is
/// evaluated for loop closures.
struct FilterHistory {
  std::vector<StepRecord> records;
  std::vector<LoopClosureEvent> events;
  std::vector<SensorSample> samples;

  int landmark_count() const {
    return records.empty() ? 0 : (static_cast<int>(records.back().filtered_mean.size()) - 4) / 2;
  }
};

/// Fixed-interval smoothing result over the same record timeline.
struct SmoothedTrajectory {
  std::vector<VecX> means;
  std::vector<MatX> covs;
  std::vector<LoopClosureEvent> events;
  int landmark_count = 0;

  size_t size() const { return means.size(); }
  Vec2 position(size_t tau) const { return means[tau].head<2>(); }
  double heading(size_t tau) const { return means[tau](2); }
  Vec2 landmark(int k) const { return means.back().segment<2>(4 + 2 * k); }
  Mat2 landmark_cov(int k) const { return covs.back().block<2, 2>(4 + 2 * k, 4 + 2 * k); }
};

/// Prior belief: zero mean, blockdiag(p0_pos I2, p0_heading, p0_bias), K = 0.
StateBelief init_belief(const SlamParams& params);

struct RerunResult {
  FilterHistory history;
  UpdateDiagnostics tentative_diagnostics;
};

/// Re-executes the filter from scratch over the sample buffer with the
/// given events (accepted ones plus the tentative event last). All
/// landmarks are augmented at tau = 0 so the state dimension is fixed;
/// each event contributes measurement updates at time_then and time_now.
/// Returns the rebuilt history and the diagnostics of the tentative
/// event's update at its time_now.
RerunResult rerun_with_loop_closure(const std::vector<SensorSample>& samples,
                                    const std::vector<LoopClosureEvent>& events,
                                    const SlamParams& params);

/// Rauch-Tung-Striebel backward pass over a complete history. The last
/// smoothed state equals the last filtered state exactly. Landmark rows of
/// the smoother gain are structurally [0 I], which the implementation
/// exploits; the result is identical to the dense recursion.
SmoothedTrajectory rts_smooth(const FilterHistory& history);

/// Pure odometry integration from the origin pose; the drift baseline.
/// Returns positions for records 0..N.
std::vector<Vec2> dead_reckon(const std::vector<SensorSample>& samples);

using EventCallback = std::function<void(const SmoothedTrajectory&, const LoopClosureEvent&)>;
using WeightRowCallback = std::function<void(const WeightRow&)>;

/// Counts of detection outcomes over a session.
struct SessionStats {
  long candidates = 0;            // passed threshold + gates 1 and 2
  long accepted = 0;
  long rejected_likelihood = 0;   // failed the marginal-likelihood gate
  long rejected_numerical = 0;    // re-run aborted numerically
};

/// Online SLAM session owning the filter history. Single-threaded use;
/// distinct sessions are independent.
class SlamSession {
 public:
  explicit SlamSession(const SlamParams& params);

  /// Processes one sample: time update, loop-closure detection, and on a
  /// detection the re-run / marginal-likelihood gate / commit-or-undo
  /// cycle followed by a smoothing pass. Returns the accepted event, if any.
  std::optional<LoopClosureEvent> step(const SensorSample& sample);

  /// Smoothed trajectory over everything processed so far.
  SmoothedTrajectory smooth() const;

  const FilterHistory& history() const { return history_; }
  const StateBelief& belief() const { return belief_; }
  const SessionStats& stats() const { return stats_; }
  long samples_processed() const { return static_cast<long>(history_.samples.size()); }

  void set_event_callback(EventCallback cb) { on_event_ = std::move(cb); }
  void set_weight_row_callback(WeightRowCallback cb) { on_weight_row_ = std::move(cb); }

 private:
  SlamParams params_;
  ProcessNoise noise_;
  FilterHistory history_;
  StateBelief belief_;
  std::vector<Vec3> mag_history_;
  std::vector<Vec2> pos_history_;
  std::optional<long> last_accepted_t_;
  SessionStats stats_;
  EventCallback on_event_;
  WeightRowCallback on_weight_row_;
};

/// Runs a session over a whole stream and returns the final smoothed
/// trajectory. Numerical failures are rethrown with the failing sample
/// index. Stats, if wanted, are reported through the optional out-param.
SmoothedTrajectory run_slam(const std::vector<SensorSample>& samples,
                            const SlamParams& params,
                            SessionStats* stats = nullptr,
                            const EventCallback& on_event = {},
                            const WeightRowCallback& on_weight_row = {});

}  // namespace magslam
