#pragma once

#include "magslam/core.hpp"
#include "magslam/simworld.hpp"
#include "magslam/slam.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace magslam {

/// A parsed measurement file: header metadata, the sample rows, and the
/// optional ground-truth pose columns.
struct Dataset {
  double rate_hz = 10.0;
  std::string units_note = "t:step dt:s yp:m y_omega:rad/s ym:uT gt:m,rad";
  std::vector<SensorSample> samples;
  std::vector<Vec2> gt_position;   // empty when the file has no truth columns
  std::vector<double> gt_heading;

  bool has_truth() const { return !gt_position.empty(); }
};

/// Columns: t,dt,yp_x,yp_y,y_omega,ym_x,ym_y,ym_z[,gt_px,gt_py,gt_psi].
/// Numbers are written in shortest round-trip form, so
/// parse_dataset(write_dataset(d)) reproduces d bit-exactly.
void write_dataset(std::ostream& out, const Dataset& dataset);
void write_dataset_file(const std::string& path, const Dataset& dataset);

/// Strict parser: rejects wrong column counts, non-numeric fields and
/// non-increasing indices, reporting the offending line number.
Dataset parse_dataset(std::istream& in, const std::string& name = "<stream>");
Dataset parse_dataset_file(const std::string& path);

/// Per-step weight rows captured for plotting.
struct WeightTrace {
  std::vector<WeightRow> rows;
};

/// Emits <prefix>_trajectory.csv, <prefix>_events.csv,
/// <prefix>_landmarks.csv and, when a trace is given,
/// <prefix>_weights.csv.
void write_results(const SmoothedTrajectory& trajectory, const WeightTrace* weights,
                   const std::string& prefix);

/// Plain-text key-value configuration: one `key = value` per line,
/// '#' comments. Returns pairs in file order (later duplicates win on
/// apply).
std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in,
                                                              const std::string& name);
std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path);

/// Applies one scenario key; throws DataError on unknown keys or bad values.
void apply_scenario_key(ScenarioSpec& spec, const std::string& key, const std::string& value);

/// Applies one tuning-parameter key (table names: n_lc, n_lag, n_dist,
/// sigma_m, gamma_mag, gamma, gamma_ml, sigma_lc, sigma_p, sigma_omega,
/// p0_pos, p0_heading, p0_bias, p0_landmark, process_noise_scale).
void apply_param_key(SlamParams& params, const std::string& key, const std::string& value);

}  // namespace magslam
