// magslam command line: simulate scenarios, run the filter/smoother over
// datasets, evaluate against ground truth, and sweep Monte Carlo runs.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

#include "magslam/eval.hpp"
#include "magslam/io.hpp"
#include "magslam/simworld.hpp"
#include "magslam/slam.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace magslam;
using nlohmann::json;

using KeyValues = std::vector<std::pair<std::string, std::string>>;

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

KeyValues parse_overrides(const std::vector<std::string>& raw) {
  KeyValues entries;
  for (const std::string& item : raw) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
      throw CLI::ValidationError("expected key=value, got '" + item + "'");
    }
    entries.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  return entries;
}

struct ParamOverlay {
  SlamParams params;
  bool sigma_p_explicit = false;
  bool sigma_omega_explicit = false;

  void apply(const std::string& key, const std::string& value) {
    apply_param_key(params, key, value);
    if (key == "sigma_p") sigma_p_explicit = true;
    if (key == "sigma_omega") sigma_omega_explicit = true;
  }
};

// Config-file keys: scenario keys apply to the scenario; "slam.<name>"
// applies to the tuning parameters. CLI --param/--scenario come last.
void apply_config_entries(const KeyValues& entries, ScenarioSpec* scenario,
                          ParamOverlay* overlay,
                          const std::function<bool(const std::string&, const std::string&)>&
                              extra = {}) {
  for (const auto& [key, value] : entries) {
    if (extra && extra(key, value)) continue;
    if (key.rfind("slam.", 0) == 0) {
      if (!overlay) throw DataError("tuning key not allowed here: " + key);
      overlay->apply(key.substr(5), value);
    } else {
      if (!scenario) throw DataError("scenario key not allowed here: " + key);
      apply_scenario_key(*scenario, key, value);
    }
  }
}

void write_json_summary(const std::string& path, const json& summary) {
  if (path == "-") {
    std::cout << summary.dump(2) << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << summary.dump(2) << "\n";
}

json params_json(const SlamParams& p) {
  return json{{"sigma_p", p.sigma_p},
              {"sigma_omega", p.sigma_omega},
              {"sigma_lc", p.sigma_lc},
              {"sigma_m", p.sigma_m},
              {"n_lc", p.n_lc},
              {"n_lag", p.n_lag},
              {"n_dist", p.n_dist},
              {"gamma", p.gamma},
              {"gamma_mag", p.gamma_mag},
              {"gamma_ml", p.gamma_ml},
              {"p0_pos", p.p0_pos},
              {"p0_heading", p.p0_heading},
              {"p0_bias", p.p0_bias},
              {"p0_landmark", p.p0_landmark},
              {"process_noise_scale", p.process_noise_scale}};
}

int cmd_simulate(const std::string& config_path, const std::vector<std::string>& overrides,
                 std::optional<long> seed, const std::string& out_path,
                 const std::string& json_path) {
  ScenarioSpec spec;
  if (!config_path.empty()) {
    apply_config_entries(parse_config_file(config_path), &spec, nullptr);
  }
  for (const auto& [key, value] : parse_overrides(overrides)) {
    apply_scenario_key(spec, key, value);
  }
  if (seed) spec.seed = static_cast<std::uint64_t>(*seed);
  validate_scenario(spec);

  const Scenario world = build_scenario(spec);
  Dataset dataset;
  dataset.rate_hz = 1.0 / spec.dt;
  dataset.samples = world.samples;
  for (size_t t = 0; t + 1 < world.truth.size(); ++t) {
    dataset.gt_position.push_back(world.truth.position[t]);
    dataset.gt_heading.push_back(world.truth.heading[t]);
  }
  write_dataset_file(out_path, dataset);

  if (!json_path.empty()) {
    write_json_summary(json_path,
                       json{{"command", "simulate"},
                            {"kind", to_string(spec.kind)},
                            {"samples", dataset.samples.size()},
                            {"seed", spec.seed},
                            {"output", out_path}});
  }
  return 0;
}

int cmd_slam(const std::string& input, const std::string& prefix,
             const std::string& config_path, const std::vector<std::string>& params_raw,
             bool with_weights, const std::string& json_path) {
  const auto start = std::chrono::steady_clock::now();
  ParamOverlay overlay;
  if (!config_path.empty()) {
    apply_config_entries(parse_config_file(config_path), nullptr, &overlay,
                         [&](const std::string& key, const std::string& value) {
                           // allow bare tuning keys in a slam-only config
                           if (key.rfind("slam.", 0) == 0) return false;
                           overlay.apply(key, value);
                           return true;
                         });
  }
  for (const auto& [key, value] : parse_overrides(params_raw)) overlay.apply(key, value);
  const SlamParams params = validate_params(overlay.params);

  const Dataset dataset = parse_dataset_file(input);
  if (dataset.samples.empty()) throw DataError(input + ": no samples");

  WeightTrace trace;
  WeightRowCallback weight_cb;
  if (with_weights) {
    weight_cb = [&trace](const WeightRow& row) { trace.rows.push_back(row); };
  }
  SessionStats stats;
  const SmoothedTrajectory smoothed = run_slam(dataset.samples, params, &stats, {}, weight_cb);
  write_results(smoothed, with_weights ? &trace : nullptr, prefix);

  json summary{{"command", "slam"},
               {"input", input},
               {"samples", dataset.samples.size()},
               {"events", smoothed.events.size()},
               {"landmarks", smoothed.landmark_count},
               {"candidates", stats.candidates},
               {"rejected_likelihood", stats.rejected_likelihood},
               {"rejected_numerical", stats.rejected_numerical},
               {"runtime_s", seconds_since(start)},
               {"final_heading_wrapped_rad", wrap_angle(smoothed.means.back()(2))},
               {"params", params_json(params)}};

  if (dataset.has_truth()) {
    std::vector<Vec2> estimate;
    std::vector<Vec2> truth;
    for (size_t t = 0; t < dataset.gt_position.size(); ++t) {
      estimate.push_back(smoothed.position(t));
      truth.push_back(dataset.gt_position[t]);
    }
    const double slam_rmse = rmse(procrustes_align(estimate, truth), truth);
    const std::vector<Vec2> odo = dead_reckon(dataset.samples);
    std::vector<Vec2> odo_matched(odo.begin(), odo.begin() + truth.size());
    summary["rmse_m"] = slam_rmse;
    summary["odom_rmse_m"] = rmse(procrustes_align(odo_matched, truth), truth);
  }
  if (!json_path.empty()) write_json_summary(json_path, summary);
  return 0;
}

int cmd_eval(const std::string& estimate_path, const std::string& truth_path,
             const std::string& json_path) {
  // estimate: a *_trajectory.csv; truth: a dataset with gt columns
  std::ifstream in(estimate_path);
  if (!in) throw DataError("cannot open trajectory: " + estimate_path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(estimate_path + ": empty file");
  if (line.rfind("t,p_x,p_y", 0) != 0) {
    throw DataError(estimate_path + ": not a trajectory file");
  }
  std::vector<Vec2> estimate;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 6) {
      throw DataError(estimate_path + ":" + std::to_string(line_no) + ": expected 6 fields");
    }
    estimate.emplace_back(parse_number(fields[1]), parse_number(fields[2]));
  }

  const Dataset dataset = parse_dataset_file(truth_path);
  if (!dataset.has_truth()) throw DataError(truth_path + ": no ground-truth columns");
  if (estimate.size() < dataset.gt_position.size()) {
    throw DataError("trajectory shorter than the ground truth");
  }
  std::vector<Vec2> truth = dataset.gt_position;
  estimate.resize(truth.size());

  const double aligned_rmse = rmse(procrustes_align(estimate, truth), truth);
  const std::vector<Vec2> odo_full = dead_reckon(dataset.samples);
  std::vector<Vec2> odo(odo_full.begin(), odo_full.begin() + truth.size());
  const double odom_rmse = rmse(procrustes_align(odo, truth), truth);

  std::cout << "rmse_m " << format_number(aligned_rmse) << "\n";
  std::cout << "odom_rmse_m " << format_number(odom_rmse) << "\n";
  if (!json_path.empty()) {
    write_json_summary(json_path, json{{"command", "eval"},
                                       {"rmse_m", aligned_rmse},
                                       {"odom_rmse_m", odom_rmse},
                                       {"poses", truth.size()}});
  }
  return 0;
}

int cmd_mc(const std::string& config_path, const std::string& out_path,
           const std::string& json_path) {
  McConfig config;
  ParamOverlay overlay;
  bool have_sweep = false;

  const KeyValues entries = parse_config_file(config_path);
  apply_config_entries(
      entries, &config.base_scenario, &overlay,
      [&](const std::string& key, const std::string& value) {
        if (key == "sweep") {
          if (value == "bias") config.swept = SweepParameter::kBias;
          else if (value == "pos-noise-var") config.swept = SweepParameter::kPosNoiseVar;
          else if (value == "gyro-noise-var") config.swept = SweepParameter::kGyroNoiseVar;
          else throw DataError("unknown sweep parameter: " + value);
          have_sweep = true;
          return true;
        }
        if (key == "values") {
          std::stringstream ss(value);
          std::string item;
          while (std::getline(ss, item, ',')) {
            const auto b = item.find_first_not_of(" \t");
            const auto e = item.find_last_not_of(" \t");
            if (b == std::string::npos) throw DataError("empty sweep value");
            config.values.push_back(parse_number(item.substr(b, e - b + 1)));
          }
          return true;
        }
        if (key == "runs") {
          config.runs = static_cast<int>(parse_integer(value));
          return true;
        }
        if (key == "mc_seed") {
          config.seed = static_cast<std::uint64_t>(parse_integer(value));
          return true;
        }
        return false;
      });
  if (!have_sweep) throw DataError(config_path + ": missing 'sweep' key");
  if (config.values.empty()) throw DataError(config_path + ": missing 'values' key");

  // the filter noise model tracks the scenario corruption unless overridden
  if (!overlay.sigma_p_explicit) overlay.params.sigma_p = config.base_scenario.sigma_p;
  if (!overlay.sigma_omega_explicit) {
    overlay.params.sigma_omega = config.base_scenario.sigma_omega;
  }
  config.base_params = validate_params(overlay.params);

  const auto start = std::chrono::steady_clock::now();
  const std::vector<McRunResult> results = monte_carlo(config);

  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write file: " + out_path);
  out << "sweep_value,run,slam_rmse_m,odom_rmse_m,n_loop_closures,status\n";
  for (const auto& r : results) {
    out << format_number(r.sweep_value) << ',' << format_number(static_cast<long>(r.run))
        << ',' << format_number(r.slam_rmse) << ',' << format_number(r.odom_rmse) << ','
        << format_number(static_cast<long>(r.n_loop_closures)) << ',' << r.status << "\n";
  }
  out.close();

  if (!json_path.empty()) {
    json sweeps = json::array();
    for (double value : config.values) {
      std::vector<double> slam_oks;
      std::vector<double> odom_all;
      long failures = 0;
      for (const auto& r : results) {
        if (r.sweep_value != value) continue;
        odom_all.push_back(r.odom_rmse);
        if (r.status == "ok") slam_oks.push_back(r.slam_rmse);
        else ++failures;
      }
      json entry{{"value", value},
                 {"runs", config.runs},
                 {"failures", failures},
                 {"odom_rmse_median_m", median(odom_all)}};
      if (!slam_oks.empty()) entry["slam_rmse_median_m"] = median(slam_oks);
      sweeps.push_back(entry);
    }
    write_json_summary(json_path, json{{"command", "mc"},
                                       {"sweep", to_string(config.swept)},
                                       {"seed", config.seed},
                                       {"runtime_s", seconds_since(start)},
                                       {"output", out_path},
                                       {"per_value", sweeps}});
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"one-dimensional magnetic-field SLAM toolkit"};
  app.require_subcommand(1);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
  std::string sim_config;
  std::vector<std::string> sim_overrides;
  std::optional<long> sim_seed;
  std::string sim_out = "dataset.csv";
  std::string sim_json;
  simulate->add_option("--config", sim_config, "scenario config file");
  simulate->add_option("--scenario", sim_overrides, "scenario override key=value");
  simulate->add_option("--seed", sim_seed, "scenario seed");
  simulate->add_option("-o,--out", sim_out, "output dataset path");
  simulate->add_option("--json-summary", sim_json, "summary JSON path or -");

  // slam
  auto* slam_cmd = app.add_subcommand("slam", "run the filter and smoother on a dataset");
  std::string slam_input;
  std::string slam_prefix = "results";
  std::string slam_config;
  std::vector<std::string> slam_params;
  bool slam_weights = false;
  std::string slam_json;
  slam_cmd->add_option("-i,--input", slam_input, "dataset CSV")->required();
  slam_cmd->add_option("-o,--out", slam_prefix, "output prefix");
  slam_cmd->add_option("--config", slam_config, "tuning config file");
  slam_cmd->add_option("--param", slam_params, "tuning override key=value");
  slam_cmd->add_flag("--weights", slam_weights, "emit the per-step weight rows");
  slam_cmd->add_option("--json-summary", slam_json, "summary JSON path or -");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "align a trajectory against ground truth");
  std::string eval_estimate;
  std::string eval_truth;
  std::string eval_json;
  eval_cmd->add_option("--estimate", eval_estimate, "trajectory CSV")->required();
  eval_cmd->add_option("--truth", eval_truth, "dataset CSV with gt columns")->required();
  eval_cmd->add_option("--json-summary", eval_json, "summary JSON path or -");

  // mc
  auto* mc_cmd = app.add_subcommand("mc", "Monte Carlo sweep");
  std::string mc_config;
  std::string mc_out = "mc.csv";
  std::string mc_json;
  mc_cmd->add_option("--config", mc_config, "sweep config file")->required();
  mc_cmd->add_option("-o,--out", mc_out, "output CSV path");
  mc_cmd->add_option("--json-summary", mc_json, "summary JSON path or -");

  try {
    app.parse(argc, argv);
    if (simulate->parsed()) {
      return cmd_simulate(sim_config, sim_overrides, sim_seed, sim_out, sim_json);
    }
    if (slam_cmd->parsed()) {
      return cmd_slam(slam_input, slam_prefix, slam_config, slam_params, slam_weights,
                      slam_json);
    }
    if (eval_cmd->parsed()) return cmd_eval(eval_estimate, eval_truth, eval_json);
    if (mc_cmd->parsed()) return cmd_mc(mc_config, mc_out, mc_json);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const magslam::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const magslam::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
