#include "magslam/io.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

namespace magslam {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

[[noreturn]] void fail_at(const std::string& name, long line_no, const std::string& message) {
  throw DataError(name + ":" + std::to_string(line_no) + ": " + message);
}

const std::vector<std::string> kSampleColumns = {
    "t", "dt", "yp_x", "yp_y", "y_omega", "ym_x", "ym_y", "ym_z"};
const std::vector<std::string> kTruthColumns = {"gt_px", "gt_py", "gt_psi"};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  return out;
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& dataset) {
  out << "# magslam dataset\n";
  out << "# rate_hz " << format_number(dataset.rate_hz) << "\n";
  out << "# units " << dataset.units_note << "\n";
  out << "t,dt,yp_x,yp_y,y_omega,ym_x,ym_y,ym_z";
  if (dataset.has_truth()) out << ",gt_px,gt_py,gt_psi";
  out << "\n";
  for (size_t i = 0; i < dataset.samples.size(); ++i) {
    const SensorSample& s = dataset.samples[i];
    out << format_number(s.index) << ',' << format_number(s.dt) << ','
        << format_number(s.odom_pos.x()) << ',' << format_number(s.odom_pos.y()) << ','
        << format_number(s.odom_gyro) << ',' << format_number(s.mag.x()) << ','
        << format_number(s.mag.y()) << ',' << format_number(s.mag.z());
    if (dataset.has_truth()) {
      out << ',' << format_number(dataset.gt_position[i].x()) << ','
          << format_number(dataset.gt_position[i].y()) << ','
          << format_number(dataset.gt_heading[i]);
    }
    out << "\n";
  }
}

void write_dataset_file(const std::string& path, const Dataset& dataset) {
  auto out = open_out(path);
  write_dataset(out, dataset);
}

Dataset parse_dataset(std::istream& in, const std::string& name) {
  Dataset dataset;
  std::string line;
  long line_no = 0;
  bool header_seen = false;
  bool with_truth = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::stringstream ss(line.substr(1));
      std::string key;
      ss >> key;
      if (key == "rate_hz") {
        std::string value;
        ss >> value;
        if (!value.empty()) dataset.rate_hz = parse_number(value);
      } else if (key == "units") {
        std::string rest;
        std::getline(ss, rest);
        if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
        dataset.units_note = rest;
      }
      continue;
    }
    const auto fields = split_csv(line);
    if (!header_seen) {
      if (fields.size() != kSampleColumns.size() &&
          fields.size() != kSampleColumns.size() + kTruthColumns.size()) {
        fail_at(name, line_no, "header must list 8 or 11 columns, got " +
                                   std::to_string(fields.size()));
      }
      for (size_t c = 0; c < kSampleColumns.size(); ++c) {
        if (fields[c] != kSampleColumns[c]) {
          fail_at(name, line_no, "missing column " + kSampleColumns[c]);
        }
      }
      with_truth = fields.size() == kSampleColumns.size() + kTruthColumns.size();
      if (with_truth) {
        for (size_t c = 0; c < kTruthColumns.size(); ++c) {
          if (fields[kSampleColumns.size() + c] != kTruthColumns[c]) {
            fail_at(name, line_no, "missing column " + kTruthColumns[c]);
          }
        }
      }
      header_seen = true;
      continue;
    }

    const size_t expected = kSampleColumns.size() + (with_truth ? kTruthColumns.size() : 0);
    if (fields.size() != expected) {
      fail_at(name, line_no, "expected " + std::to_string(expected) + " fields, got " +
                                 std::to_string(fields.size()));
    }
    SensorSample s;
    try {
      s.index = parse_integer(fields[0]);
      s.dt = parse_number(fields[1]);
      s.odom_pos = Vec2(parse_number(fields[2]), parse_number(fields[3]));
      s.odom_gyro = parse_number(fields[4]);
      s.mag = Vec3(parse_number(fields[5]), parse_number(fields[6]), parse_number(fields[7]));
      if (with_truth) {
        dataset.gt_position.emplace_back(parse_number(fields[8]), parse_number(fields[9]));
        dataset.gt_heading.push_back(parse_number(fields[10]));
      }
    } catch (const DataError& e) {
      fail_at(name, line_no, e.what());
    }
    if (!is_valid_sample(s)) {
      fail_at(name, line_no, "invalid sample (dt <= 0 or non-finite entry)");
    }
    if (!dataset.samples.empty() && s.index <= dataset.samples.back().index) {
      fail_at(name, line_no, "sample index not strictly increasing");
    }
    dataset.samples.push_back(s);
  }
  if (!header_seen) throw DataError(name + ": missing header row");
  return dataset;
}

Dataset parse_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset: " + path);
  return parse_dataset(in, path);
}

void write_results(const SmoothedTrajectory& trajectory, const WeightTrace* weights,
                   const std::string& prefix) {
  {
    auto out = open_out(prefix + "_trajectory.csv");
    out << "t,p_x,p_y,psi,var_px,var_py\n";
    for (size_t tau = 0; tau < trajectory.size(); ++tau) {
      out << format_number(static_cast<long>(tau)) << ','
          << format_number(trajectory.means[tau](0)) << ','
          << format_number(trajectory.means[tau](1)) << ','
          << format_number(trajectory.means[tau](2)) << ','
          << format_number(trajectory.covs[tau](0, 0)) << ','
          << format_number(trajectory.covs[tau](1, 1)) << "\n";
    }
  }
  {
    auto out = open_out(prefix + "_events.csv");
    out << "k,t_now,t_then,direction,weight\n";
    for (const auto& e : trajectory.events) {
      out << format_number(static_cast<long>(e.landmark_index)) << ','
          << format_number(e.time_now) << ',' << format_number(e.time_then) << ','
          << to_string(e.direction) << ',' << format_number(e.weight) << "\n";
    }
  }
  {
    auto out = open_out(prefix + "_landmarks.csv");
    out << "k,l_x,l_y,var_x,var_y\n";
    for (int k = 0; k < trajectory.landmark_count; ++k) {
      const Vec2 l = trajectory.landmark(k);
      const Mat2 cov = trajectory.landmark_cov(k);
      out << format_number(static_cast<long>(k)) << ',' << format_number(l.x()) << ','
          << format_number(l.y()) << ',' << format_number(cov(0, 0)) << ','
          << format_number(cov(1, 1)) << "\n";
    }
  }
  if (weights) {
    auto out = open_out(prefix + "_weights.csv");
    out << "t,i,w_fwd,w_bwd,w_pos,w_combined\n";
    for (const WeightRow& row : weights->rows) {
      for (size_t i = 0; i < row.candidates(); ++i) {
        out << format_number(row.t) << ',' << format_number(static_cast<long>(i)) << ','
            << format_number(row.w_fwd[i]) << ',' << format_number(row.w_bwd[i]) << ','
            << format_number(row.w_pos[i]) << ',' << format_number(row.w_combined[i])
            << "\n";
      }
    }
  }
}

std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in,
                                                              const std::string& name) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  long line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail_at(name, line_no, "expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      fail_at(name, line_no, "expected key = value");
    }
    entries.emplace_back(key, value);
  }
  return entries;
}

std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config: " + path);
  return parse_config(in, path);
}

void apply_scenario_key(ScenarioSpec& spec, const std::string& key, const std::string& value) {
  try {
    if (key == "kind") {
      if (value == "square") spec.kind = TrajectoryKind::kSquare;
      else if (value == "figure-eight") spec.kind = TrajectoryKind::kFigureEight;
      else if (value == "corridor-loop") spec.kind = TrajectoryKind::kCorridorLoop;
      else if (value == "from-file") spec.kind = TrajectoryKind::kFromFile;
      else throw DataError("unknown trajectory kind: " + value);
    } else if (key == "size") spec.size_m = parse_number(value);
    else if (key == "laps") spec.laps = parse_number(value);
    else if (key == "speed") spec.speed = parse_number(value);
    else if (key == "dt") spec.dt = parse_number(value);
    else if (key == "seed") spec.seed = static_cast<std::uint64_t>(parse_integer(value));
    else if (key == "bias_omega") spec.bias_omega = parse_number(value);
    else if (key == "sigma_p") spec.sigma_p = parse_number(value);
    else if (key == "sigma_omega") spec.sigma_omega = parse_number(value);
    else if (key == "mag_noise") spec.mag_noise = parse_number(value);
    else if (key == "anomaly_count") spec.anomaly_count = static_cast<int>(parse_integer(value));
    else if (key == "anomaly_strength") spec.anomaly_strength = parse_number(value);
    else if (key == "field_length_scale") spec.field_length_scale = parse_number(value);
    else if (key == "background_x") spec.background.x() = parse_number(value);
    else if (key == "background_y") spec.background.y() = parse_number(value);
    else if (key == "background_z") spec.background.z() = parse_number(value);
    else if (key == "path") spec.path = value;
    else throw DataError("unknown scenario key: " + key);
  } catch (const DataError&) {
    throw;
  }
}

void apply_param_key(SlamParams& params, const std::string& key, const std::string& value) {
  if (key == "sigma_p") params.sigma_p = parse_number(value);
  else if (key == "sigma_omega") params.sigma_omega = parse_number(value);
  else if (key == "sigma_lc") params.sigma_lc = parse_number(value);
  else if (key == "sigma_m") params.sigma_m = parse_number(value);
  else if (key == "n_lc") params.n_lc = static_cast<int>(parse_integer(value));
  else if (key == "n_lag") params.n_lag = static_cast<int>(parse_integer(value));
  else if (key == "n_dist") params.n_dist = static_cast<int>(parse_integer(value));
  else if (key == "gamma") params.gamma = parse_number(value);
  else if (key == "gamma_mag") params.gamma_mag = parse_number(value);
  else if (key == "gamma_ml") params.gamma_ml = parse_number(value);
  else if (key == "p0_pos") params.p0_pos = parse_number(value);
  else if (key == "p0_heading") params.p0_heading = parse_number(value);
  else if (key == "p0_bias") params.p0_bias = parse_number(value);
  else if (key == "p0_landmark") params.p0_landmark = parse_number(value);
  else if (key == "process_noise_scale") params.process_noise_scale = parse_number(value);
  else throw DataError("unknown parameter key: " + key);
}

}  // namespace magslam
