#pragma once

// Key-value configuration covering the tracker, motion noise, evaluation and
// refiner settings. One `key = value` per line, `#` starts a comment, lists
// are comma separated.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cyctrack/error.hpp"
#include "cyctrack/geometry.hpp"
#include "cyctrack/metrics.hpp"
#include "cyctrack/oaa.hpp"
#include "cyctrack/refiner.hpp"

namespace cyctrack {

struct RefinerSettings {
  std::vector<double> image_scope_radii = default_scope_radii(GridKind::kImage);
  std::vector<double> bev_scope_radii = default_scope_radii(GridKind::kBev);
  int fusion_heads = 2;
  int fusion_points = 4;
  double fusion_offset_scale = 0.5;
};

struct AppConfig {
  TrackerConfig tracker;
  std::vector<double> level_breakpoints = default_area_breakpoints();
  EvalConfig eval;
  RefinerSettings refiner;

  void validate() const {
    tracker.validate();
    eval.validate();
    for (std::size_t i = 1; i < level_breakpoints.size(); ++i) {
      if (!(level_breakpoints[i] > level_breakpoints[i - 1])) {
        throw ContractViolation("level_breakpoints must be strictly increasing");
      }
    }
    if (static_cast<int>(level_breakpoints.size()) + 1 != tracker.num_levels) {
      throw ContractViolation("level_breakpoints must define exactly num_levels levels");
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_real(const std::string& text) {
  const std::string t = trim(text);
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(t, &used);
  if (used != t.size()) throw std::invalid_argument("trailing characters");
  return v;
}

inline int parse_int(const std::string& text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  const int v = std::stoi(t, &used);
  if (used != t.size()) throw std::invalid_argument("trailing characters");
  return v;
}

inline bool parse_bool(const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw std::invalid_argument("expected true or false");
}

inline std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!trim(item).empty()) out.push_back(parse_real(item));
  }
  return out;
}

inline std::string format_real(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  // Shortest text that reads back to the same double.
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format_real(v[i]);
  }
  return s;
}

using Setter = std::function<void(AppConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& config_setters() {
  static const std::map<std::string, Setter> kSetters = {
      {"tracker.w_img", [](AppConfig& c, const std::string& v) { c.tracker.clue_weights.w_img = parse_real(v); }},
      {"tracker.w_bev", [](AppConfig& c, const std::string& v) { c.tracker.clue_weights.w_bev = parse_real(v); }},
      {"tracker.w_head", [](AppConfig& c, const std::string& v) { c.tracker.clue_weights.w_head = parse_real(v); }},
      {"tracker.sim_threshold", [](AppConfig& c, const std::string& v) { c.tracker.sim_threshold = parse_real(v); }},
      {"tracker.iou_threshold", [](AppConfig& c, const std::string& v) { c.tracker.iou_threshold = parse_real(v); }},
      {"tracker.buffer_ratios", [](AppConfig& c, const std::string& v) { c.tracker.buffer_ratios = BufferRatioTable(parse_list(v)); }},
      {"tracker.init_score_threshold", [](AppConfig& c, const std::string& v) { c.tracker.init_score_threshold = parse_real(v); }},
      {"tracker.max_age", [](AppConfig& c, const std::string& v) { c.tracker.max_age = parse_int(v); }},
      {"tracker.ema_alpha", [](AppConfig& c, const std::string& v) { c.tracker.ema_alpha = parse_real(v); }},
      {"tracker.num_levels", [](AppConfig& c, const std::string& v) { c.tracker.num_levels = parse_int(v); }},
      {"tracker.level_breakpoints", [](AppConfig& c, const std::string& v) { c.level_breakpoints = parse_list(v); }},
      {"tracker.multi_clue", [](AppConfig& c, const std::string& v) { c.tracker.use_multi_clue = parse_bool(v); }},
      {"tracker.buffer", [](AppConfig& c, const std::string& v) { c.tracker.use_buffer = parse_bool(v); }},
      {"tracker.cascade", [](AppConfig& c, const std::string& v) { c.tracker.use_cascade = parse_bool(v); }},
      {"noise.process_pos_std", [](AppConfig& c, const std::string& v) { c.tracker.noise.process_pos_std = parse_real(v); }},
      {"noise.process_vel_std", [](AppConfig& c, const std::string& v) { c.tracker.noise.process_vel_std = parse_real(v); }},
      {"noise.process_yaw_std", [](AppConfig& c, const std::string& v) { c.tracker.noise.process_yaw_std = parse_real(v); }},
      {"noise.process_dim_std", [](AppConfig& c, const std::string& v) { c.tracker.noise.process_dim_std = parse_real(v); }},
      {"noise.meas_pos_std", [](AppConfig& c, const std::string& v) { c.tracker.noise.meas_pos_std = parse_real(v); }},
      {"noise.meas_yaw_std", [](AppConfig& c, const std::string& v) { c.tracker.noise.meas_yaw_std = parse_real(v); }},
      {"noise.meas_dim_std", [](AppConfig& c, const std::string& v) { c.tracker.noise.meas_dim_std = parse_real(v); }},
      {"noise.init_vel_var", [](AppConfig& c, const std::string& v) { c.tracker.noise.init_vel_var = parse_real(v); }},
      {"eval.match_distance", [](AppConfig& c, const std::string& v) { c.eval.match_distance = parse_real(v); }},
      {"eval.recall_thresholds", [](AppConfig& c, const std::string& v) { c.eval.recall_thresholds = parse_int(v); }},
      {"eval.mostly_tracked_ratio", [](AppConfig& c, const std::string& v) { c.eval.mostly_tracked_ratio = parse_real(v); }},
      {"refiner.image_scope_radii", [](AppConfig& c, const std::string& v) { c.refiner.image_scope_radii = parse_list(v); }},
      {"refiner.bev_scope_radii", [](AppConfig& c, const std::string& v) { c.refiner.bev_scope_radii = parse_list(v); }},
      {"refiner.fusion_heads", [](AppConfig& c, const std::string& v) { c.refiner.fusion_heads = parse_int(v); }},
      {"refiner.fusion_points", [](AppConfig& c, const std::string& v) { c.refiner.fusion_points = parse_int(v); }},
      {"refiner.fusion_offset_scale", [](AppConfig& c, const std::string& v) { c.refiner.fusion_offset_scale = parse_real(v); }},
  };
  return kSetters;
}

}  // namespace detail

/// Parses a config stream on top of the built-in defaults. Unknown keys and
/// unparsable values raise DataError naming the line.
inline AppConfig parse_config(std::istream& in, AppConfig base = {}) {
  const auto& setters = detail::config_setters();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) {
      throw DataError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    try {
      it->second(base, value);
    } catch (const std::exception& e) {
      throw DataError("config line " + std::to_string(lineno) + ": bad value for '" + key +
                      "': " + e.what());
    }
  }
  try {
    base.validate();
  } catch (const ContractViolation& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  return base;
}

inline AppConfig load_config(const std::string& path, AppConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path);
  return parse_config(in, std::move(base));
}

/// Writes every key with its current value and a short description.
inline std::string render_config(const AppConfig& c) {
  using detail::format_list;
  using detail::format_real;
  std::ostringstream o;
  const auto& t = c.tracker;
  const auto& n = t.noise;
  o << "# cyctrack configuration. Unlisted keys keep their built-in defaults.\n\n"
    << "# Stage 1: weights of the image / BEV / head cosine similarities.\n"
    << "tracker.w_img = " << format_real(t.clue_weights.w_img) << "\n"
    << "tracker.w_bev = " << format_real(t.clue_weights.w_bev) << "\n"
    << "tracker.w_head = " << format_real(t.clue_weights.w_head) << "\n"
    << "# Minimum weighted similarity for a stage-1 pair (-inf disables the gate).\n"
    << "tracker.sim_threshold = " << format_real(t.sim_threshold) << "\n"
    << "# Minimum buffered BEV IoU for a stage-2 pair.\n"
    << "tracker.iou_threshold = " << format_real(t.iou_threshold) << "\n"
    << "# Footprint buffer ratio per scale level, smallest level first.\n"
    << "tracker.buffer_ratios = " << format_list(t.buffer_ratios.ratios()) << "\n"
    << "# Unmatched detections scoring above this start new tracklets.\n"
    << "tracker.init_score_threshold = " << format_real(t.init_score_threshold) << "\n"
    << "# Frames an unmatched tracklet survives (0 deletes it immediately).\n"
    << "tracker.max_age = " << t.max_age << "\n"
    << "# Appearance smoothing: new = alpha * old + (1 - alpha) * detection.\n"
    << "tracker.ema_alpha = " << format_real(t.ema_alpha) << "\n"
    << "tracker.num_levels = " << t.num_levels << "\n"
    << "# BEV footprint area breakpoints (m^2) used when a detection has no level.\n"
    << "tracker.level_breakpoints = " << format_list(c.level_breakpoints) << "\n"
    << "# Association components.\n"
    << "tracker.multi_clue = " << (t.use_multi_clue ? "true" : "false") << "\n"
    << "tracker.buffer = " << (t.use_buffer ? "true" : "false") << "\n"
    << "tracker.cascade = " << (t.use_cascade ? "true" : "false") << "\n\n"
    << "# Kalman filter standard deviations (per step / per measurement).\n"
    << "noise.process_pos_std = " << format_real(n.process_pos_std) << "\n"
    << "noise.process_vel_std = " << format_real(n.process_vel_std) << "\n"
    << "noise.process_yaw_std = " << format_real(n.process_yaw_std) << "\n"
    << "noise.process_dim_std = " << format_real(n.process_dim_std) << "\n"
    << "noise.meas_pos_std = " << format_real(n.meas_pos_std) << "\n"
    << "noise.meas_yaw_std = " << format_real(n.meas_yaw_std) << "\n"
    << "noise.meas_dim_std = " << format_real(n.meas_dim_std) << "\n"
    << "# Initial velocity variance of a new tracklet (m^2/s^2).\n"
    << "noise.init_vel_var = " << format_real(n.init_vel_var) << "\n\n"
    << "# Evaluation: BEV center distance for a true positive (m).\n"
    << "eval.match_distance = " << format_real(c.eval.match_distance) << "\n"
    << "# Number of evenly spaced recall levels in (0, 1].\n"
    << "eval.recall_thresholds = " << c.eval.recall_thresholds << "\n"
    << "# Fraction of visible frames a trajectory needs to count as mostly tracked.\n"
    << "eval.mostly_tracked_ratio = " << format_real(c.eval.mostly_tracked_ratio) << "\n\n"
    << "# Refiner: mask scope radius (cells) per level, smallest level first.\n"
    << "refiner.image_scope_radii = " << format_list(c.refiner.image_scope_radii) << "\n"
    << "refiner.bev_scope_radii = " << format_list(c.refiner.bev_scope_radii) << "\n"
    << "# Deformable fusion: attention heads, sampling points per head, offset scale.\n"
    << "refiner.fusion_heads = " << c.refiner.fusion_heads << "\n"
    << "refiner.fusion_points = " << c.refiner.fusion_points << "\n"
    << "refiner.fusion_offset_scale = " << format_real(c.refiner.fusion_offset_scale) << "\n";
  return o.str();
}

}  // namespace cyctrack
