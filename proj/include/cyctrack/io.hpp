#pragma once

// Line-delimited JSON logs: detections (one record per detection), ground
// truth (one record per frame) and tracker output (one record per track
// per frame). Reals are written in shortest round-trip form.

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cyctrack/error.hpp"
#include "cyctrack/geometry.hpp"
#include "cyctrack/metrics.hpp"
#include "cyctrack/oaa.hpp"
#include "cyctrack/simulator.hpp"

namespace cyctrack::io {

using nlohmann::json;

inline json box_to_json(const Box3D& b) {
  return json::array({b.cx, b.cy, b.cz, b.length, b.width, b.height, b.yaw});
}

inline Box3D box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 7) {
    throw DataError("box must be an array of 7 numbers (cx, cy, cz, l, w, h, yaw)");
  }
  const auto v = j.get<std::vector<double>>();
  try {
    return Box3D(v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
  } catch (const ContractViolation& e) {
    throw DataError(e.what());
  }
}

inline json detection_to_json(const Detection& d) {
  json j;
  j["frame_id"] = d.frame_id;
  j["timestamp"] = d.timestamp;
  j["box"] = box_to_json(d.box);
  j["score"] = d.score;
  j["scale_level"] = d.scale_level;
  j["e_img"] = d.appearance.e_img;
  j["e_bev"] = d.appearance.e_bev;
  j["e_head"] = d.appearance.e_head;
  return j;
}

/// A missing `scale_level` is derived from the footprint area.
inline Detection detection_from_json(const json& j, std::span<const double> breakpoints) {
  Detection d;
  d.frame_id = j.at("frame_id").get<FrameId>();
  d.timestamp = j.at("timestamp").get<double>();
  d.box = box_from_json(j.at("box"));
  d.score = j.at("score").get<double>();
  if (!(d.score >= 0.0 && d.score <= 1.0)) throw DataError("score must lie in [0, 1]");
  if (j.contains("scale_level") && !j["scale_level"].is_null()) {
    d.scale_level = j["scale_level"].get<int>();
  } else {
    d.scale_level = scale_level_from_area(d.box.footprint_area(), breakpoints);
  }
  d.appearance.e_img = j.at("e_img").get<std::vector<double>>();
  d.appearance.e_bev = j.at("e_bev").get<std::vector<double>>();
  d.appearance.e_head = j.at("e_head").get<std::vector<double>>();
  try {
    d.appearance.validate();
  } catch (const ContractViolation& e) {
    throw DataError(e.what());
  }
  return d;
}

inline json gt_frame_to_json(const GroundTruthFrame& f) {
  json objs = json::array();
  for (const auto& o : f.objects) {
    objs.push_back({{"gt_id", o.gt_id}, {"box", box_to_json(o.box)}, {"visible", o.visible}});
  }
  return {{"frame_id", f.frame_id}, {"timestamp", f.timestamp}, {"objects", objs}};
}

inline GroundTruthFrame gt_frame_from_json(const json& j) {
  GroundTruthFrame f;
  f.frame_id = j.at("frame_id").get<FrameId>();
  f.timestamp = j.value("timestamp", 0.0);
  for (const auto& o : j.at("objects")) {
    f.objects.push_back({o.at("gt_id").get<std::int64_t>(), box_from_json(o.at("box")),
                         o.value("visible", true)});
  }
  return f;
}

inline json track_to_json(FrameId frame_id, const TrackPrediction& p) {
  return {{"frame_id", frame_id},
          {"track_id", p.track_id},
          {"box", box_to_json(p.box)},
          {"score", p.score},
          {"scale_level", p.scale_level}};
}

namespace detail {

template <typename Fn>
void for_each_line(std::istream& in, const std::string& what, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line), lineno);
    } catch (const json::exception& e) {
      throw DataError(what + " line " + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(what + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace detail

/// Streams a detection log one frame at a time. Records must be grouped by
/// ascending frame id.
class DetectionLogReader {
 public:
  DetectionLogReader(std::istream& in, std::vector<double> breakpoints)
      : in_(in), breakpoints_(std::move(breakpoints)) {}

  struct Frame {
    FrameId frame_id = 0;
    double timestamp = 0.0;
    std::vector<Detection> detections;
  };

  std::optional<Frame> next() {
    Frame frame;
    bool have = false;
    if (pending_) {
      frame.frame_id = pending_->frame_id;
      frame.timestamp = pending_->timestamp;
      frame.detections.push_back(std::move(*pending_));
      pending_.reset();
      have = true;
    }
    std::string line;
    while (std::getline(in_, line)) {
      ++lineno_;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      Detection d;
      try {
        d = detection_from_json(json::parse(line), breakpoints_);
      } catch (const json::exception& e) {
        throw DataError("detections line " + std::to_string(lineno_) + ": " + e.what());
      } catch (const DataError& e) {
        throw DataError("detections line " + std::to_string(lineno_) + ": " + e.what());
      }
      if (last_frame_ && d.frame_id < *last_frame_) {
        throw DataError("detections line " + std::to_string(lineno_) +
                        ": records are not grouped by ascending frame_id");
      }
      if (!have) {
        frame.frame_id = d.frame_id;
        frame.timestamp = d.timestamp;
        have = true;
      } else if (d.frame_id != frame.frame_id) {
        last_frame_ = frame.frame_id;
        pending_ = std::move(d);
        return frame;
      }
      last_frame_ = d.frame_id;
      frame.detections.push_back(std::move(d));
    }
    if (!have) return std::nullopt;
    last_frame_ = frame.frame_id;
    return frame;
  }

 private:
  std::istream& in_;
  std::vector<double> breakpoints_;
  std::optional<Detection> pending_;
  std::optional<FrameId> last_frame_;
  std::size_t lineno_ = 0;
};

inline void write_detections(std::ostream& out, std::span<const std::vector<Detection>> frames) {
  for (const auto& frame : frames) {
    for (const auto& d : frame) out << detection_to_json(d).dump() << '\n';
  }
}

inline std::vector<Detection> read_detections(std::istream& in,
                                              std::span<const double> breakpoints) {
  std::vector<Detection> out;
  detail::for_each_line(in, "detections", [&](const json& j, std::size_t) {
    out.push_back(detection_from_json(j, breakpoints));
  });
  return out;
}

inline void write_ground_truth(std::ostream& out, std::span<const GroundTruthFrame> frames) {
  for (const auto& f : frames) out << gt_frame_to_json(f).dump() << '\n';
}

inline std::vector<GroundTruthFrame> read_ground_truth(std::istream& in) {
  std::vector<GroundTruthFrame> out;
  detail::for_each_line(in, "ground truth", [&](const json& j, std::size_t) {
    out.push_back(gt_frame_from_json(j));
  });
  return out;
}

inline void write_track_frame(std::ostream& out, const TrackFrame& f) {
  for (const auto& p : f.predictions) out << track_to_json(f.frame_id, p).dump() << '\n';
}

/// Groups track records into frames (ascending frame id). Duplicate
/// (frame_id, track_id) pairs raise DataError.
inline std::vector<TrackFrame> read_tracks(std::istream& in) {
  std::map<FrameId, TrackFrame> frames;
  std::set<std::pair<FrameId, TrackId>> seen;
  detail::for_each_line(in, "tracks", [&](const json& j, std::size_t) {
    const FrameId f = j.at("frame_id").get<FrameId>();
    TrackPrediction p;
    p.track_id = j.at("track_id").get<TrackId>();
    p.box = box_from_json(j.at("box"));
    p.score = j.at("score").get<double>();
    p.scale_level = j.value("scale_level", 0);
    if (!seen.emplace(f, p.track_id).second) {
      throw DataError("duplicate (frame_id, track_id) = (" + std::to_string(f) + ", " +
                      std::to_string(p.track_id) + ")");
    }
    auto& tf = frames[f];
    tf.frame_id = f;
    tf.predictions.push_back(p);
  });
  std::vector<TrackFrame> out;
  for (auto& [id, f] : frames) out.push_back(std::move(f));
  return out;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

}  // namespace cyctrack::io
