#pragma once

#include <span>
#include <vector>

#include "cyctrack/metrics.hpp"
#include "cyctrack/oaa.hpp"
#include "cyctrack/simulator.hpp"

namespace cyctrack {

/// Tracklets associated or born in the current frame, in id order.
inline TrackFrame emit_frame(const Tracker& tracker, FrameId frame_id) {
  TrackFrame out;
  out.frame_id = frame_id;
  for (const Tracklet& t : tracker.tracklets()) {
    if (t.time_since_update != 0) continue;
    out.predictions.push_back({t.id, state_to_box(t.kalman), t.score, t.scale_level});
  }
  return out;
}

struct TrackingRun {
  std::vector<TrackFrame> frames;
  std::vector<StepResult> steps;
};

/// Tracks a whole scenario frame by frame with a fresh tracker.
inline TrackingRun track_scenario(const Scenario& sc, const TrackerConfig& cfg) {
  Tracker tracker(cfg);
  TrackingRun run;
  double last_t = 0.0;
  for (std::size_t f = 0; f < sc.ground_truth.size(); ++f) {
    const GroundTruthFrame& gt = sc.ground_truth[f];
    const double dt = f == 0 ? sc.config.frame_dt : gt.timestamp - last_t;
    last_t = gt.timestamp;
    run.steps.push_back(tracker.step(gt.frame_id, sc.detections[f], dt));
    run.frames.push_back(emit_frame(tracker, gt.frame_id));
  }
  return run;
}

/// The ablation grid over the three association components, in the order
/// (multi-clue, buffer, cascade) from all disabled to all enabled.
struct AblationVariant {
  bool multi_clue;
  bool buffer;
  bool cascade;
};

inline std::vector<AblationVariant> ablation_grid() {
  std::vector<AblationVariant> rows;
  for (int mask = 0; mask < 8; ++mask) {
    rows.push_back({(mask & 4) != 0, (mask & 2) != 0, (mask & 1) != 0});
  }
  return rows;
}

inline TrackerConfig with_variant(TrackerConfig cfg, const AblationVariant& v) {
  cfg.use_multi_clue = v.multi_clue;
  cfg.use_buffer = v.buffer;
  cfg.use_cascade = v.cascade;
  return cfg;
}

/// TrackerConfig used for the synthetic benchmark: the library defaults with
/// a coast window long enough to bridge the suites' occlusions.
inline TrackerConfig benchmark_tracker_config() {
  TrackerConfig cfg;
  cfg.max_age = 4;
  return cfg;
}

}  // namespace cyctrack
