#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cyctrack/appearance.hpp"
#include "cyctrack/assignment.hpp"
#include "cyctrack/error.hpp"
#include "cyctrack/geometry.hpp"
#include "cyctrack/motion.hpp"

namespace cyctrack {

using FrameId = std::int64_t;
using TrackId = std::int64_t;

struct Detection {
  Box3D box;
  double score = 1.0;
  AppearanceState appearance;
  int scale_level = 0;
  double timestamp = 0.0;
  FrameId frame_id = 0;
};

struct Tracklet {
  TrackId id = 0;
  KalmanState kalman;
  AppearanceState appearance;
  int scale_level = 0;
  int hits = 0;
  int time_since_update = 0;
  FrameId created_at = 0;
  double score = 0.0;  // score of the last associated detection
};

struct TrackerConfig {
  ClueWeights clue_weights;
  double sim_threshold = 0.3;
  double iou_threshold = 0.1;
  BufferRatioTable buffer_ratios;
  double init_score_threshold = 0.5;
  int max_age = 0;
  double ema_alpha = 0.9;
  int num_levels = 5;
  NoiseConfig noise;

  // Component switches for ablations.
  bool use_multi_clue = true;
  bool use_buffer = true;
  bool use_cascade = true;

  void validate() const {
    clue_weights.validate();
    noise.validate();
    if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
      throw ContractViolation("iou_threshold must lie in [0, 1]");
    }
    if (!(init_score_threshold >= 0.0 && init_score_threshold <= 1.0)) {
      throw ContractViolation("init_score_threshold must lie in [0, 1]");
    }
    if (!(ema_alpha >= 0.0 && ema_alpha <= 1.0)) {
      throw ContractViolation("ema_alpha must lie in [0, 1]");
    }
    if (max_age < 0) throw ContractViolation("max_age must be non-negative");
    if (num_levels < 1) throw ContractViolation("num_levels must be at least 1");
  }
};

enum class MatchStage : int { kMultiClue = 1, kScaleAware = 2 };

struct Match {
  TrackId track_id = 0;
  std::size_t det_idx = 0;
  MatchStage stage = MatchStage::kMultiClue;
  int det_level = 0;
  int track_level = 0;  // tracklet level before the update

  friend bool operator==(const Match&, const Match&) = default;
};

struct Birth {
  TrackId track_id = 0;
  std::size_t det_idx = 0;
};

struct StepResult {
  std::vector<Match> matches;  // sorted by det_idx
  std::vector<Birth> births;
};

/// Index pair into the detection / tracklet lists handed to a matcher.
struct IndexPair {
  std::size_t det = 0;
  std::size_t trk = 0;

  friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

/// Convex blend of each clue: alpha * old + (1 - alpha) * new.
inline Tracklet update_appearance(Tracklet t, const Detection& d, double alpha) {
  auto blend = [alpha](std::vector<double>& old_v, const std::vector<double>& new_v) {
    if (old_v.size() != new_v.size()) {
      throw ContractViolation("update_appearance: dimension mismatch");
    }
    for (std::size_t i = 0; i < old_v.size(); ++i) {
      old_v[i] = alpha * old_v[i] + (1.0 - alpha) * new_v[i];
    }
  };
  blend(t.appearance.e_img, d.appearance.e_img);
  blend(t.appearance.e_bev, d.appearance.e_bev);
  blend(t.appearance.e_head, d.appearance.e_head);
  return t;
}

namespace detail {

inline double level_ratio(const TrackerConfig& cfg, int level) {
  return cfg.use_buffer ? cfg.buffer_ratios.at(level) : 0.0;
}

// One IoU assignment between the given subsets; returns global index pairs.
inline std::vector<IndexPair> iou_assign(std::span<const Tracklet> trks,
                                         std::span<const Detection> dets,
                                         const std::vector<std::size_t>& det_idx,
                                         const std::vector<std::size_t>& trk_idx,
                                         const std::vector<Box3D>& trk_boxes,
                                         const TrackerConfig& cfg) {
  if (det_idx.empty() || trk_idx.empty()) return {};
  CostMatrix c(det_idx.size(), trk_idx.size());
  for (std::size_t i = 0; i < det_idx.size(); ++i) {
    const Detection& d = dets[det_idx[i]];
    for (std::size_t j = 0; j < trk_idx.size(); ++j) {
      const Tracklet& t = trks[trk_idx[j]];
      const double iou = buffered_iou(d.box, trk_boxes[trk_idx[j]],
                                      level_ratio(cfg, d.scale_level),
                                      level_ratio(cfg, t.scale_level));
      c.value(i, j) = -iou;
      c.set_admissible(i, j, iou > 0.0 && iou >= cfg.iou_threshold);
    }
  }
  std::vector<IndexPair> out;
  for (const Assignment& a : solve_assignment(c)) {
    out.push_back({det_idx[a.row], trk_idx[a.col]});
  }
  return out;
}

inline std::vector<IndexPair> scale_match(std::span<const Tracklet> trks,
                                          std::span<const Detection> dets,
                                          const std::vector<std::size_t>& det_remain,
                                          const std::vector<std::size_t>& trk_remain,
                                          const TrackerConfig& cfg) {
  std::vector<Box3D> trk_boxes(trks.size());
  for (std::size_t j : trk_remain) trk_boxes[j] = state_to_box(trks[j].kalman);

  std::vector<IndexPair> out;
  if (!cfg.use_cascade) {
    out = iou_assign(trks, dets, det_remain, trk_remain, trk_boxes, cfg);
  } else {
    std::vector<char> trk_taken(trks.size(), 0);
    for (int level = cfg.num_levels - 1; level >= 0; --level) {
      std::vector<std::size_t> det_sel;
      for (std::size_t i : det_remain) {
        if (dets[i].scale_level == level) det_sel.push_back(i);
      }
      if (det_sel.empty()) continue;
      std::vector<std::size_t> trk_sel;
      for (std::size_t j : trk_remain) {
        if (!trk_taken[j] && std::abs(trks[j].scale_level - level) <= 1) trk_sel.push_back(j);
      }
      for (const IndexPair& p : iou_assign(trks, dets, det_sel, trk_sel, trk_boxes, cfg)) {
        trk_taken[p.trk] = 1;
        out.push_back(p);
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const IndexPair& a, const IndexPair& b) { return a.det < b.det; });
  return out;
}

}  // namespace detail

/// Second association stage over stage-1 leftovers. Detections of level l
/// (largest first) may only pair with tracklets of level l-1, l or l+1 not
/// yet claimed at a larger level. Costs are negated buffered IoUs; pairs
/// below `iou_threshold` are rejected. Returned indices refer to the spans.
inline std::vector<IndexPair> cascaded_scale_match(std::span<const Tracklet> trks_remain,
                                                   std::span<const Detection> dets_remain,
                                                   const TrackerConfig& cfg) {
  std::vector<std::size_t> det_idx(dets_remain.size()), trk_idx(trks_remain.size());
  for (std::size_t i = 0; i < det_idx.size(); ++i) det_idx[i] = i;
  for (std::size_t j = 0; j < trk_idx.size(); ++j) trk_idx[j] = j;
  return detail::scale_match(trks_remain, dets_remain, det_idx, trk_idx, cfg);
}

/// Object-aware association state machine for one sequence. Frames must be
/// fed in increasing frame_id order.
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const TrackerConfig& config() const { return cfg_; }
  const std::vector<Tracklet>& tracklets() const { return tracklets_; }
  std::optional<FrameId> last_frame() const { return last_frame_; }

  StepResult step(FrameId frame_id, std::span<const Detection> dets, double dt) {
    if (last_frame_ && frame_id <= *last_frame_) {
      throw ContractViolation("frame " + std::to_string(frame_id) +
                              " was already processed or is out of order");
    }
    for (const Detection& d : dets) {
      if (d.frame_id != frame_id) {
        throw ContractViolation("detections of one step must share the frame id");
      }
      if (d.scale_level < 0 || d.scale_level >= cfg_.num_levels) {
        throw ContractViolation("detection scale level out of range");
      }
      if (!(d.score >= 0.0 && d.score <= 1.0)) {
        throw ContractViolation("detection score must lie in [0, 1]");
      }
    }
    if (!tracklets_.empty() && !(dt > 0.0)) throw ContractViolation("step requires dt > 0");
    last_frame_ = frame_id;

    // Predict new states of tracklets.
    for (Tracklet& t : tracklets_) {
      t.kalman = predict(t.kalman, dt, cfg_.noise);
      ++t.time_since_update;
    }

    StepResult result;
    std::vector<char> det_used(dets.size(), 0), trk_used(tracklets_.size(), 0);
    std::vector<IndexPair> pairs;

    // Multi-clue matching.
    if (cfg_.use_multi_clue && !dets.empty() && !tracklets_.empty()) {
      std::vector<AppearanceState> det_app, trk_app;
      det_app.reserve(dets.size());
      trk_app.reserve(tracklets_.size());
      for (const Detection& d : dets) det_app.push_back(d.appearance);
      for (const Tracklet& t : tracklets_) trk_app.push_back(t.appearance);
      const CostMatrix c =
          build_similarity_matrix(det_app, trk_app, cfg_.clue_weights, cfg_.sim_threshold);
      for (const Assignment& a : solve_assignment(c)) {
        pairs.push_back({a.row, a.col});
        det_used[a.row] = 1;
        trk_used[a.col] = 1;
        result.matches.push_back({tracklets_[a.col].id, a.row, MatchStage::kMultiClue,
                                  dets[a.row].scale_level, tracklets_[a.col].scale_level});
      }
    }

    // Cascaded scale-aware matching on the leftovers.
    std::vector<std::size_t> det_remain, trk_remain;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (!det_used[i]) det_remain.push_back(i);
    }
    for (std::size_t j = 0; j < tracklets_.size(); ++j) {
      if (!trk_used[j]) trk_remain.push_back(j);
    }
    for (const IndexPair& p :
         detail::scale_match(tracklets_, dets, det_remain, trk_remain, cfg_)) {
      pairs.push_back(p);
      det_used[p.det] = 1;
      trk_used[p.trk] = 1;
      result.matches.push_back({tracklets_[p.trk].id, p.det, MatchStage::kScaleAware,
                                dets[p.det].scale_level, tracklets_[p.trk].scale_level});
    }

    for (const IndexPair& p : pairs) {
      Tracklet& t = tracklets_[p.trk];
      const Detection& d = dets[p.det];
      t.kalman = update(t.kalman, d.box, cfg_.noise);
      t = update_appearance(std::move(t), d, cfg_.ema_alpha);
      t.scale_level = d.scale_level;
      t.score = d.score;
      ++t.hits;
      t.time_since_update = 0;
    }

    // Delete unmatched tracklets past their age budget.
    std::erase_if(tracklets_,
                  [this](const Tracklet& t) { return t.time_since_update > cfg_.max_age; });

    // Initialize new tracklets.
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (det_used[i] || !(dets[i].score > cfg_.init_score_threshold)) continue;
      Tracklet t;
      t.id = next_id_++;
      t.kalman = init_state(dets[i].box, cfg_.noise);
      t.appearance = dets[i].appearance;
      t.scale_level = dets[i].scale_level;
      t.hits = 1;
      t.time_since_update = 0;
      t.created_at = frame_id;
      t.score = dets[i].score;
      tracklets_.push_back(std::move(t));
      result.births.push_back({tracklets_.back().id, i});
    }

    std::sort(result.matches.begin(), result.matches.end(),
              [](const Match& a, const Match& b) { return a.det_idx < b.det_idx; });
    return result;
  }

 private:
  TrackerConfig cfg_;
  std::vector<Tracklet> tracklets_;
  TrackId next_id_ = 1;
  std::optional<FrameId> last_frame_;
};

}  // namespace cyctrack
