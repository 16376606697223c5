#pragma once

// Tracking metrics following the nuScenes conventions: greedy center
// distance matching in BEV, recall-swept MOTAR averaged into AMOTA, AMOTP,
// plus MOTA / recall / IDS / MT at the full operating point.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <unordered_map>
#include <vector>

#include "cyctrack/error.hpp"
#include "cyctrack/simulator.hpp"

namespace cyctrack {

struct TrackPrediction {
  TrackId track_id = 0;
  Box3D box;
  double score = 1.0;
  int scale_level = 0;

  friend bool operator==(const TrackPrediction&, const TrackPrediction&) = default;
};

struct TrackFrame {
  FrameId frame_id = 0;
  std::vector<TrackPrediction> predictions;
};

struct EvalConfig {
  double match_distance = 2.0;
  int recall_thresholds = 40;
  double mostly_tracked_ratio = 0.8;

  void validate() const {
    if (!(match_distance > 0.0)) throw ContractViolation("match_distance must be positive");
    if (recall_thresholds < 1) throw ContractViolation("recall_thresholds must be >= 1");
  }
};

struct FrameMatch {
  std::vector<std::pair<std::size_t, std::size_t>> tp;  // (gt index, prediction index)
  std::vector<std::size_t> fp;                          // prediction indices
  std::vector<std::size_t> fn;                          // gt indices (visible only)
};

inline double center_distance(const Box3D& a, const Box3D& b) {
  return std::hypot(a.cx - b.cx, a.cy - b.cy);
}

/// Predictions in descending score order each take the nearest unmatched
/// visible ground-truth object within `max_distance`. Invisible objects are
/// ignored entirely.
inline FrameMatch match_frame(const GroundTruthFrame& gt, std::span<const TrackPrediction> preds,
                              double max_distance) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&preds](std::size_t a, std::size_t b) {
    return preds[a].score > preds[b].score;
  });
  std::vector<char> taken(gt.objects.size(), 0);
  FrameMatch m;
  for (std::size_t p : order) {
    std::size_t best = gt.objects.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < gt.objects.size(); ++g) {
      if (taken[g] || !gt.objects[g].visible) continue;
      const double d = center_distance(gt.objects[g].box, preds[p].box);
      if (d <= max_distance && d < best_d) {
        best_d = d;
        best = g;
      }
    }
    if (best < gt.objects.size()) {
      taken[best] = 1;
      m.tp.emplace_back(best, p);
    } else {
      m.fp.push_back(p);
    }
  }
  std::sort(m.tp.begin(), m.tp.end());
  for (std::size_t g = 0; g < gt.objects.size(); ++g) {
    if (gt.objects[g].visible && !taken[g]) m.fn.push_back(g);
  }
  return m;
}

/// Counts at one score threshold.
struct ThresholdStats {
  double target_recall = 1.0;
  double score_threshold = -std::numeric_limits<double>::infinity();
  bool reachable = true;
  std::size_t tp = 0, fp = 0, fn = 0, ids = 0;
  double recall = 0.0;
  double mota = 0.0;
  double motar = 0.0;
  double motp = 0.0;  // mean TP center distance
};

struct MetricsReport {
  double amota = 0.0;
  double amotp = 0.0;
  double mota = 0.0;
  double recall = 0.0;
  std::size_t ids = 0, fp = 0, fn = 0, tp = 0;
  std::size_t mt = 0;
  std::size_t num_gt = 0;             // visible ground-truth instances
  std::size_t num_trajectories = 0;   // distinct ground-truth ids ever visible
  std::vector<ThresholdStats> thresholds;
};

namespace detail {

struct SweepResult {
  ThresholdStats stats;
  std::vector<double> tp_scores;
  std::map<std::int64_t, std::size_t> matched_frames;  // per gt id
  std::map<std::int64_t, std::size_t> visible_frames;
};

inline SweepResult run_sequence(std::span<const GroundTruthFrame> gt,
                                const std::vector<const TrackFrame*>& tracks, double threshold,
                                const EvalConfig& cfg) {
  SweepResult r;
  r.stats.score_threshold = threshold;
  std::unordered_map<std::int64_t, TrackId> last_track;
  double dist_sum = 0.0;
  std::vector<TrackPrediction> kept;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    kept.clear();
    if (tracks[f] != nullptr) {
      for (const auto& p : tracks[f]->predictions) {
        if (p.score >= threshold) kept.push_back(p);
      }
    }
    const FrameMatch m = match_frame(gt[f], kept, cfg.match_distance);
    for (const auto& o : gt[f].objects) {
      if (o.visible) ++r.visible_frames[o.gt_id];
    }
    for (const auto& [g, p] : m.tp) {
      const std::int64_t gid = gt[f].objects[g].gt_id;
      const TrackId tid = kept[p].track_id;
      auto it = last_track.find(gid);
      if (it != last_track.end() && it->second != tid) ++r.stats.ids;
      last_track[gid] = tid;
      ++r.matched_frames[gid];
      dist_sum += center_distance(gt[f].objects[g].box, kept[p].box);
      r.tp_scores.push_back(kept[p].score);
    }
    r.stats.tp += m.tp.size();
    r.stats.fp += m.fp.size();
    r.stats.fn += m.fn.size();
  }
  r.stats.motp = r.stats.tp > 0 ? dist_sum / static_cast<double>(r.stats.tp) : cfg.match_distance;
  return r;
}

inline void finish_stats(ThresholdStats& s, std::size_t num_gt) {
  const double P = static_cast<double>(num_gt);
  s.recall = static_cast<double>(s.tp) / P;
  s.mota = 1.0 - static_cast<double>(s.fn + s.fp + s.ids) / P;
  if (s.tp == 0) {
    s.motar = 0.0;
  } else {
    // MOTAR with the achieved recall:
    // 1 - (IDS + FP + FN - (1 - recall) P) / (recall P).
    const double num = static_cast<double>(s.ids + s.fp + s.fn) - (1.0 - s.recall) * P;
    s.motar = std::clamp(1.0 - num / (s.recall * P), 0.0, 1.0);
  }
}

}  // namespace detail

/// Evaluates tracker output against ground truth. Every track frame must
/// correspond to a ground-truth frame; ground-truth frames without track
/// output count as empty.
inline MetricsReport evaluate(std::span<const GroundTruthFrame> gt,
                              std::span<const TrackFrame> tracks, const EvalConfig& cfg = {}) {
  cfg.validate();
  std::map<FrameId, std::size_t> frame_index;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!frame_index.emplace(gt[i].frame_id, i).second) {
      throw DataError("duplicate ground-truth frame " + std::to_string(gt[i].frame_id));
    }
  }
  std::vector<const TrackFrame*> aligned(gt.size(), nullptr);
  for (const TrackFrame& t : tracks) {
    auto it = frame_index.find(t.frame_id);
    if (it == frame_index.end()) {
      throw DataError("track frame " + std::to_string(t.frame_id) +
                      " has no ground-truth counterpart");
    }
    if (aligned[it->second] != nullptr) {
      throw DataError("duplicate track frame " + std::to_string(t.frame_id));
    }
    aligned[it->second] = &t;
  }

  std::size_t num_gt = 0;
  for (const auto& f : gt) {
    for (const auto& o : f.objects) num_gt += o.visible ? 1 : 0;
  }
  if (num_gt == 0) throw DataError("ground truth has no visible objects; recall is undefined");

  MetricsReport rep;
  rep.num_gt = num_gt;

  detail::SweepResult full =
      detail::run_sequence(gt, aligned, -std::numeric_limits<double>::infinity(), cfg);
  detail::finish_stats(full.stats, num_gt);
  rep.tp = full.stats.tp;
  rep.fp = full.stats.fp;
  rep.fn = full.stats.fn;
  rep.ids = full.stats.ids;
  rep.mota = full.stats.mota;
  rep.recall = full.stats.recall;
  rep.num_trajectories = full.visible_frames.size();
  for (const auto& [gid, visible] : full.visible_frames) {
    auto it = full.matched_frames.find(gid);
    const std::size_t matched = it == full.matched_frames.end() ? 0 : it->second;
    if (static_cast<double>(matched) >= cfg.mostly_tracked_ratio * static_cast<double>(visible)) {
      ++rep.mt;
    }
  }

  std::vector<double> scores = full.tp_scores;
  std::sort(scores.begin(), scores.end(), std::greater<>());

  double motar_sum = 0.0, motp_sum = 0.0;
  const int n = cfg.recall_thresholds;
  for (int k = 1; k <= n; ++k) {
    const double target = static_cast<double>(k) / n;
    const auto need = static_cast<std::size_t>(std::ceil(target * static_cast<double>(num_gt) - 1e-9));
    ThresholdStats s;
    s.target_recall = target;
    if (need == 0 || need > scores.size()) {
      s.reachable = false;
      s.score_threshold = std::numeric_limits<double>::quiet_NaN();
      s.motar = 0.0;
      s.motp = cfg.match_distance;
      s.fn = num_gt;
    } else {
      const double thr = scores[need - 1];
      s = detail::run_sequence(gt, aligned, thr, cfg).stats;
      s.target_recall = target;
      detail::finish_stats(s, num_gt);
    }
    motar_sum += s.motar;
    motp_sum += s.motp;
    rep.thresholds.push_back(s);
  }
  rep.amota = motar_sum / n;
  rep.amotp = motp_sum / n;
  return rep;
}

}  // namespace cyctrack
