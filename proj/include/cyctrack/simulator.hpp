#pragma once

// Deterministic synthetic scenarios: ground-truth trajectories plus noisy
// detections whose embeddings carry a per-identity signal.
//
// Randomness is split into independent streams derived from the scenario
// seed (object setup, identity anchors, one stream per object for its
// detections, false positives), so a change in one stream never shifts the
// draws of another.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "cyctrack/error.hpp"
#include "cyctrack/geometry.hpp"
#include "cyctrack/oaa.hpp"
#include "cyctrack/random.hpp"

namespace cyctrack {

struct ObjectClass {
  std::string name;
  double length = 4.5;
  double width = 1.9;
  double height = 1.6;
  double speed_min = 0.0;  // m/s
  double speed_max = 0.0;
};

inline ObjectClass car_class() { return {"car", 4.5, 1.9, 1.6, 2.0, 8.0}; }
inline ObjectClass pedestrian_class() { return {"pedestrian", 0.6, 0.6, 1.7, 0.5, 1.8}; }
inline ObjectClass cyclist_class() { return {"cyclist", 1.8, 0.7, 1.7, 2.0, 5.0}; }
inline ObjectClass truck_class() { return {"truck", 8.0, 2.5, 3.0, 2.0, 6.0}; }
inline ObjectClass bus_class() { return {"bus", 12.0, 2.9, 3.5, 2.0, 6.0}; }

/// An object with a fixed initial state. `fn_rate` < 0 inherits the
/// scenario-wide miss probability.
struct ScriptedObject {
  ObjectClass cls;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double turn_rate = 0.0;
  double fn_rate = -1.0;
};

struct OcclusionEvent {
  int object = 0;
  int start_frame = 0;
  int duration = 0;
};

struct ScenarioConfig {
  std::string name = "custom";
  std::uint64_t seed = 1;
  int num_objects = 4;  // random objects, in addition to `scripted`
  int num_frames = 20;
  double frame_dt = 0.5;
  double arena_x = 80.0;
  double arena_y = 80.0;
  std::vector<ObjectClass> size_distribution{car_class(), pedestrian_class(), truck_class()};
  double turn_rate_max = 0.1;  // rad/s, symmetric range
  std::vector<ScriptedObject> scripted;

  double pos_std = 0.1;
  double yaw_std = 0.02;
  double dim_std = 0.05;
  double fp_rate = 0.0;  // expected false positives per frame per object
  double fn_rate = 0.0;  // miss probability of a visible object

  int embedding_dim = 32;
  double embedding_noise_std = 0.1;
  double embedding_dropout = 0.0;  // probability that a detection's embeddings are uninformative

  std::vector<OcclusionEvent> occlusion_events;

  double true_score_min = 0.55;
  double true_score_max = 1.0;
  double fp_score_min = 0.05;
  double fp_score_max = 0.6;

  std::vector<double> level_breakpoints = default_area_breakpoints();

  int total_objects() const { return static_cast<int>(scripted.size()) + num_objects; }

  void validate() const {
    if (num_frames < 1 || num_objects < 0 || total_objects() < 1) {
      throw ContractViolation("scenario needs at least one object and one frame");
    }
    if (!(frame_dt > 0.0)) throw ContractViolation("frame_dt must be positive");
    for (double r : {fp_rate, fn_rate, embedding_dropout}) {
      if (!(r >= 0.0 && r <= 1.0)) throw ContractViolation("rates must lie in [0, 1]");
    }
    for (double s : {pos_std, yaw_std, dim_std, embedding_noise_std}) {
      if (!(s >= 0.0)) throw ContractViolation("noise deviations must be non-negative");
    }
    if (embedding_dim < 1) throw ContractViolation("embedding_dim must be positive");
    if (num_objects > 0 && size_distribution.empty()) {
      throw ContractViolation("random objects need a size distribution");
    }
    for (const auto& e : occlusion_events) {
      if (e.object < 0 || e.object >= total_objects() || e.duration < 0) {
        throw ContractViolation("occlusion event refers to an unknown object");
      }
    }
  }

  /// Same layout without measurement noise, misses or false positives.
  ScenarioConfig noiseless() const {
    ScenarioConfig c = *this;
    c.pos_std = c.yaw_std = c.dim_std = 0.0;
    c.fp_rate = c.fn_rate = 0.0;
    c.embedding_noise_std = 0.0;
    c.embedding_dropout = 0.0;
    for (auto& s : c.scripted) s.fn_rate = -1.0;
    return c;
  }
};

struct GroundTruthObject {
  std::int64_t gt_id = 0;
  Box3D box;
  bool visible = true;
};

struct GroundTruthFrame {
  FrameId frame_id = 0;
  double timestamp = 0.0;
  std::vector<GroundTruthObject> objects;
};

struct Scenario {
  ScenarioConfig config;
  std::vector<GroundTruthFrame> ground_truth;
  std::vector<std::vector<Detection>> detections;  // per frame
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t { kObjects = 1, kAnchors = 2, kObjectDetections = 3, kFalsePositives = 4 };

inline Rng stream_rng(std::uint64_t seed, Stream s, std::uint64_t sub = 0) {
  return Rng(splitmix64(splitmix64(seed ^ (static_cast<std::uint64_t>(s) << 56)) + sub));
}

inline std::vector<double> random_unit(Rng& rng, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  double n2 = 0.0;
  for (double& x : v) {
    x = rng.normal();
    n2 += x * x;
  }
  const double n = std::sqrt(n2);
  for (double& x : v) x /= n;
  return v;
}

// Gram-Schmidt over the first `dim` anchors; further anchors stay random.
inline std::vector<std::vector<double>> identity_anchors(Rng& rng, int count, int dim) {
  std::vector<std::vector<double>> anchors;
  for (int i = 0; i < count; ++i) {
    std::vector<double> v = random_unit(rng, dim);
    if (i < dim) {
      for (const auto& a : anchors) {
        double dot = 0.0;
        for (int k = 0; k < dim; ++k) dot += v[k] * a[k];
        for (int k = 0; k < dim; ++k) v[k] -= dot * a[k];
      }
      double n2 = 0.0;
      for (double x : v) n2 += x * x;
      const double n = std::sqrt(n2);
      for (double& x : v) x /= n;
    }
    anchors.push_back(std::move(v));
  }
  return anchors;
}

inline std::vector<double> noisy_embedding(Rng& rng, const std::vector<double>& anchor,
                                           double noise_std) {
  std::vector<double> v = anchor;
  double n2 = 0.0;
  for (double& x : v) {
    x += noise_std * rng.normal();
    n2 += x * x;
  }
  const double n = std::sqrt(n2);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
  return v;
}

struct ObjectTrack {
  ObjectClass cls;
  double x, y, heading, speed, turn_rate, fn_rate;
};

}  // namespace detail

/// Runs the scenario. Fully determined by the config (seed included).
inline Scenario generate(const ScenarioConfig& cfg) {
  cfg.validate();
  Scenario out;
  out.config = cfg;
  const int n_obj = cfg.total_objects();

  // Object setup: scripted objects first, then random ones.
  std::vector<detail::ObjectTrack> objects;
  for (const auto& s : cfg.scripted) {
    objects.push_back({s.cls, s.x, s.y, s.heading, s.speed, s.turn_rate,
                       s.fn_rate < 0.0 ? cfg.fn_rate : s.fn_rate});
  }
  {
    Rng rng = detail::stream_rng(cfg.seed, detail::Stream::kObjects);
    for (int i = 0; i < cfg.num_objects; ++i) {
      const ObjectClass& cls = cfg.size_distribution[rng.index(cfg.size_distribution.size())];
      const double x = rng.uniform(-0.5 * cfg.arena_x, 0.5 * cfg.arena_x);
      const double y = rng.uniform(-0.5 * cfg.arena_y, 0.5 * cfg.arena_y);
      const double heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const double speed = rng.uniform(cls.speed_min, cls.speed_max);
      const double turn = rng.uniform(-cfg.turn_rate_max, cfg.turn_rate_max);
      objects.push_back({cls, x, y, heading, speed, turn, cfg.fn_rate});
    }
  }

  // Identity anchors, one set per clue.
  std::vector<std::vector<std::vector<double>>> anchors;
  {
    Rng rng = detail::stream_rng(cfg.seed, detail::Stream::kAnchors);
    for (int clue = 0; clue < 3; ++clue) {
      anchors.push_back(detail::identity_anchors(rng, n_obj, cfg.embedding_dim));
    }
  }

  std::vector<Rng> det_rngs;
  for (int i = 0; i < n_obj; ++i) {
    det_rngs.push_back(detail::stream_rng(cfg.seed, detail::Stream::kObjectDetections,
                                          static_cast<std::uint64_t>(i)));
  }
  Rng fp_rng = detail::stream_rng(cfg.seed, detail::Stream::kFalsePositives);

  auto occluded = [&cfg](int obj, int frame) {
    for (const auto& e : cfg.occlusion_events) {
      if (e.object == obj && frame >= e.start_frame && frame < e.start_frame + e.duration) {
        return true;
      }
    }
    return false;
  };

  for (int f = 0; f < cfg.num_frames; ++f) {
    const double t = f * cfg.frame_dt;
    GroundTruthFrame gt;
    gt.frame_id = f;
    gt.timestamp = t;
    std::vector<Detection> dets;

    for (int i = 0; i < n_obj; ++i) {
      auto& o = objects[static_cast<std::size_t>(i)];
      if (f > 0) {
        o.heading = normalize_angle(o.heading + o.turn_rate * cfg.frame_dt);
        o.x += o.speed * std::cos(o.heading) * cfg.frame_dt;
        o.y += o.speed * std::sin(o.heading) * cfg.frame_dt;
      }
      const Box3D box(o.x, o.y, 0.5 * o.cls.height, o.cls.length, o.cls.width, o.cls.height,
                      o.heading);
      const bool visible = !occluded(i, f);
      gt.objects.push_back({i, box, visible});

      // Fixed per-frame draw schedule for object i, consumed whether or not
      // the object ends up detected.
      Rng& rng = det_rngs[static_cast<std::size_t>(i)];
      const bool missed = rng.bernoulli(o.fn_rate);
      const double nx = rng.normal(), ny = rng.normal(), nyaw = rng.normal();
      const double nl = rng.normal(), nw = rng.normal(), nh = rng.normal();
      const double score = rng.uniform(cfg.true_score_min, cfg.true_score_max);
      const bool dropout = rng.bernoulli(cfg.embedding_dropout);
      AppearanceState app;
      if (dropout) {
        app.e_img = detail::random_unit(rng, cfg.embedding_dim);
        app.e_bev = detail::random_unit(rng, cfg.embedding_dim);
        app.e_head = detail::random_unit(rng, cfg.embedding_dim);
      } else {
        app.e_img = detail::noisy_embedding(rng, anchors[0][i], cfg.embedding_noise_std);
        app.e_bev = detail::noisy_embedding(rng, anchors[1][i], cfg.embedding_noise_std);
        app.e_head = detail::noisy_embedding(rng, anchors[2][i], cfg.embedding_noise_std);
      }
      if (!visible || missed) continue;

      Detection d;
      d.box = Box3D(box.cx + cfg.pos_std * nx, box.cy + cfg.pos_std * ny, box.cz,
                    std::max(0.05, box.length + cfg.dim_std * nl),
                    std::max(0.05, box.width + cfg.dim_std * nw),
                    std::max(0.05, box.height + cfg.dim_std * nh), box.yaw + cfg.yaw_std * nyaw);
      d.score = score;
      d.appearance = std::move(app);
      d.scale_level = scale_level_from_area(d.box.footprint_area(), cfg.level_breakpoints);
      d.timestamp = t;
      d.frame_id = f;
      dets.push_back(std::move(d));
    }

    const int num_fp = fp_rng.poisson(cfg.fp_rate * n_obj);
    for (int k = 0; k < num_fp; ++k) {
      const ObjectClass& cls = cfg.size_distribution.empty()
                                   ? objects.front().cls
                                   : cfg.size_distribution[fp_rng.index(cfg.size_distribution.size())];
      Detection d;
      const double x = fp_rng.uniform(-0.5 * cfg.arena_x, 0.5 * cfg.arena_x);
      const double y = fp_rng.uniform(-0.5 * cfg.arena_y, 0.5 * cfg.arena_y);
      const double yaw = fp_rng.uniform(-std::numbers::pi, std::numbers::pi);
      d.box = Box3D(x, y, 0.5 * cls.height, cls.length, cls.width, cls.height, yaw);
      d.score = fp_rng.uniform(cfg.fp_score_min, cfg.fp_score_max);
      d.appearance.e_img = detail::random_unit(fp_rng, cfg.embedding_dim);
      d.appearance.e_bev = detail::random_unit(fp_rng, cfg.embedding_dim);
      d.appearance.e_head = detail::random_unit(fp_rng, cfg.embedding_dim);
      d.scale_level = scale_level_from_area(d.box.footprint_area(), cfg.level_breakpoints);
      d.timestamp = t;
      d.frame_id = f;
      dets.push_back(std::move(d));
    }

    out.ground_truth.push_back(std::move(gt));
    out.detections.push_back(std::move(dets));
  }
  return out;
}

/// The fixed benchmark suite: basic, crossing, occlusion, dense-neighbors,
/// small-objects, high-fp.
inline std::vector<ScenarioConfig> standard_suites() {
  std::vector<ScenarioConfig> suites;

  // Moderate noise shared by the adversarial scenarios.
  auto adversarial = [](ScenarioConfig c) {
    c.pos_std = 0.25;
    c.yaw_std = 0.05;
    c.dim_std = 0.1;
    c.fn_rate = 0.1;
    c.embedding_noise_std = 0.15;
    c.embedding_dropout = 0.25;
    return c;
  };

  {
    ScenarioConfig c;
    c.name = "basic";
    c.seed = 101;
    c.num_objects = 8;
    c.num_frames = 30;
    c.fp_rate = 0.02;
    c.fn_rate = 0.02;
    suites.push_back(c);
  }
  {
    ScenarioConfig c;
    c.name = "crossing";
    c.seed = 202;
    c.num_objects = 0;
    c.num_frames = 20;
    c.scripted = {
        {car_class(), -20.0, 0.0, 0.0, 4.0, 0.0},
        {car_class(), 0.0, -26.0, 0.5 * std::numbers::pi, 4.0, 0.0},
    };
    suites.push_back(c);
  }
  {
    ScenarioConfig c = adversarial(ScenarioConfig{});
    c.name = "occlusion";
    c.seed = 303;
    c.num_objects = 10;
    c.num_frames = 40;
    c.occlusion_events = {{0, 5, 3}, {1, 12, 4}, {2, 20, 3}, {3, 8, 3}, {4, 25, 4}};
    suites.push_back(c);
  }
  {
    ScenarioConfig c = adversarial(ScenarioConfig{});
    c.name = "dense-neighbors";
    c.seed = 404;
    c.num_objects = 0;
    c.num_frames = 40;
    // Convoys: a large vehicle with a car and a pedestrian alongside.
    for (int k = 0; k < 4; ++k) {
      const double y0 = -30.0 + 20.0 * k;
      const double heading = (k % 2 == 0) ? 0.0 : std::numbers::pi;
      const double x0 = (k % 2 == 0) ? -30.0 : 30.0;
      const double dir = (k % 2 == 0) ? 1.0 : -1.0;
      const double speed = 1.5;
      c.scripted.push_back({k % 2 == 0 ? bus_class() : truck_class(), x0, y0, heading, speed, 0.0, 0.3});
      c.scripted.push_back({car_class(), x0 + dir * 2.0, y0 + 2.5, heading, speed, 0.0});
      c.scripted.push_back({pedestrian_class(), x0 - dir * 1.0, y0 - 1.7, heading, speed, 0.0});
    }
    suites.push_back(c);
  }
  {
    ScenarioConfig c = adversarial(ScenarioConfig{});
    c.name = "small-objects";
    c.seed = 505;
    c.num_objects = 14;
    c.num_frames = 40;
    c.arena_x = 40.0;
    c.arena_y = 40.0;
    c.size_distribution = {pedestrian_class(), cyclist_class()};
    c.pos_std = 0.3;
    suites.push_back(c);
  }
  {
    ScenarioConfig c = adversarial(ScenarioConfig{});
    c.name = "high-fp";
    c.seed = 606;
    c.num_objects = 10;
    c.num_frames = 40;
    c.arena_x = 50.0;
    c.arena_y = 50.0;
    c.fp_rate = 0.8;
    suites.push_back(c);
  }
  return suites;
}

inline std::vector<std::string> standard_suite_names() {
  std::vector<std::string> names;
  for (const auto& s : standard_suites()) names.push_back(s.name);
  return names;
}

/// Looks up a standard suite by name; throws ContractViolation when unknown.
inline ScenarioConfig standard_suite(const std::string& name) {
  for (auto& s : standard_suites()) {
    if (s.name == name) return s;
  }
  throw ContractViolation("unknown scenario suite: " + name);
}

}  // namespace cyctrack
