#pragma once

// Implementations of the cyctrack subcommands. Each returns the process exit
// code: 0 success, 1 data error, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cyctrack/config.hpp"
#include "cyctrack/io.hpp"
#include "cyctrack/metrics.hpp"
#include "cyctrack/npy.hpp"
#include "cyctrack/oaa.hpp"
#include "cyctrack/pipeline.hpp"
#include "cyctrack/refiner.hpp"
#include "cyctrack/simulator.hpp"

namespace cyctrack::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

using nlohmann::json;

inline AppConfig config_or_default(const std::string& path, AppConfig base = {}) {
  return path.empty() ? base : load_config(path, std::move(base));
}

/// Benchmark profile: library defaults plus the coast window the synthetic
/// suites need to bridge occlusions.
inline AppConfig benchmark_profile() {
  AppConfig c;
  c.tracker = benchmark_tracker_config();
  return c;
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  std::string suite;
  std::string scenario_path;  // JSON overrides on top of `base` (or defaults)
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool noiseless = false;
};

inline ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig c = j.contains("base") ? standard_suite(j["base"].get<std::string>())
                                        : ScenarioConfig{};
  c.name = j.value("name", j.contains("base") ? c.name : std::string("custom"));
  c.seed = j.value("seed", c.seed);
  c.num_objects = j.value("num_objects", c.num_objects);
  c.num_frames = j.value("num_frames", c.num_frames);
  c.frame_dt = j.value("frame_dt", c.frame_dt);
  c.arena_x = j.value("arena_x", c.arena_x);
  c.arena_y = j.value("arena_y", c.arena_y);
  c.turn_rate_max = j.value("turn_rate_max", c.turn_rate_max);
  c.pos_std = j.value("pos_std", c.pos_std);
  c.yaw_std = j.value("yaw_std", c.yaw_std);
  c.dim_std = j.value("dim_std", c.dim_std);
  c.fp_rate = j.value("fp_rate", c.fp_rate);
  c.fn_rate = j.value("fn_rate", c.fn_rate);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.embedding_noise_std = j.value("embedding_noise_std", c.embedding_noise_std);
  c.embedding_dropout = j.value("embedding_dropout", c.embedding_dropout);
  if (j.contains("occlusion_events")) {
    c.occlusion_events.clear();
    for (const auto& e : j["occlusion_events"]) {
      c.occlusion_events.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>()});
    }
  }
  if (j.value("noiseless", false)) c = c.noiseless();
  return c;
}

inline int simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err) {
  ScenarioConfig cfg;
  if (!opt.suite.empty() == !opt.scenario_path.empty()) {
    err << "simulate: give exactly one of --suite or --scenario\n";
    return kExitUsage;
  }
  if (!opt.suite.empty()) {
    try {
      cfg = standard_suite(opt.suite);
    } catch (const ContractViolation&) {
      err << "simulate: unknown suite '" << opt.suite << "'. Valid suites:";
      for (const auto& n : standard_suite_names()) err << ' ' << n;
      err << '\n';
      return kExitUsage;
    }
  } else {
    try {
      auto in = io::open_input(opt.scenario_path);
      cfg = scenario_from_json(json::parse(in));
    } catch (const ContractViolation& e) {
      err << "simulate: " << e.what() << '\n';
      return kExitUsage;
    } catch (const std::exception& e) {
      err << "simulate: cannot read scenario: " << e.what() << '\n';
      return kExitData;
    }
  }
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.noiseless) cfg = cfg.noiseless();

  Scenario sc;
  try {
    sc = generate(cfg);
  } catch (const ContractViolation& e) {
    err << "simulate: invalid scenario: " << e.what() << '\n';
    return kExitUsage;
  }
  std::filesystem::create_directories(opt.out_dir);
  const auto dir = std::filesystem::path(opt.out_dir);
  {
    auto f = io::open_output((dir / "gt.jsonl").string());
    io::write_ground_truth(f, sc.ground_truth);
  }
  std::size_t num_dets = 0, num_gt = 0;
  {
    auto f = io::open_output((dir / "dets.jsonl").string());
    io::write_detections(f, sc.detections);
    for (const auto& fr : sc.detections) num_dets += fr.size();
  }
  for (const auto& fr : sc.ground_truth) num_gt += fr.objects.size();
  out << "scenario=" << cfg.name << " seed=" << cfg.seed << " frames=" << sc.ground_truth.size()
      << " objects=" << cfg.total_objects() << " gt_boxes=" << num_gt
      << " detections=" << num_dets << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------- track

struct TrackOptions {
  std::string dets_path;
  std::string config_path;
  std::string out_path;
  bool no_multi_clue = false;
  bool no_buffer = false;
  bool no_cascade = false;
};

/// Streams the detection log through the tracker. Missing frame ids between
/// two logged frames are stepped as empty frames with interpolated times.
inline int track(const TrackOptions& opt, std::ostream& out, std::ostream& err) {
  AppConfig cfg;
  try {
    cfg = config_or_default(opt.config_path);
  } catch (const DataError& e) {
    err << "track: " << e.what() << '\n';
    return kExitData;
  }
  if (opt.no_multi_clue) cfg.tracker.use_multi_clue = false;
  if (opt.no_buffer) cfg.tracker.use_buffer = false;
  if (opt.no_cascade) cfg.tracker.use_cascade = false;

  std::ifstream in;
  std::ofstream os;
  try {
    in = io::open_input(opt.dets_path);
    os = io::open_output(opt.out_path);
  } catch (const DataError& e) {
    err << "track: " << e.what() << '\n';
    return kExitData;
  }

  Tracker tracker(cfg.tracker);
  io::DetectionLogReader reader(in, cfg.level_breakpoints);
  std::optional<FrameId> prev_frame;
  double prev_time = 0.0;
  std::size_t frames = 0, records = 0;
  try {
    while (auto frame = reader.next()) {
      double dt = 1.0;
      if (prev_frame) {
        const auto gap = frame->frame_id - *prev_frame;
        const double span = frame->timestamp - prev_time;
        if (!(span > 0.0)) {
          throw DataError("frame " + std::to_string(frame->frame_id) +
                          ": timestamps must increase with frame id");
        }
        dt = span / static_cast<double>(gap);
        for (FrameId f = *prev_frame + 1; f < frame->frame_id; ++f) {
          tracker.step(f, {}, dt);
          ++frames;
        }
      }
      tracker.step(frame->frame_id, frame->detections, dt);
      const TrackFrame tf = emit_frame(tracker, frame->frame_id);
      io::write_track_frame(os, tf);
      records += tf.predictions.size();
      ++frames;
      prev_frame = frame->frame_id;
      prev_time = frame->timestamp;
    }
  } catch (const DataError& e) {
    err << "track: " << e.what() << '\n';
    return kExitData;
  } catch (const ContractViolation& e) {
    err << "track: " << e.what() << '\n';
    return kExitData;
  }
  out << "frames=" << frames << " track_records=" << records
      << " multi_clue=" << cfg.tracker.use_multi_clue << " buffer=" << cfg.tracker.use_buffer
      << " cascade=" << cfg.tracker.use_cascade << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateOptions {
  std::string gt_path;
  std::string tracks_path;
  std::string config_path;
  std::string out_path;  // optional JSON report
};

inline json report_to_json(const MetricsReport& r) {
  json rows = json::array();
  for (const auto& t : r.thresholds) {
    rows.push_back({{"target_recall", t.target_recall},
                    {"reachable", t.reachable},
                    {"score_threshold", t.reachable ? json(t.score_threshold) : json(nullptr)},
                    {"recall", t.recall},
                    {"motar", t.motar},
                    {"mota", t.mota},
                    {"motp", t.motp},
                    {"tp", t.tp},
                    {"fp", t.fp},
                    {"fn", t.fn},
                    {"ids", t.ids}});
  }
  return {{"amota", r.amota}, {"amotp", r.amotp}, {"mota", r.mota},   {"recall", r.recall},
          {"ids", r.ids},     {"fp", r.fp},       {"fn", r.fn},       {"tp", r.tp},
          {"mt", r.mt},       {"num_gt", r.num_gt}, {"num_trajectories", r.num_trajectories},
          {"thresholds", rows}};
}

inline void print_report(const MetricsReport& r, std::ostream& out) {
  auto f3 = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << v;
    return s.str();
  };
  auto f4 = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << v;
    return s.str();
  };
  out << "AMOTA  " << f3(r.amota) << '\n'
      << "AMOTP  " << f3(r.amotp) << '\n'
      << "MOTA   " << f4(r.mota) << '\n'
      << "RECALL " << f4(r.recall) << '\n'
      << "IDS    " << r.ids << '\n'
      << "FP     " << r.fp << '\n'
      << "FN     " << r.fn << '\n'
      << "MT     " << r.mt << " / " << r.num_trajectories << '\n';
}

inline int evaluate_cmd(const EvaluateOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const AppConfig cfg = config_or_default(opt.config_path);
    auto gin = io::open_input(opt.gt_path);
    const auto gt = io::read_ground_truth(gin);
    auto tin = io::open_input(opt.tracks_path);
    const auto tracks = io::read_tracks(tin);
    const MetricsReport rep = evaluate(gt, tracks, cfg.eval);
    print_report(rep, out);
    if (!opt.out_path.empty()) {
      auto os = io::open_output(opt.out_path);
      os << report_to_json(rep).dump(2) << '\n';
    }
  } catch (const DataError& e) {
    err << "evaluate: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

// ------------------------------------------------------------- refine-demo

struct RefineDemoOptions {
  std::string objects_path;  // optional; no file means no objects
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 7;
  int image_height = 15, image_width = 25;
  int bev_height = 48, bev_width = 48;
  int channels = 8;
};

inline FeatureGrid random_grid(Rng& rng, int h, int w, int c, GridKind kind) {
  FeatureGrid g(h, w, c, kind);
  for (double& v : g.data) v = rng.normal();
  return g;
}

inline void write_grid(const std::filesystem::path& p, const FeatureGrid& g) {
  npy::write(p.string(),
             {static_cast<std::size_t>(g.height), static_cast<std::size_t>(g.width),
              static_cast<std::size_t>(g.channels)},
             g.data);
}

inline void write_mask(const std::filesystem::path& p, const FilterMask& m) {
  npy::write(p.string(), {static_cast<std::size_t>(m.height), static_cast<std::size_t>(m.width)},
             m.data);
}

/// mean |M_l * F| / mean |F| per level: the share of feature magnitude each
/// level's mask lets through.
inline std::vector<double> level_pass_ratios(const FeatureGrid& f,
                                             const std::vector<FilterMask>& masks) {
  double total = 0.0;
  for (double v : f.data) total += std::abs(v);
  std::vector<double> out;
  for (const auto& m : masks) {
    double acc = 0.0;
    for (int r = 0; r < f.height; ++r) {
      for (int c = 0; c < f.width; ++c) {
        for (int ch = 0; ch < f.channels; ++ch) acc += std::abs(m.at(r, c) * f.at(r, c, ch));
      }
    }
    out.push_back(total > 0.0 ? acc / total : 0.0);
  }
  return out;
}

inline ObjectPrior prior_from_json(const json& j, const std::vector<double>& e_cat) {
  ObjectPrior p;
  p.e_cat = e_cat;
  p.center_row = j.at("row").get<double>();
  p.center_col = j.at("col").get<double>();
  if (j.contains("extent")) {
    p.extent_r = j["extent"].at(0).get<double>();
    p.extent_c = j["extent"].at(1).get<double>();
  }
  return p;
}

inline int refine_demo(const RefineDemoOptions& opt, std::ostream& out, std::ostream& err) {
  AppConfig cfg;
  try {
    cfg = config_or_default(opt.config_path);
  } catch (const DataError& e) {
    err << "refine-demo: " << e.what() << '\n';
    return kExitData;
  }
  if (opt.channels < 1 || opt.image_height < 1 || opt.image_width < 1 || opt.bev_height < 1 ||
      opt.bev_width < 1) {
    err << "refine-demo: grid dimensions must be positive\n";
    return kExitUsage;
  }
  if (opt.channels % cfg.refiner.fusion_heads != 0) {
    err << "refine-demo: channels must be divisible by refiner.fusion_heads\n";
    return kExitUsage;
  }
  const int C = opt.channels;
  const std::size_t e_dim = 3 * static_cast<std::size_t>(C);

  Rng rng(opt.seed);
  const FeatureGrid f_img = random_grid(rng, opt.image_height, opt.image_width, C, GridKind::kImage);
  const FeatureGrid f_bev = random_grid(rng, opt.bev_height, opt.bev_width, C, GridKind::kBev);
  const FeatureGrid f_bev_next = random_grid(rng, opt.bev_height, opt.bev_width, C, GridKind::kBev);

  std::vector<RefinerObject> objects;
  try {
    if (!opt.objects_path.empty()) {
      auto in = io::open_input(opt.objects_path);
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
          const json j = json::parse(line);
          std::vector<double> e_cat;
          if (j.contains("e_cat")) {
            e_cat = j["e_cat"].get<std::vector<double>>();
            if (e_cat.size() != e_dim) throw DataError("e_cat must have 3 * channels entries");
          } else {
            e_cat.resize(e_dim);
            for (double& v : e_cat) v = rng.normal();
          }
          objects.push_back({prior_from_json(j.at("image"), e_cat), prior_from_json(j.at("bev"), e_cat)});
        } catch (const json::exception& e) {
          throw DataError("objects line " + std::to_string(lineno) + ": " + e.what());
        } catch (const DataError& e) {
          throw DataError("objects line " + std::to_string(lineno) + ": " + e.what());
        }
      }
    }
  } catch (const DataError& e) {
    err << "refine-demo: " << e.what() << '\n';
    return kExitData;
  }

  GridRefiner img_ref;
  img_ref.maps = InjectedMaps::from_seed(opt.seed + 1, e_dim, cfg.refiner.image_scope_radii);
  img_ref.kernels = default_level_kernels(img_ref.num_levels());
  GridRefiner bev_ref;
  bev_ref.maps = InjectedMaps::from_seed(opt.seed + 2, e_dim, cfg.refiner.bev_scope_radii);
  bev_ref.kernels = default_level_kernels(bev_ref.num_levels());
  const auto fusion = DeformableFusionParams::from_seed(opt.seed + 3, C, cfg.refiner.fusion_heads,
                                                        cfg.refiner.fusion_points,
                                                        cfg.refiner.fusion_offset_scale);

  BackwardRefinement res;
  try {
    res = backward_refine(f_img, f_bev, objects, img_ref, bev_ref);
  } catch (const ContractViolation& e) {
    err << "refine-demo: " << e.what() << '\n';
    return kExitData;
  }
  const FeatureGrid fused = temporal_fuse(res.bev.refined, f_bev_next, fusion);

  const auto dir = std::filesystem::path(opt.out_dir);
  std::filesystem::create_directories(dir);
  try {
    write_grid(dir / "image_input.npy", f_img);
    write_grid(dir / "bev_input.npy", f_bev);
    write_grid(dir / "image_refined.npy", res.image.refined);
    write_grid(dir / "bev_refined.npy", res.bev.refined);
    write_grid(dir / "bev_next.npy", f_bev_next);
    write_grid(dir / "bev_fused.npy", fused);
    for (const auto& m : res.image.level_masks) {
      write_mask(dir / ("image_mask_l" + std::to_string(m.level) + ".npy"), m);
    }
    for (const auto& m : res.bev.level_masks) {
      write_mask(dir / ("bev_mask_l" + std::to_string(m.level) + ".npy"), m);
    }
  } catch (const DataError& e) {
    err << "refine-demo: " << e.what() << '\n';
    return kExitData;
  }

  auto grid_summary = [](const GridRefinement& g, const FeatureGrid& input) {
    return json{{"levels", g.levels},
                {"level_pass_ratio", level_pass_ratios(input, g.level_masks)},
                {"outside_scope_ratio", outside_scope_ratio(g.refined, input, g.level_masks)}};
  };
  const json summary = {{"seed", opt.seed},
                        {"objects", objects.size()},
                        {"image", grid_summary(res.image, f_img)},
                        {"bev", grid_summary(res.bev, f_bev)}};
  {
    auto os = io::open_output((dir / "summary.json").string());
    os << summary.dump(2) << '\n';
  }
  out << "objects=" << objects.size() << " image_levels=" << img_ref.num_levels()
      << " bev_levels=" << bev_ref.num_levels() << " outside_scope_ratio(bev)="
      << summary["bev"]["outside_scope_ratio"].get<double>() << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------ ablate

struct AblateOptions {
  std::vector<std::string> suites;  // empty: all standard suites
  std::string config_path;
  std::string out_path;
};

struct AblationCell {
  std::string suite;
  AblationVariant variant;
  MetricsReport report;
};

inline std::vector<AblationCell> run_ablation(const std::vector<ScenarioConfig>& suites,
                                              const AppConfig& cfg) {
  std::vector<AblationCell> cells;
  for (const auto& s : suites) {
    const Scenario sc = generate(s);
    for (const auto& v : ablation_grid()) {
      const TrackingRun run = track_scenario(sc, with_variant(cfg.tracker, v));
      cells.push_back({s.name, v, evaluate(sc.ground_truth, run.frames, cfg.eval)});
    }
  }
  return cells;
}

inline int ablate(const AblateOptions& opt, std::ostream& out, std::ostream& err) {
  AppConfig cfg;
  try {
    cfg = config_or_default(opt.config_path, benchmark_profile());
  } catch (const DataError& e) {
    err << "ablate: " << e.what() << '\n';
    return kExitData;
  }
  std::vector<ScenarioConfig> suites;
  if (opt.suites.empty()) {
    suites = standard_suites();
  } else {
    for (const auto& name : opt.suites) {
      try {
        suites.push_back(standard_suite(name));
      } catch (const ContractViolation&) {
        err << "ablate: unknown suite '" << name << "'. Valid suites:";
        for (const auto& n : standard_suite_names()) err << ' ' << n;
        err << '\n';
        return kExitUsage;
      }
    }
  }
  const auto cells = run_ablation(suites, cfg);

  out << std::left << std::setw(17) << "suite" << " MC Buff Cascade   AMOTA   AMOTP    IDS\n";
  json rows = json::array();
  for (const auto& c : cells) {
    out << std::left << std::setw(17) << c.suite << "  " << (c.variant.multi_clue ? "x" : "-")
        << "   " << (c.variant.buffer ? "x" : "-") << "      " << (c.variant.cascade ? "x" : "-")
        << "    " << std::right << std::fixed << std::setprecision(3) << std::setw(6)
        << c.report.amota << "  " << std::setw(6) << c.report.amotp << "  " << std::setw(5)
        << c.report.ids << '\n';
    rows.push_back({{"suite", c.suite},
                    {"multi_clue", c.variant.multi_clue},
                    {"buffer", c.variant.buffer},
                    {"cascade", c.variant.cascade},
                    {"amota", c.report.amota},
                    {"amotp", c.report.amotp},
                    {"ids", c.report.ids}});
  }
  out.unsetf(std::ios::fixed);
  if (!opt.out_path.empty()) {
    try {
      auto os = io::open_output(opt.out_path);
      os << rows.dump(2) << '\n';
    } catch (const DataError& e) {
      err << "ablate: " << e.what() << '\n';
      return kExitData;
    }
  }
  return kExitOk;
}

}  // namespace cyctrack::cli
