// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "cyctrack/assignment.hpp"
#include "cyctrack/geometry.hpp"
#include "cyctrack/metrics.hpp"
#include "cyctrack/motion.hpp"
#include "cyctrack/pipeline.hpp"
#include "cyctrack/random.hpp"
#include "cyctrack/refiner.hpp"
#include "cyctrack/simulator.hpp"
#include "metrics_fixture.hpp"
#include "oracles.hpp"

#ifndef CYCTRACK_CLI_PATH
#error "CYCTRACK_CLI_PATH must name the cyctrack executable"
#endif
#ifndef CYCTRACK_SOURCE_DIR
#error "CYCTRACK_SOURCE_DIR must point at the repository root"
#endif

using namespace cyctrack;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------- 1

Outcome assignment_optimality() {
  const auto t0 = Clock::now();
  Rng rng(101);
  int exact = 0, real_checked = 0, mismatches = 0;
  double worst_real = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const bool integral = trial < 600;
    const std::size_t n = 1 + rng.index(7), m = 1 + rng.index(7);
    const double gate_p = trial % 3 == 0 ? 1.0 : 0.6;
    CostMatrix c(n, m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        c.value(i, j) = integral ? static_cast<double>(static_cast<int>(rng.index(41)) - 20)
                                 : rng.uniform(-5.0, 5.0);
        c.set_admissible(i, j, rng.bernoulli(gate_p));
      }
    }
    const auto a = solve_assignment(c);
    const auto ref = oracle::brute_force_assignment(c);
    bool ok = a.size() == ref.count;
    for (const auto& p : a) ok = ok && c.admissible(p.row, p.col);
    const double cost = assignment_cost(c, a);
    if (integral) {
      ok = ok && cost == ref.cost;
      ++exact;
    } else {
      worst_real = std::max(worst_real, std::abs(cost - ref.cost));
      ok = ok && std::abs(cost - ref.cost) <= 1e-9;
      ++real_checked;
    }
    mismatches += ok ? 0 : 1;
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = mismatches == 0 && secs < 10.0;
  o.detail = std::to_string(exact) + " integer matrices exact, " + std::to_string(real_checked) +
             " real matrices (max |diff| " + fmt(worst_real) + "), up to 7x7, mismatches " +
             std::to_string(mismatches) + ", " + fmt(secs, 3) + " s";
  return o;
}

// ---------------------------------------------------------------- 2

Outcome rotated_iou() {
  const auto t0 = Clock::now();
  Rng rng(202);
  double worst = 0.0;
  int pairs = 0, overlapping = 0;
  for (; pairs < 1000; ++pairs) {
    const Box3D a(rng.uniform(-2, 2), rng.uniform(-2, 2), 0, rng.uniform(0.3, 5.0),
                  rng.uniform(0.3, 3.0), 1.5, rng.uniform(-M_PI, M_PI));
    const Box3D b(a.cx + rng.uniform(-3, 3), a.cy + rng.uniform(-3, 3), rng.uniform(-1, 1),
                  rng.uniform(0.3, 5.0), rng.uniform(0.3, 3.0), 1.0, rng.uniform(-M_PI, M_PI));
    const double iou = bev_iou(a, b);
    overlapping += iou > 0.0 ? 1 : 0;
    worst = std::max(worst, std::abs(iou - oracle::raster_iou(a, b)));
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst <= 1e-3 && secs < 60.0;
  o.detail = std::to_string(pairs) + " pairs (" + std::to_string(overlapping) +
             " overlapping), max |iou - raster| " + fmt(worst) + ", " + fmt(secs, 3) + " s";
  return o;
}

// ---------------------------------------------------------------- 3

double cv_tracking_error(const NoiseConfig& n) {
  const double dt = 0.5, vx = 3.0, vy = -2.0;
  auto truth = [&](int k) {
    const double t = dt * k;
    return Box3D(10.0 + vx * t, -5.0 + vy * t, 0.8, 4.5, 1.9, 1.6, 0.3);
  };
  KalmanState s = init_state(truth(0), n);
  for (int k = 1; k <= 100; ++k) {
    s = predict(s, dt, n);
    s = update(s, truth(k), n);
  }
  const Box3D est = state_to_box(s);
  return std::hypot(est.cx - truth(100).cx, est.cy - truth(100).cy);
}

Outcome kalman_soundness() {
  // Exact measurements: zero process noise and a measurement model matching
  // a precise sensor. The residual scales with meas variance / init_vel_var.
  NoiseConfig exact_model;
  exact_model.process_pos_std = exact_model.process_vel_std = 0.0;
  exact_model.process_yaw_std = exact_model.process_dim_std = 0.0;
  NoiseConfig default_meas = exact_model;
  exact_model.meas_pos_std = 0.1;
  const double err = cv_tracking_error(exact_model);
  const double err_default = cv_tracking_error(default_meas);

  Rng rng(303);
  const NoiseConfig noisy;
  KalmanState q = init_state(Box3D(0, 0, 0, 4, 2, 1.5, 0), noisy);
  double worst_eig = std::numeric_limits<double>::infinity();
  double worst_asym = 0.0;
  for (int cycle = 0; cycle < 10000; ++cycle) {
    q = predict(q, rng.uniform(0.05, 1.0), noisy);
    const Box3D z(q.mean(state_index::kX) + rng.normal(0, 1),
                  q.mean(state_index::kY) + rng.normal(0, 1), rng.normal(0, 0.3),
                  rng.uniform(0.5, 6), rng.uniform(0.5, 3), rng.uniform(1, 3),
                  rng.uniform(-M_PI, M_PI));
    q = update(q, z, noisy);
    const StateMatrix& P = q.covariance;
    worst_asym = std::max(worst_asym, (P - P.transpose()).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<StateMatrix> es(0.5 * (P + P.transpose()));
    worst_eig = std::min(worst_eig, es.eigenvalues().minCoeff());
  }
  Outcome o;
  o.pass = err < 1e-6 && worst_eig >= 0.0 && worst_asym < 1e-9;
  o.detail = "CV error after 100 steps " + fmt(err) + " m (meas std 0.1 m; default 0.5 m gives " +
             fmt(err_default) + " m); 10000 cycles min eigenvalue " +
             fmt(worst_eig) + ", max asymmetry " + fmt(worst_asym);
  return o;
}

// ---------------------------------------------------------------- 4

Outcome fusion_oracle() {
  Rng rng(404);
  double worst = 0.0;
  int draws = 0;
  for (; draws < 120; ++draws) {
    const int H = 1 + static_cast<int>(rng.index(8));
    const int W = 1 + static_cast<int>(rng.index(8));
    const std::vector<std::pair<int, int>> shapes{{1, 1}, {2, 1}, {2, 2}, {4, 2}, {4, 4},
                                                  {6, 3}, {8, 2}, {8, 4}, {8, 8}, {3, 1}};
    const auto [C, heads] = shapes[rng.index(shapes.size())];
    const int K = 1 + static_cast<int>(rng.index(4));
    const double offset_scale = rng.uniform(0.5, 3.0);
    const auto p = DeformableFusionParams::from_seed(5000 + draws, C, heads, K, offset_scale);
    FeatureGrid prev(H, W, C, GridKind::kBev), curr(H, W, C, GridKind::kBev);
    for (double& v : prev.data) v = rng.normal();
    for (double& v : curr.data) v = rng.normal();
    const FeatureGrid fast = temporal_fuse(prev, curr, p);
    const FeatureGrid ref = oracle::naive_temporal_fuse(prev, curr, p);
    for (std::size_t i = 0; i < fast.data.size(); ++i) {
      worst = std::max(worst, std::abs(fast.data[i] - ref.data[i]));
    }
  }
  Outcome o;
  o.pass = worst <= 1e-9;
  o.detail = std::to_string(draws) + " parameter draws (grids <= 8x8, C <= 8), max |diff| " +
             fmt(worst);
  return o;
}

// ---------------------------------------------------------------- 5

Outcome mask_contract() {
  Rng rng(505);
  int sets = 0, objects_checked = 0, violations = 0;
  for (; sets < 150; ++sets) {
    const bool bev = sets % 2 == 0;
    const int H = bev ? 32 + static_cast<int>(rng.index(33)) : 10 + static_cast<int>(rng.index(16));
    const int W = bev ? 32 + static_cast<int>(rng.index(33)) : 15 + static_cast<int>(rng.index(26));
    const std::size_t dim = 3 * (1 + rng.index(8));
    GridRefiner g = GridRefiner::with_defaults(bev ? GridKind::kBev : GridKind::kImage,
                                               9000 + sets, dim);
    std::vector<ObjectPrior> objs(1 + rng.index(6));
    for (auto& o : objs) {
      o.e_cat.resize(dim);
      for (double& v : o.e_cat) v = rng.normal(0.0, 2.0);
      o.center_row = rng.uniform(0.0, H - 1.0);
      o.center_col = rng.uniform(0.0, W - 1.0);
    }
    FeatureGrid f(H, W, 2, bev ? GridKind::kBev : GridKind::kImage);
    for (double& v : f.data) v = rng.normal();
    const GridRefinement res = refine_grid(f, objs, g);

    for (std::size_t i = 0; i < objs.size(); ++i) {
      const int level = res.levels[i];
      const double radius = g.maps.scope_radii[static_cast<std::size_t>(level)];
      const FilterMask m = object_mask(objs[i], level, g.maps, f.shape());
      const int pr = static_cast<int>(std::lround(objs[i].center_row));
      const int pc = static_cast<int>(std::lround(objs[i].center_col));
      for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
          const double v = m.at(r, c);
          if (!(v >= 0.0 && v <= 1.0)) ++violations;
          if (!in_scope(objs[i], radius, r, c) && v != 0.0) ++violations;
          if ((r != pr || c != pc) && v > m.at(pr, pc)) ++violations;
        }
      }
      if (!(m.at(pr, pc) > 0.0)) ++violations;
      ++objects_checked;
    }
    for (const FilterMask& lm : res.level_masks) {
      const double radius = g.maps.scope_radii[static_cast<std::size_t>(lm.level)];
      for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
          const double v = lm.at(r, c);
          if (!(v >= 0.0 && v <= 1.0)) ++violations;
          bool covered = false;
          for (std::size_t i = 0; i < objs.size(); ++i) {
            covered = covered || (res.levels[i] == lm.level && in_scope(objs[i], radius, r, c));
          }
          if (!covered && v != 0.0) ++violations;
        }
      }
    }
  }
  Outcome o;
  o.pass = violations == 0;
  o.detail = std::to_string(sets) + " object sets, " + std::to_string(objects_checked) +
             " object masks, violations " + std::to_string(violations);
  return o;
}

// ---------------------------------------------------------------- 6

Outcome noiseless_end_to_end() {
  Outcome o;
  for (const auto& s : standard_suites()) {
    const Scenario sc = generate(s.noiseless());
    const TrackingRun run = track_scenario(sc, benchmark_tracker_config());
    const MetricsReport r = evaluate(sc.ground_truth, run.frames);
    const bool ok = r.amota == 1.0 && r.ids == 0;
    o.pass = o.pass && ok;
    o.detail += s.name + " AMOTA " + fmt(r.amota) + " IDS " + std::to_string(r.ids) + "; ";
  }
  return o;
}

// ---------------------------------------------------------------- 7

Outcome ablation_directionality() {
  const auto t0 = Clock::now();
  std::vector<ScenarioConfig> suites;
  for (const char* n : {"dense-neighbors", "occlusion", "small-objects", "high-fp"}) {
    suites.push_back(standard_suite(n));
  }
  const auto cells = cli::run_ablation(suites, cli::benchmark_profile());
  Outcome o;
  for (const auto& s : suites) {
    double full = 0, none = 0;
    std::vector<std::pair<std::string, double>> single;
    for (const auto& c : cells) {
      if (c.suite != s.name) continue;
      const int on = c.variant.multi_clue + c.variant.buffer + c.variant.cascade;
      if (on == 3) full = c.report.amota;
      if (on == 0) none = c.report.amota;
      if (on == 2) {
        const std::string off = !c.variant.multi_clue ? "MC" : !c.variant.buffer ? "Buff" : "Cascade";
        single.emplace_back(off, c.report.amota);
      }
    }
    bool ok = full - none >= 0.05;
    for (const auto& [name, v] : single) ok = ok && full >= v && v >= none;
    o.pass = o.pass && ok;
    o.detail += s.name + " full " + fmt(full, 4) + " none " + fmt(none, 4) + " (";
    for (const auto& [name, v] : single) o.detail += "-" + name + " " + fmt(v, 4) + " ";
    o.detail += "); ";
  }
  const double secs = seconds_since(t0);
  o.pass = o.pass && secs < 300.0;
  o.detail += fmt(secs, 3) + " s";
  return o;
}

// ---------------------------------------------------------------- 8

Outcome cascade_gating() {
  std::size_t stage2 = 0, violations = 0;
  for (const auto& s : standard_suites()) {
    const Scenario sc = generate(s);
    for (const TrackerConfig& cfg : {TrackerConfig{}, benchmark_tracker_config()}) {
      const TrackingRun run = track_scenario(sc, cfg);
      for (const StepResult& st : run.steps) {
        for (const Match& m : st.matches) {
          if (m.stage != MatchStage::kScaleAware) continue;
          ++stage2;
          if (std::abs(m.det_level - m.track_level) > 1) ++violations;
        }
      }
    }
  }
  Outcome o;
  o.pass = violations == 0 && stage2 > 0;
  o.detail = std::to_string(stage2) + " stage-2 matches across all suites, level gap > 1: " +
             std::to_string(violations);
  return o;
}

// ---------------------------------------------------------------- 9

Outcome metrics_fixture() {
  const auto fx = fixture::metrics_fixture();
  const MetricsReport r = evaluate(fx.gt, fx.tracks);
  bool ok = std::abs(r.mota - 0.6667) <= 1e-4 && std::abs(r.amota - fixture::kFixtureAmota) <= 1e-12;

  Rng rng(909);
  int trials = 0, raised = 0;
  for (const char* name : {"basic", "occlusion", "high-fp"}) {
    const Scenario sc = generate(standard_suite(name));
    const TrackingRun run = track_scenario(sc, benchmark_tracker_config());
    const double base = evaluate(sc.ground_truth, run.frames).amota;
    for (int t = 0; t < 20; ++t, ++trials) {
      std::vector<TrackFrame> noisy = run.frames;
      for (auto& f : noisy) {
        const int extra = static_cast<int>(rng.index(3));
        for (int e = 0; e < extra; ++e) {
          f.predictions.push_back({900000 + t * 10 + e,
                                   Box3D(1000 + rng.uniform(0, 100), -1000, 0, 4, 2, 1.5, 0),
                                   rng.uniform(), 2});
        }
      }
      if (evaluate(sc.ground_truth, noisy).amota > base) ++raised;
    }
  }
  ok = ok && raised == 0;
  Outcome o;
  o.pass = ok;
  o.detail = "MOTA " + fmt(r.mota, 6) + ", AMOTA " + fmt(r.amota, 6) + " (expected " +
             fmt(fixture::kFixtureAmota, 6) + "); " + std::to_string(trials) +
             " FP injections raised AMOTA " + std::to_string(raised) + " times";
  return o;
}

// ---------------------------------------------------------------- 10

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string("\"") + CYCTRACK_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return rc == 0 ? 0 : 1;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("cyctrack_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const std::string conf = std::string(CYCTRACK_SOURCE_DIR) + "/configs/benchmark.conf";
  const std::vector<std::string> files{"gt.jsonl", "dets.jsonl", "tracks.jsonl", "report.json",
                                       "simulate.log", "track.log", "evaluate.log"};
  std::vector<std::vector<std::string>> contents;
  int failures = 0;
  for (const char* run : {"a", "b"}) {
    const fs::path d = root / run;
    fs::create_directories(d);
    const std::string q = "\"" + d.string() + "\"";
    failures += run_cli("simulate --suite occlusion --seed 1234 --out " + q, d / "simulate.log");
    failures += run_cli("track --dets " + q + "/dets.jsonl --config \"" + conf + "\" --out " + q +
                            "/tracks.jsonl",
                        d / "track.log");
    failures += run_cli("evaluate --gt " + q + "/gt.jsonl --tracks " + q + "/tracks.jsonl --out " +
                            q + "/report.json",
                        d / "evaluate.log");
    std::vector<std::string> c;
    for (const auto& f : files) c.push_back(slurp(d / f));
    contents.push_back(std::move(c));
  }
  int differing = 0, empty = 0;
  std::size_t bytes = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    differing += contents[0][i] == contents[1][i] ? 0 : 1;
    empty += contents[0][i].empty() ? 1 : 0;
    bytes += contents[0][i].size();
  }
  fs::remove_all(root);
  Outcome o;
  o.pass = failures == 0 && differing == 0 && empty == 0;
  o.detail = std::to_string(files.size()) + " artifacts (" + std::to_string(bytes) +
             " bytes) compared, differing " + std::to_string(differing) + ", failed commands " +
             std::to_string(failures);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"assignment optimality vs brute force", assignment_optimality},
      {"rotated BEV IoU vs 1 mm raster", rotated_iou},
      {"Kalman soundness", kalman_soundness},
      {"temporal fusion vs naive loops", fusion_oracle},
      {"filter mask contract", mask_contract},
      {"noiseless end-to-end", noiseless_end_to_end},
      {"ablation directionality", ablation_directionality},
      {"cascade level gating", cascade_gating},
      {"metrics fixture", metrics_fixture},
      {"CLI determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << criteria[i].first
              << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
