#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

// "HxW"; returns false on malformed input.
bool parse_dims(const std::string& s, int& h, int& w) {
  const auto x = s.find('x');
  if (x == std::string::npos) return false;
  try {
    std::size_t a = 0, b = 0;
    const std::string hs = s.substr(0, x), ws = s.substr(x + 1);
    h = std::stoi(hs, &a);
    w = std::stoi(ws, &b);
    return a == hs.size() && b == ws.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  using namespace cyctrack::cli;

  CLI::App app{"cyctrack: object-aware 3D multi-object tracking toolkit"};
  app.require_subcommand(1);

  SimulateOptions sim;
  std::uint64_t sim_seed = 0;
  auto* simc = app.add_subcommand("simulate", "Generate a synthetic scenario (ground truth + detections)");
  auto* suite_opt = simc->add_option("--suite", sim.suite, "Named scenario suite");
  auto* scen_opt = simc->add_option("--scenario", sim.scenario_path, "Scenario JSON file");
  suite_opt->excludes(scen_opt);
  simc->add_option("--out", sim.out_dir, "Output directory")->required();
  auto* seed_opt = simc->add_option("--seed", sim_seed, "Override the scenario seed");
  simc->add_flag("--noiseless", sim.noiseless, "Disable all measurement noise, FP and FN");

  TrackOptions trk;
  auto* trkc = app.add_subcommand("track", "Run the tracker over a detection log");
  trkc->add_option("--dets", trk.dets_path, "Detection log (JSONL)")->required();
  trkc->add_option("--config", trk.config_path, "Config file (key = value)");
  trkc->add_option("--out", trk.out_path, "Track output (JSONL)")->required();
  trkc->add_flag("--no-multi-clue", trk.no_multi_clue, "Skip the embedding matching stage");
  trkc->add_flag("--no-buffer", trk.no_buffer, "Force all buffer ratios to 0");
  trkc->add_flag("--no-cascade", trk.no_cascade, "Run IoU matching as one flat assignment");

  EvaluateOptions ev;
  auto* evc = app.add_subcommand("evaluate", "Score tracks against ground truth");
  evc->add_option("--gt", ev.gt_path, "Ground truth (JSONL)")->required();
  evc->add_option("--tracks", ev.tracks_path, "Track output (JSONL)")->required();
  evc->add_option("--config", ev.config_path, "Config file (key = value)");
  evc->add_option("--out", ev.out_path, "Write a JSON report here");

  RefineDemoOptions rd;
  std::string image_grid = "15x25", bev_grid = "48x48";
  auto* rdc = app.add_subcommand("refine-demo", "Dump object-aware masks and refined feature grids");
  rdc->add_option("--image-grid", image_grid, "Image grid HxW")->capture_default_str();
  rdc->add_option("--bev-grid", bev_grid, "BEV grid HxW")->capture_default_str();
  rdc->add_option("--channels", rd.channels, "Feature channels C")->capture_default_str();
  rdc->add_option("--objects", rd.objects_path, "Objects (JSONL)");
  rdc->add_option("--seed", rd.seed, "Seed for features and injected maps")->capture_default_str();
  rdc->add_option("--config", rd.config_path, "Config file (key = value)");
  rdc->add_option("--out", rd.out_dir, "Output directory")->required();

  AblateOptions ab;
  auto* abc = app.add_subcommand("ablate", "Run the 8-variant association ablation over suites");
  abc->add_option("--suite", ab.suites, "Suite(s) to run (default: all)");
  abc->add_option("--config", ab.config_path, "Config file (default: benchmark profile)");
  abc->add_option("--out", ab.out_path, "Write JSON rows here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (simc->parsed()) {
      if (*seed_opt) sim.seed = sim_seed;
      return simulate(sim, std::cout, std::cerr);
    }
    if (trkc->parsed()) return track(trk, std::cout, std::cerr);
    if (evc->parsed()) return evaluate_cmd(ev, std::cout, std::cerr);
    if (rdc->parsed()) {
      if (!parse_dims(image_grid, rd.image_height, rd.image_width) ||
          !parse_dims(bev_grid, rd.bev_height, rd.bev_width)) {
        std::cerr << "refine-demo: grid must be given as HxW\n";
        return kExitUsage;
      }
      return refine_demo(rd, std::cout, std::cerr);
    }
    if (abc->parsed()) return ablate(ab, std::cout, std::cerr);
  } catch (const cyctrack::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const cyctrack::ContractViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
