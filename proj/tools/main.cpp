// crossview command-line front end: simulation, calibration, the perception
// pipeline, planning, metrics, and the canned experiments.

#include "crossview/alignment.hpp"
#include "crossview/cyberphys.hpp"
#include "crossview/fusion.hpp"
#include "crossview/pcd_io.hpp"
#include "crossview/pipeline.hpp"
#include "crossview/planner.hpp"
#include "crossview/simulator.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace crossview;

namespace {

nlohmann::json pipeline_config_to_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  j["background"] = {{"match_radius", cfg.background.match_radius},
                     {"beam_range_tolerance", cfg.background.beam_range_tolerance}};
  j["dbscan"] = {{"eps", cfg.dbscan.eps},
                 {"min_pts", cfg.dbscan.min_pts},
                 {"min_cluster_size", cfg.dbscan.min_cluster_size}};
  j["tracker"] = {{"frame_period", cfg.tracker.frame_period},
                  {"process_accel_sigma", cfg.tracker.process_accel_sigma},
                  {"measurement_sigma", cfg.tracker.measurement_sigma},
                  {"gate", cfg.tracker.gate},
                  {"confirm_hits", cfg.tracker.confirm_hits},
                  {"max_misses", cfg.tracker.max_misses},
                  {"window", cfg.tracker.window},
                  {"heading_icp_max_iterations", cfg.tracker.heading_icp.max_iterations},
                  {"heading_icp_max_correspondence_distance",
                   cfg.tracker.heading_icp.max_correspondence_distance}};
  j["subtract_before_stitch"] = cfg.subtract_before_stitch;
  j["organized_subtraction"] = cfg.organized_subtraction;
  j["estimate_alignment"] = cfg.estimate_alignment;
  j["background_batches"] = cfg.background_batches;
  j["background_frames_per_batch"] = cfg.background_frames_per_batch;
  j["alignment_icp"] = {
      {"max_iterations", cfg.alignment_icp.max_iterations},
      {"max_correspondence_distance", cfg.alignment_icp.max_correspondence_distance},
      {"transform_epsilon", cfg.alignment_icp.transform_epsilon},
      {"mse_epsilon", cfg.alignment_icp.mse_epsilon},
      {"max_source_points", cfg.alignment_icp.max_source_points}};
  return j;
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  if (j.contains("background")) {
    cfg.background.match_radius = j["background"].value("match_radius", 0.10);
    cfg.background.beam_range_tolerance = j["background"].value("beam_range_tolerance", 0.20);
  }
  if (j.contains("dbscan")) {
    cfg.dbscan.eps = j["dbscan"].value("eps", 0.7);
    cfg.dbscan.min_pts = j["dbscan"].value("min_pts", 5);
    cfg.dbscan.min_cluster_size = j["dbscan"].value("min_cluster_size", std::size_t{10});
  }
  if (j.contains("tracker")) {
    const auto& t = j["tracker"];
    cfg.tracker.frame_period = t.value("frame_period", 0.1);
    cfg.tracker.process_accel_sigma = t.value("process_accel_sigma", 2.0);
    cfg.tracker.measurement_sigma = t.value("measurement_sigma", 0.1);
    cfg.tracker.gate = t.value("gate", 5.0);
    cfg.tracker.confirm_hits = t.value("confirm_hits", 2);
    cfg.tracker.max_misses = t.value("max_misses", 3);
    cfg.tracker.window = t.value("window", 10);
    cfg.tracker.heading_icp.max_iterations = t.value("heading_icp_max_iterations", 30);
    cfg.tracker.heading_icp.max_correspondence_distance =
        t.value("heading_icp_max_correspondence_distance", 0.5);
  }
  cfg.subtract_before_stitch = j.value("subtract_before_stitch", true);
  cfg.organized_subtraction = j.value("organized_subtraction", false);
  cfg.estimate_alignment = j.value("estimate_alignment", true);
  cfg.background_batches = j.value("background_batches", 2);
  cfg.background_frames_per_batch = j.value("background_frames_per_batch", 3);
  if (j.contains("alignment_icp")) {
    const auto& a = j["alignment_icp"];
    cfg.alignment_icp.max_iterations = a.value("max_iterations", 60);
    cfg.alignment_icp.max_correspondence_distance =
        a.value("max_correspondence_distance", 1.0);
    cfg.alignment_icp.transform_epsilon = a.value("transform_epsilon", 1e-8);
    cfg.alignment_icp.mse_epsilon = a.value("mse_epsilon", 1e-10);
    cfg.alignment_icp.max_source_points =
        a.value("max_source_points", std::size_t{6000});
  }
  return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << content;
}

nlohmann::json trajectory_to_json(const SpaceTimeTrajectory& traj, int epoch,
                                  PlanStatus status) {
  nlohmann::json j;
  j["epoch"] = epoch;
  j["vehicle_id"] = traj.vehicle_id;
  j["status"] = status == PlanStatus::kPlanned ? "planned" : "held";
  j["horizon"] = traj.horizon;
  j["waypoints"] = nlohmann::json::array();
  for (const auto& wp : traj.waypoints) {
    j["waypoints"].push_back({{"t", wp.time},
                              {"cell", {wp.cell.x, wp.cell.y}},
                              {"position", {wp.position.x(), wp.position.y()}}});
  }
  return j;
}

int cmd_simulate(const std::string& scene_path, const std::string& out_dir, int frame_limit) {
  const SceneConfig scene = scene_from_json_file(scene_path);
  fs::create_directories(out_dir);
  const int frames_total = static_cast<int>(std::floor(scene.duration / scene.frame_period)) + 1;
  const int frames = frame_limit > 0 ? std::min(frame_limit, frames_total) : frames_total;

  std::ofstream truth_os(fs::path(out_dir) / "truth.jsonl");
  std::vector<GroundTruthFrame> truth;
  for (int f = 0; f < frames; ++f) {
    const FrameSet set = simulate_frame_set(scene, f);
    for (std::size_t s = 0; s < set.clouds.size(); ++s) {
      std::ostringstream name;
      name << "sensor" << s << "_frame" << f << ".pcd";
      write_pcd_file((fs::path(out_dir) / name.str()).string(), set.clouds[s]);
    }
    truth.push_back(set.truth);
  }
  write_truth_jsonl(truth_os, truth);
  std::cout << "wrote " << frames << " frames x " << scene.sensors.size() << " sensors to "
            << out_dir << "\n";
  return 0;
}

int cmd_align(const std::string& ref_path, const std::vector<std::string>& cloud_paths,
              const std::vector<double>& dists, const std::string& out_path) {
  if (cloud_paths.size() != dists.size()) {
    std::cerr << "align: need one --dist per --cloud\n";
    return 2;
  }
  AlignmentInput input;
  input.clouds.push_back(read_pcd_file(ref_path));
  for (const auto& p : cloud_paths) input.clouds.push_back(read_pcd_file(p));
  input.ground_distances = dists;

  IcpConfig icp;
  icp.max_source_points = 6000;
  const AlignmentResult result = align_all(input, icp);
  write_file(out_path, alignment_to_json(result, icp));
  for (std::size_t i = 0; i < result.transforms.size(); ++i) {
    std::cout << "sensor " << i << ": rmse=" << result.residual_rmse[i]
              << " converged=" << (result.converged[i] ? "yes" : "no");
    if (!result.failures[i].empty()) std::cout << " FAILED: " << result.failures[i];
    std::cout << "\n";
  }
  return 0;
}

int cmd_background(int sensor_id, const std::vector<std::string>& first_batch,
                   const std::vector<std::string>& extra_batches, const std::string& out_path) {
  std::vector<std::vector<PointCloud>> batches;
  auto load_batch = [&](const std::vector<std::string>& paths) {
    std::vector<PointCloud> batch;
    for (const auto& p : paths) {
      PointCloud c = read_pcd_file(p);
      c.sensor_id = sensor_id;
      batch.push_back(std::move(c));
    }
    return batch;
  };
  batches.push_back(load_batch(first_batch));
  for (const auto& joined : extra_batches) {
    std::vector<std::string> paths;
    std::istringstream ss(joined);
    std::string item;
    while (std::getline(ss, item, ',')) paths.push_back(item);
    batches.push_back(load_batch(paths));
  }
  const PointCloud bg = build_background(batches);
  write_pcd_file(out_path, bg);
  std::cout << "background for sensor " << sensor_id << ": " << bg.points.size()
            << " points -> " << out_path << "\n";
  return 0;
}

int cmd_run(const std::string& scene_path, const std::string& config_path,
            const std::string& out_dir) {
  const SceneConfig scene = scene_from_json_file(scene_path);
  PipelineConfig cfg;
  if (!config_path.empty()) {
    std::ifstream is(config_path);
    if (!is) throw std::runtime_error("cannot open config: " + config_path);
    nlohmann::json j;
    is >> j;
    cfg = pipeline_config_from_json(j);
  }
  fs::create_directories(out_dir);

  const RunOutput out = run_pipeline(scene, cfg);

  {
    std::ofstream os(fs::path(out_dir) / "results.jsonl");
    write_results_jsonl(os, out.results);
  }
  {
    std::ofstream os(fs::path(out_dir) / "truth.jsonl");
    write_truth_jsonl(os, out.truth);
  }
  write_file(fs::path(out_dir) / "timings.csv", timings_to_csv(out.timings));
  const Metrics metrics = compute_metrics(out.results, out.truth);
  write_file(fs::path(out_dir) / "metrics.csv", metrics_to_csv(metrics));
  // Echo the resolved configuration for reproducibility.
  write_file(fs::path(out_dir) / "config_echo.json", pipeline_config_to_json(cfg).dump(2));
  write_file(fs::path(out_dir) / "alignment.json",
             alignment_to_json(out.alignment, cfg.alignment_icp));

  std::cout << "frames=" << out.results.size() << " MOTA=" << metrics.mota
            << " MOTP=" << metrics.motp << " heading_err=" << metrics.heading_error_deg
            << " deg -> " << out_dir << "\n";
  return 0;
}

int cmd_plan(const std::string& scene_path, const std::string& tracks_path,
             const std::string& out_path) {
  const SceneConfig scene = scene_from_json_file(scene_path);
  if (scene.drivable.width == 0) {
    std::cerr << "plan: scene.json has no drivable grid\n";
    return 2;
  }
  // Per-vehicle goals registered in the scene file.
  std::ifstream scene_is(scene_path);
  nlohmann::json scene_json;
  scene_is >> scene_json;
  std::map<int, GridCell> goals;
  double speed_limit = 10.0;
  if (scene_json.contains("plan")) {
    speed_limit = scene_json["plan"].value("speed_limit", 10.0);
    if (scene_json["plan"].contains("goals")) {
      for (const auto& [key, value] : scene_json["plan"]["goals"].items()) {
        goals[std::stoi(key)] = {value[0].get<int>(), value[1].get<int>()};
      }
    }
  }

  std::ifstream tracks_is(tracks_path);
  if (!tracks_is) throw std::runtime_error("cannot open tracks: " + tracks_path);
  const std::vector<FrameResult> frames = read_results_jsonl(tracks_is);

  PlannerConfig cfg;
  cfg.speed_limit = speed_limit;

  std::ofstream os(out_path);
  for (const FrameResult& frame : frames) {
    const double epoch_start = frame.timestamp;
    std::vector<PlanRequest> requests;
    std::vector<DynamicObstacle> oblivious;
    for (const TrackRecord& t : frame.tracks) {
      const Vec2 pos = t.centroid.head<2>();
      const Vec2 velocity =
          t.motion ? Vec2(t.motion->direction * t.motion->speed) : Vec2::Zero();
      auto goal = goals.find(t.id);
      if (goal != goals.end()) {
        PlanRequest req;
        req.vehicle_id = t.id;
        req.start = scene.drivable.cell_at(pos);
        req.goal = goal->second;
        req.current_speed = t.speed.value_or(0.0);
        req.nominal_speed = std::max(t.motion ? t.motion->speed : 0.0, 1.0);
        req.box = t.box;
        requests.push_back(req);
      } else {
        MovingBox mb;
        mb.box = t.box;
        mb.position = pos;
        mb.velocity = velocity;
        oblivious.push_back(rasterize_extrapolation(mb, scene.drivable, cfg, epoch_start));
      }
    }
    // Planning order: ascending arrival is a property of the scenario; per
    // epoch we keep deterministic ascending-id order.
    std::sort(requests.begin(), requests.end(),
              [](const PlanRequest& a, const PlanRequest& b) {
                return a.vehicle_id < b.vehicle_id;
              });
    const auto outcomes = plan_all(requests, scene.drivable, oblivious, cfg, epoch_start);
    for (const auto& outcome : outcomes) {
      os << trajectory_to_json(outcome.trajectory, frame.frame, outcome.status).dump() << '\n';
    }
  }
  std::cout << "plans -> " << out_path << "\n";
  return 0;
}

int cmd_metrics(const std::string& results_path, const std::string& truth_path, double gate,
                const std::string& out_path) {
  std::ifstream results_is(results_path);
  if (!results_is) throw std::runtime_error("cannot open results: " + results_path);
  std::ifstream truth_is(truth_path);
  if (!truth_is) throw std::runtime_error("cannot open truth: " + truth_path);
  const Metrics m = compute_metrics(read_results_jsonl(results_is), read_truth_jsonl(truth_is),
                                    gate);
  const std::string csv = metrics_to_csv(m);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    write_file(out_path, csv);
  }
  std::cerr << "MOTA=" << m.mota << " MOTP=" << m.motp << " pos_err=" << m.positioning_error
            << " heading_err=" << m.heading_error_deg << "\n";
  return 0;
}

int cmd_experiment_packet_loss(int seeds, const std::string& out_path) {
  std::ostringstream os;
  os << "loss_rate,seed,min_distance,collided,ego_reached_goal,epochs_delivered,epochs_total\n";
  for (double p : {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}) {
    for (int s = 0; s < seeds; ++s) {
      PacketLossConfig cfg;
      cfg.loss_rate = p;
      cfg.seed = 1000 + static_cast<std::uint64_t>(s);
      const PacketLossResult r = packet_loss_experiment(cfg);
      os << p << ',' << s << ',' << r.min_distance << ',' << (r.collided ? 1 : 0) << ','
         << (r.ego_reached_goal ? 1 : 0) << ',' << r.epochs_delivered << ',' << r.epochs_total
         << '\n';
    }
    std::cerr << "loss " << p << " done\n";
  }
  if (out_path.empty()) {
    std::cout << os.str();
  } else {
    write_file(out_path, os.str());
  }
  return 0;
}

std::vector<IntersectionVehicle> symmetric_crossing(int count) {
  std::vector<IntersectionVehicle> vehicles;
  const Arm arms[4] = {Arm::kNorth, Arm::kWest, Arm::kSouth, Arm::kEast};
  for (int i = 0; i < count; ++i) {
    IntersectionVehicle v;
    v.vehicle_id = i + 1;
    v.arm = arms[i % 4];
    v.arrival_offset = 0.0;
    v.speed = 2.0;
    vehicles.push_back(v);
  }
  return vehicles;
}

int cmd_experiment_deadlock(int vehicles) {
  const IntersectionScenario scenario =
      make_intersection_scenario(symmetric_crossing(vehicles));
  const CoopOutcome coop = ideal_coop_baseline(scenario);
  const CoopOutcome central = centralized_crossing(scenario);
  std::cout << "decentralized (shared perception, on-board planning): "
            << (coop.deadlocked ? "DEADLOCK" : "completed") << " after " << coop.frames_run
            << " frames\n";
  std::cout << "centralized sequential planning: "
            << (central.deadlocked ? "DEADLOCK" : "all vehicles reached goals") << "\n";
  return 0;
}

int cmd_experiment_wait_times(int max_vehicles, double cycle, const std::string& out_path) {
  std::ostringstream os;
  os << "vehicles,planned_mean_wait,static_light_mean_wait\n";
  for (int n = 2; n <= max_vehicles; ++n) {
    std::vector<IntersectionVehicle> vehicles;
    const Arm arms[4] = {Arm::kNorth, Arm::kWest, Arm::kSouth, Arm::kEast};
    for (int i = 0; i < n; ++i) {
      IntersectionVehicle v;
      v.vehicle_id = i + 1;
      v.arm = arms[i % 4];
      v.arrival_offset = 1.5 * (i / 4);
      v.speed = 2.0;
      vehicles.push_back(v);
    }
    const IntersectionScenario scenario = make_intersection_scenario(vehicles);
    const WaitTimeResult planned = planned_wait_times(scenario);
    const WaitTimeResult lights = static_light_baseline(scenario, cycle);
    os << n << ',' << planned.mean_wait << ',' << lights.mean_wait << '\n';
    std::cerr << "n=" << n << " planned=" << planned.mean_wait
              << "s lights=" << lights.mean_wait << "s\n";
  }
  if (out_path.empty()) {
    std::cout << os.str();
  } else {
    write_file(out_path, os.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-sensor range fusion, tracking and centralized planning toolkit"};
  app.require_subcommand(1);

  // simulate
  std::string scene_path, out_dir = "out", config_path, out_path;
  int frame_limit = 0;
  auto* simulate = app.add_subcommand("simulate", "ray-cast a synthetic scene to PCD frames");
  simulate->add_option("--scene", scene_path, "scene.json")->required();
  simulate->add_option("--out-dir", out_dir, "output directory");
  simulate->add_option("--frames", frame_limit, "limit number of frames");

  // align
  std::string ref_path;
  std::vector<std::string> cloud_paths;
  std::vector<double> dists;
  std::string align_out = "transforms.json";
  auto* align = app.add_subcommand("align", "estimate sensor-to-reference transforms");
  align->add_option("--ref", ref_path, "reference sensor capture (pcd)")->required();
  align->add_option("--cloud", cloud_paths, "other sensor capture (repeatable)")->required();
  align->add_option("--dist", dists, "ground distance to reference (repeatable)")->required();
  align->add_option("--out", align_out, "output transforms.json");

  // background
  int sensor_id = 0;
  std::vector<std::string> frames_batch, extra_batches;
  std::string bg_out = "background.pcd";
  auto* background = app.add_subcommand("background", "build a static background cloud");
  background->add_option("--sensor", sensor_id, "sensor id")->required();
  background->add_option("--frames", frames_batch, "first batch of frames (pcd)")->required();
  background->add_option("--batch", extra_batches,
                         "additional batch, comma-separated pcd paths (repeatable)");
  background->add_option("--out", bg_out, "output background pcd");

  // run
  auto* run = app.add_subcommand("run", "run the perception pipeline over a scene");
  run->add_option("--scene", scene_path, "scene.json")->required();
  run->add_option("--config", config_path, "pipeline config json");
  run->add_option("--out-dir", out_dir, "output directory");

  // plan
  std::string tracks_path, plan_out = "plans.jsonl";
  auto* plan = app.add_subcommand("plan", "plan trajectories from track records");
  plan->add_option("--scene", scene_path, "scene.json with drivable grid and goals")->required();
  plan->add_option("--tracks", tracks_path, "tracks.jsonl from `run`")->required();
  plan->add_option("--out", plan_out, "output plans.jsonl");

  // metrics
  std::string results_path, truth_path;
  double gate = 2.0;
  auto* metrics = app.add_subcommand("metrics", "compute accuracy metrics");
  metrics->add_option("--results", results_path, "results.jsonl")->required();
  metrics->add_option("--truth", truth_path, "truth.jsonl")->required();
  metrics->add_option("--gate", gate, "matching gate, meters");
  metrics->add_option("--out", out_path, "output metrics.csv (default stdout)");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "canned experiments");
  experiment->require_subcommand(1);
  int seeds = 20, deadlock_vehicles = 2, wait_vehicles = 10;
  double cycle = 20.0;
  auto* packet = experiment->add_subcommand("packet-loss", "trajectory delivery loss sweep");
  packet->add_option("--seeds", seeds, "seeds per loss rate");
  packet->add_option("--out", out_path, "output csv (default stdout)");
  auto* deadlock = experiment->add_subcommand("deadlock", "decentralized vs centralized crossing");
  deadlock->add_option("--vehicles", deadlock_vehicles, "2 or 4");
  auto* waits = experiment->add_subcommand("wait-times", "planned vs static-light wait times");
  waits->add_option("--vehicles", wait_vehicles, "max vehicle count");
  waits->add_option("--cycle", cycle, "light cycle, seconds");
  waits->add_option("--out", out_path, "output csv (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(scene_path, out_dir, frame_limit);
    if (align->parsed()) return cmd_align(ref_path, cloud_paths, dists, align_out);
    if (background->parsed()) return cmd_background(sensor_id, frames_batch, extra_batches, bg_out);
    if (run->parsed()) return cmd_run(scene_path, config_path, out_dir);
    if (plan->parsed()) return cmd_plan(scene_path, tracks_path, plan_out);
    if (metrics->parsed()) return cmd_metrics(results_path, truth_path, gate, out_path);
    if (experiment->parsed()) {
      if (packet->parsed()) return cmd_experiment_packet_loss(seeds, out_path);
      if (deadlock->parsed()) return cmd_experiment_deadlock(deadlock_vehicles);
      if (waits->parsed()) return cmd_experiment_wait_times(wait_vehicles, cycle, out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
