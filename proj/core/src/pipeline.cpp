#include "crossview/pipeline.hpp"

#include "crossview/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace crossview {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

AlignmentResult ground_truth_alignment(const SceneConfig& scene) {
  AlignmentResult result;
  if (scene.sensors.empty()) return result;
  const RigidTransform ref_inv = scene.sensors[0].pose.inverse();
  for (const SensorModel& s : scene.sensors) {
    result.transforms.push_back(ref_inv.compose(s.pose));
    result.residual_rmse.push_back(0.0);
    result.converged.push_back(true);
    result.failures.push_back("");
  }
  // Levelling: raw reference frame -> world orientation with the reference
  // base at the origin and the ground at z = 0.
  RigidTransform level = scene.sensors[0].pose;
  level.translation.x() = 0.0;
  level.translation.y() = 0.0;
  result.reference_levelling = level;
  return result;
}

PerceptionPipeline::PerceptionPipeline(AlignmentResult alignment, BackgroundModel background,
                                       const PipelineConfig& cfg)
    : alignment_(std::move(alignment)),
      background_(std::move(background)),
      cfg_(cfg),
      tracker_(cfg.tracker) {
  // Fused background for the unoptimized (stitch-first) order: stitch the
  // per-sensor backgrounds once.
  std::map<int, PointCloud> residuals;
  for (const auto& [sensor_id, bg] : background_.sensors) residuals[sensor_id] = bg.cloud;
  if (!residuals.empty()) {
    const FusedFrame fused = stitch(residuals, alignment_);
    SensorBackground merged;
    merged.sensor_id = -1;
    merged.cloud = fused.points;
    merged.index = std::make_shared<KdTree>(merged.cloud);
    fused_background_.config = background_.config;
    fused_background_.sensors.emplace(-1, std::move(merged));
  }
}

FrameResult PerceptionPipeline::process(const std::vector<PointCloud>& sensor_frames,
                                        int frame_index, StageTimings* timings) {
  StageTimings local;
  StageTimings& tm = timings ? *timings : local;
  tm.frame = frame_index;

  FusedFrame fused;
  if (cfg_.subtract_before_stitch) {
    // Subtract each sensor against its own background, then stitch residuals.
    auto t0 = Clock::now();
    std::vector<PointCloud> residuals(sensor_frames.size());
    std::vector<SubtractionStats> stats(sensor_frames.size());
    parallel_for(sensor_frames.size(), [&](std::size_t i) {
      const PointCloud& frame = sensor_frames[i];
      const SensorBackground& bg = background_.for_sensor(frame.sensor_id);
      if (cfg_.organized_subtraction && frame.organization && bg.lattice) {
        residuals[i] = subtract_background_organized(
            frame, bg, background_.config.beam_range_tolerance, &stats[i]);
      } else {
        residuals[i] =
            subtract_background(frame, bg, background_.config.match_radius, &stats[i]);
      }
    });
    tm.background_subtraction += seconds_since(t0);
    for (const auto& s : stats) tm.subtraction_comparisons += s.comparisons;

    t0 = Clock::now();
    std::map<int, PointCloud> by_sensor;
    for (PointCloud& r : residuals) by_sensor[r.sensor_id] = std::move(r);
    StitchStats stitch_stats;
    fused = stitch(by_sensor, alignment_, &stitch_stats);
    tm.stitched_points += stitch_stats.points_transformed;
    fused.points = apply_transform(alignment_.reference_levelling, fused.points);
    tm.stitching += seconds_since(t0);
  } else {
    // Unoptimized order: stitch full frames, then subtract the fused
    // background from the fused frame.
    auto t0 = Clock::now();
    std::map<int, PointCloud> by_sensor;
    for (const PointCloud& f : sensor_frames) by_sensor[f.sensor_id] = f;
    StitchStats stitch_stats;
    fused = stitch(by_sensor, alignment_, &stitch_stats);
    tm.stitched_points += stitch_stats.points_transformed;
    tm.stitching += seconds_since(t0);

    t0 = Clock::now();
    SubtractionStats stats;
    const SensorBackground& bg = fused_background_.for_sensor(-1);
    fused.points = subtract_background(fused.points, bg, background_.config.match_radius, &stats);
    tm.subtraction_comparisons += stats.comparisons;
    fused.points = apply_transform(alignment_.reference_levelling, fused.points);
    tm.background_subtraction += seconds_since(t0);
  }

  auto t0 = Clock::now();
  const std::vector<Cluster> clusters = cluster_dbscan(fused, cfg_.dbscan);
  tm.clustering += seconds_since(t0);

  t0 = Clock::now();
  std::vector<std::pair<OrientedBoundingBox, Cluster>> detections(clusters.size());
  parallel_for(clusters.size(), [&](std::size_t i) {
    detections[i] = {fit_bounding_box(clusters[i]), clusters[i]};
  });
  tm.bounding_box += seconds_since(t0);

  TrackerTimings tracker_tm;
  tracker_.update(detections, fused.timestamp, &tracker_tm);
  tm.tracking += tracker_tm.tracking_seconds;
  tm.heading += tracker_tm.heading_seconds;

  t0 = Clock::now();
  FrameResult result;
  result.frame = frame_index;
  result.timestamp = fused.timestamp;
  for (const Track* track : tracker_.confirmed()) {
    TrackRecord rec;
    rec.id = track->track_id;
    rec.box = track->latest().box;
    rec.centroid = rec.box.centroid;
    if (track->last_heading) rec.heading = track->last_heading->direction;
    rec.speed = estimate_speed(*track, cfg_.tracker.window, cfg_.tracker.frame_period);
    rec.motion =
        estimate_motion_vector(*track, cfg_.tracker.window, cfg_.tracker.frame_period);
    result.tracks.push_back(std::move(rec));
  }
  tm.motion += seconds_since(t0);
  tm.participants = result.tracks.size();
  return result;
}

RunOutput run_pipeline(const SceneConfig& scene, const PipelineConfig& cfg) {
  if (scene.sensors.empty()) throw PipelineError("run_pipeline: scene has no sensors");

  // Calibration segment: the same statics with no dynamic objects.
  SceneConfig calibration = scene;
  calibration.objects.clear();

  AlignmentResult alignment;
  if (cfg.estimate_alignment) {
    AlignmentInput input;
    for (std::size_t s = 0; s < scene.sensors.size(); ++s) {
      input.clouds.push_back(sample_frame(calibration, s, 0));
    }
    const Vec3 ref_base = scene.sensors[0].pose.translation;
    for (std::size_t s = 1; s < scene.sensors.size(); ++s) {
      const Vec3 base = scene.sensors[s].pose.translation;
      input.ground_distances.push_back(std::hypot(base.x() - ref_base.x(),
                                                  base.y() - ref_base.y()));
    }
    alignment = align_all(input, cfg.alignment_icp);
  } else {
    alignment = ground_truth_alignment(scene);
  }

  // Background batches from the calibration scene, spaced across its
  // duration so transients would fail the intersection.
  std::map<int, std::vector<std::vector<PointCloud>>> batches;
  int calibration_frame = 0;
  for (int b = 0; b < cfg.background_batches; ++b) {
    for (std::size_t s = 0; s < scene.sensors.size(); ++s) {
      auto& sensor_batches = batches[static_cast<int>(s)];
      if (static_cast<int>(sensor_batches.size()) <= b) sensor_batches.resize(b + 1);
    }
    for (int f = 0; f < cfg.background_frames_per_batch; ++f) {
      for (std::size_t s = 0; s < scene.sensors.size(); ++s) {
        batches[static_cast<int>(s)][b].push_back(
            sample_frame(calibration, s, calibration_frame));
      }
      ++calibration_frame;
    }
  }
  const BackgroundModel background = build_background_model(batches, cfg.background);

  PerceptionPipeline pipeline(alignment, background, cfg);

  RunOutput out;
  out.alignment = pipeline.alignment();
  const int frames = static_cast<int>(std::floor(scene.duration / scene.frame_period)) + 1;
  for (int frame = 0; frame < frames; ++frame) {
    std::vector<PointCloud> clouds(scene.sensors.size());
    for (std::size_t s = 0; s < scene.sensors.size(); ++s) {
      clouds[s] = sample_frame(scene, s, frame);
    }
    StageTimings tm;
    out.results.push_back(pipeline.process(clouds, frame, &tm));
    out.timings.push_back(tm);
    out.truth.push_back(ground_truth_at(scene, frame));
  }
  return out;
}

}  // namespace crossview
