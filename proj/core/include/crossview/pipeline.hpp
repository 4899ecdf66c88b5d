#pragma once

#include "crossview/alignment.hpp"
#include "crossview/extraction.hpp"
#include "crossview/fusion.hpp"
#include "crossview/planner.hpp"
#include "crossview/simulator.hpp"
#include "crossview/tracking.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace crossview {

struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PipelineConfig {
  BackgroundConfig background;
  DbscanConfig dbscan;
  TrackerConfig tracker;
  bool subtract_before_stitch = true;   // the optimized stage order
  bool organized_subtraction = false;   // beam-lattice fast path when available
  bool estimate_alignment = true;       // false: take ground-truth poses from the scene
  int background_batches = 2;
  int background_frames_per_batch = 3;
  IcpConfig alignment_icp{.max_iterations = 60,
                          .max_correspondence_distance = 1.0,
                          .transform_epsilon = 1e-8,
                          .mse_epsilon = 1e-10,
                          .max_source_points = 6000};
};

/// Per-frame wall-clock stage costs (seconds) and instrumentation counters.
struct StageTimings {
  int frame = 0;
  double background_subtraction = 0.0;
  double stitching = 0.0;
  double clustering = 0.0;
  double bounding_box = 0.0;
  double tracking = 0.0;
  double heading = 0.0;
  double motion = 0.0;
  double planning = 0.0;
  std::size_t participants = 0;
  std::size_t stitched_points = 0;
  std::size_t subtraction_comparisons = 0;
};

struct TrackRecord {
  int id = 0;
  Vec3 centroid = Vec3::Zero();
  OrientedBoundingBox box;
  std::optional<Vec2> heading;
  std::optional<double> speed;
  std::optional<MotionVector> motion;
};

struct FrameResult {
  int frame = 0;
  double timestamp = 0.0;
  std::vector<TrackRecord> tracks;
};

/// Ground-truth alignment assembled from the scene's sensor poses:
/// transforms[i] = pose(0)^-1 * pose(i), plus the exact levelling.
AlignmentResult ground_truth_alignment(const SceneConfig& scene);

/// Per-frame perception: subtract -> stitch -> level -> cluster -> box ->
/// track -> heading -> motion, in the configured stage order.
class PerceptionPipeline {
 public:
  PerceptionPipeline(AlignmentResult alignment, BackgroundModel background,
                     const PipelineConfig& cfg);

  FrameResult process(const std::vector<PointCloud>& sensor_frames, int frame_index,
                      StageTimings* timings = nullptr);

  const Tracker& tracker() const { return tracker_; }
  const AlignmentResult& alignment() const { return alignment_; }

 private:
  AlignmentResult alignment_;
  BackgroundModel background_;
  BackgroundModel fused_background_;  // for the stitch-first stage order
  PipelineConfig cfg_;
  Tracker tracker_;
};

struct RunOutput {
  AlignmentResult alignment;
  std::vector<FrameResult> results;
  std::vector<StageTimings> timings;
  std::vector<GroundTruthFrame> truth;
};

/// Full run over a synthetic scene: calibrates (alignment + background) on
/// an object-free copy of the scene, then processes every frame.
RunOutput run_pipeline(const SceneConfig& scene, const PipelineConfig& cfg);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct Metrics {
  double positioning_error = 0.0;   // meters, mean matched 2D centroid error
  double heading_error_deg = 0.0;   // mean absolute heading deviation
  double speed_error = 0.0;         // m/s, mean absolute
  double speed_error_rel_pct = 0.0; // percent, truth speed > 0.5 m/s samples
  double mota = 0.0;
  double motp = 0.0;                // meters
  std::size_t ground_truth_total = 0;
  std::size_t false_negatives = 0;
  std::size_t false_positives = 0;
  std::size_t id_switches = 0;
  std::size_t matched_samples = 0;
};

/// Frame-by-frame optimal gated matching of reported tracks to ground
/// truth; MOTA = 1 - (FN + FP + IDSW) / GT. Throws on empty truth.
Metrics compute_metrics(const std::vector<FrameResult>& results,
                        const std::vector<GroundTruthFrame>& truth, double gate = 2.0);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

void write_results_jsonl(std::ostream& os, const std::vector<FrameResult>& results);
std::vector<FrameResult> read_results_jsonl(std::istream& is);

void write_truth_jsonl(std::ostream& os, const std::vector<GroundTruthFrame>& truth);
std::vector<GroundTruthFrame> read_truth_jsonl(std::istream& is);

/// metrics.csv: a single header + single data row. timings.csv: one row per
/// frame. Deterministic column order; reparsing and re-exporting reproduces
/// the file byte for byte.
std::string metrics_to_csv(const Metrics& m);
Metrics metrics_from_csv(const std::string& csv);
std::string timings_to_csv(const std::vector<StageTimings>& rows);
std::vector<StageTimings> timings_from_csv(const std::string& csv);

}  // namespace crossview
