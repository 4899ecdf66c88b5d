#pragma once

#include "crossview/alignment.hpp"
#include "crossview/geometry.hpp"
#include "crossview/kdtree.hpp"

#include <map>
#include <memory>
#include <vector>

namespace crossview {

struct FusionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BackgroundConfig {
  double match_radius = 0.10;         // meters, NN match for intersection/subtraction
  double beam_range_tolerance = 0.20; // meters, organized range comparison
};

/// Per-sensor static background: the point cloud plus optional beam-lattice
/// ranges captured alongside it, with a prebuilt search index.
struct SensorBackground {
  int sensor_id = 0;
  PointCloud cloud;
  std::shared_ptr<const KdTree> index;  // over cloud.points
  std::optional<Organization> lattice;  // ranges/has_return describe the background
};

struct BackgroundModel {
  BackgroundConfig config;
  std::map<int, SensorBackground> sensors;

  const SensorBackground& for_sensor(int id) const;
};

/// Builds one sensor's background from batches of consecutive frames: within
/// a batch a point of the first frame survives iff every other frame has a
/// point within match_radius; the union of batch intersections (deduplicated
/// at half the match radius) is the background. All frames must share a
/// sensor id. A parked object present throughout one batch ends up in the
/// background; that is a documented limitation of the scheme.
PointCloud build_background(const std::vector<std::vector<PointCloud>>& batches,
                            const BackgroundConfig& cfg = {});

/// Assembles a full model from per-sensor frame batches. When the first
/// frame of the first batch is beam-organized, its lattice is retained for
/// organized subtraction.
BackgroundModel build_background_model(
    const std::map<int, std::vector<std::vector<PointCloud>>>& batches_per_sensor,
    const BackgroundConfig& cfg = {});

/// Instrumentation for the subtraction cost comparison: elementary
/// comparisons are per-point distance evaluations (NN path) or per-beam
/// range comparisons (organized path).
struct SubtractionStats {
  std::size_t points_in = 0;
  std::size_t points_out = 0;
  std::size_t comparisons = 0;
};

/// Keeps exactly the points whose nearest background neighbor is farther
/// than match_radius. An empty background returns the frame unchanged.
/// Residuals drop organization metadata.
PointCloud subtract_background(const PointCloud& frame, const SensorBackground& bg,
                               double match_radius, SubtractionStats* stats = nullptr);

/// Organized fast path: a beam is foreground iff |range - bg_range| exceeds
/// the tolerance or the background had no return where this frame does.
/// Requires the same beam/azimuth lattice as the background.
PointCloud subtract_background_organized(const PointCloud& frame, const SensorBackground& bg,
                                         double range_tolerance,
                                         SubtractionStats* stats = nullptr);

/// One fused perception frame in the reference sensor's coordinate system.
struct FusedFrame {
  PointCloud points;
  std::map<int, std::size_t> source_counts;
  double timestamp = 0.0;
};

struct StitchStats {
  std::size_t points_transformed = 0;
};

/// Applies each sensor's alignment transform and concatenates residuals in
/// ascending sensor-id order. Sensor ids index into transforms.
FusedFrame stitch(const std::map<int, PointCloud>& residuals, const AlignmentResult& transforms,
                  StitchStats* stats = nullptr);

}  // namespace crossview
