#pragma once

#include "crossview/alignment.hpp"
#include "crossview/assignment.hpp"
#include "crossview/extraction.hpp"
#include "crossview/geometry.hpp"

#include <deque>
#include <optional>
#include <vector>

namespace crossview {

/// Constant-velocity ground-plane Kalman state: (x, y, vx, vy).
struct KalmanState {
  Eigen::Vector4d state = Eigen::Vector4d::Zero();
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Identity();
};

/// Constant-velocity predict with white-acceleration process noise.
void kalman_predict(KalmanState& ks, double dt, double accel_sigma);

/// Position measurement update (Joseph form, keeps covariance PSD).
void kalman_update(KalmanState& ks, const Vec2& measured_xy, double measurement_sigma);

struct TrackerConfig {
  double frame_period = 0.1;        // seconds
  double process_accel_sigma = 2.0; // m/s^2
  double measurement_sigma = 0.1;   // m
  double gate = 5.0;                // m, association gate
  int confirm_hits = 2;
  int max_misses = 3;
  int window = 10;                  // w, frames for speed / motion vector
  double initial_position_var = 0.25;
  double initial_velocity_var = 25.0;
  IcpConfig heading_icp{.max_iterations = 30, .max_correspondence_distance = 0.5};
};

enum class TrackStatus { kTentative, kConfirmed, kDead };

struct BoxObservation {
  double timestamp = 0.0;
  OrientedBoundingBox box;
  Cluster cluster;
};

struct MotionVector {
  Vec2 direction = Vec2::UnitX();
  double speed = 0.0;
  /// Set when the windowed heading mean nearly cancels (e.g. a reversing
  /// object); the direction is still the normalized mean.
  bool low_confidence = false;
};

struct HeadingEstimate {
  Vec2 direction = Vec2::UnitX();
  bool used_strawman_fallback = false;
};

struct Track {
  int track_id = 0;
  KalmanState kalman;
  std::deque<BoxObservation> box_history;
  std::deque<Vec2> heading_history;
  int hits = 0;
  int misses = 0;
  TrackStatus status = TrackStatus::kTentative;
  std::optional<HeadingEstimate> last_heading;

  Vec2 predicted_position() const { return kalman.state.head<2>(); }
  const BoxObservation& latest() const { return box_history.back(); }
};

/// Minimum total-squared-distance one-to-one matching between predicted and
/// detected positions, gated at `gate` meters. Cost semantics follow
/// solve_assignment with unmatched cost gate^2, which maximizes matches and
/// then minimizes cost.
Assignment associate(const std::vector<Vec2>& predicted, const std::vector<Vec2>& detections,
                     double gate);

/// Speed over a window of w frames: |centroid(t) - centroid(t-w)| / (w * T),
/// from raw box centroids. Requires more than w history entries.
std::optional<double> estimate_speed(const Track& track, int w, double frame_period);

/// Centroid-delta heading: the box horizontal axis direction (+-major,
/// +-lateral) most aligned with the last centroid displacement. Empty when
/// the displacement is under 1 mm (stationary).
std::optional<Vec2> estimate_heading_strawman(const Track& track);

/// ICP heading: aligns the previous cluster onto the current one and takes
/// the displacement of the previous centroid under that transform, so both
/// endpoints come from the same point set. Falls back to the strawman (and
/// flags it) if ICP cannot find correspondences.
std::optional<HeadingEstimate> estimate_heading_icp(const Track& track, const IcpConfig& cfg);

/// Windowed motion vector: normalized mean of the last w heading vectors
/// plus the windowed speed.
std::optional<MotionVector> estimate_motion_vector(const Track& track, int w,
                                                   double frame_period);

/// Wall-clock split of one tracker step, for per-stage latency reports.
struct TrackerTimings {
  double tracking_seconds = 0.0;  // predict + associate + kalman + lifecycle
  double heading_seconds = 0.0;   // per-track heading ICP
};

/// Single-owner multi-object tracker. Heading ICP per track is a pure
/// function of two clusters and may be dispatched to workers; results are
/// merged by this owner in track order.
class Tracker {
 public:
  explicit Tracker(const TrackerConfig& cfg = {}) : cfg_(cfg) {}

  /// Advances one frame: predict, associate, update, lifecycle. Detections
  /// are (box, cluster) pairs from extraction.
  void update(const std::vector<std::pair<OrientedBoundingBox, Cluster>>& detections,
              double timestamp, TrackerTimings* timings = nullptr);

  const std::vector<Track>& tracks() const { return tracks_; }
  std::vector<const Track*> confirmed() const;
  const TrackerConfig& config() const { return cfg_; }

  /// Predicted centroids for the current track set after advancing dt.
  std::vector<Vec2> predict(double dt);

 private:
  TrackerConfig cfg_;
  std::vector<Track> tracks_;
  int next_track_id_ = 1;
  std::optional<double> last_timestamp_;
};

}  // namespace crossview
