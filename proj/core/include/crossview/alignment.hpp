#pragma once

#include "crossview/geometry.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace crossview {

struct AlignmentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// RANSAC configuration for ground-plane segmentation.
struct RansacPlaneConfig {
  int iterations = 300;
  double inlier_threshold = 0.10;  // meters
  std::uint64_t seed = 42;
};

/// Finds the plane with the most inliers and refits it to them in a
/// least-squares sense. The normal is oriented so the sensor origin has
/// positive signed distance. Throws AlignmentError when the cloud is
/// degenerate (fewer than 3 points or all collinear).
Plane segment_ground_plane(const PointCloud& c, const RansacPlaneConfig& cfg = {});

/// Result of levelling a cloud onto its ground plane.
struct GroundAlignment {
  PointCloud cloud;          // ground plane mapped to z = 0, +z up
  RigidTransform transform;  // sensor frame -> levelled frame
  double height = 0.0;       // sensor origin's distance above the plane
  double roll = 0.0;         // applied corrective angle about x, radians
  double pitch = 0.0;        // applied corrective angle about y, radians
};

/// Rotates the cloud so the ground normal becomes +z and shifts it so the
/// ground plane sits at z = 0. Rejects planes whose normal lies within 10
/// degrees of horizontal (not a credible ground plane for an elevated
/// sensor).
GroundAlignment align_to_ground_plane(const PointCloud& c, const Plane& ground);

/// Yaw grid search over rotations of both clouds about their own base points
/// (c1 about the origin, c2 about (d, 0, 0)). Both clouds must already be
/// ground-levelled and c2 displaced to base (d, 0). Returns the grid pair
/// minimizing the asymmetric cloud distance; ties break toward the
/// lexicographically smallest (yaw1, yaw2).
struct YawSearchConfig {
  double step = deg_to_rad(15.0);
  std::size_t max_points = 2000;  // per-cloud subsample bound for distance evals
};

struct YawEstimate {
  double yaw1 = 0.0;
  double yaw2 = 0.0;
  double distance = 0.0;  // objective value at the minimum
};

YawEstimate estimate_yaw_pair(const PointCloud& c1, const PointCloud& c2, double ground_distance,
                              const YawSearchConfig& cfg = {});

/// Alignment input: clouds[0] is the reference sensor; ground_distances[i-1]
/// is the measured distance on the ground from sensor i to the reference.
struct AlignmentInput {
  std::vector<PointCloud> clouds;
  std::vector<double> ground_distances;
};

/// Per-sensor pre-ICP pose estimate. guesses[i] maps sensor i's raw frame
/// into the reference sensor's raw frame (identity for the reference).
struct InitialGuess {
  std::vector<RigidTransform> guesses;
  std::vector<double> heights;
  std::vector<double> rolls;
  std::vector<double> pitches;
  std::vector<double> yaws;              // relative yaw applied to each sensor
  RigidTransform reference_levelling;    // reference raw frame -> ground frame
};

InitialGuess initial_guess(const AlignmentInput& input, const RansacPlaneConfig& plane_cfg = {},
                           const YawSearchConfig& yaw_cfg = {});

/// ICP convergence and matching parameters.
struct IcpConfig {
  int max_iterations = 100;
  double max_correspondence_distance = 1.0;  // meters
  double transform_epsilon = 1e-8;
  double mse_epsilon = 1e-10;
  std::size_t max_source_points = 0;  // 0 = use all source points
};

struct IcpIterationTrace {
  double mse_before = 0.0;  // over this iteration's correspondences, pre-update
  double mse_after = 0.0;   // same correspondences after the closed-form step
  std::size_t correspondences = 0;
};

struct IcpResult {
  RigidTransform transform;  // cumulative, composed with the initial guess
  double rmse = 0.0;         // RMS correspondence distance at exit
  bool converged = false;
  int iterations = 0;
  std::vector<IcpIterationTrace> trace;
};

/// Closed-form least-squares rigid transform (rotation + translation, unit
/// scale) mapping source[i] onto target[i], via SVD of the demeaned
/// cross-covariance with reflection correction. Requires >= 3 pairs.
RigidTransform estimate_rigid_transform(const std::vector<Vec3>& source,
                                        const std::vector<Vec3>& target);

/// Point-to-point ICP with exact nearest-neighbor correspondences. Throws
/// AlignmentError if an iteration finds fewer than 3 correspondences.
IcpResult icp_refine(const PointCloud& source, const PointCloud& target,
                     const RigidTransform& guess, const IcpConfig& cfg = {});

/// Full alignment output. transforms[i] maps sensor i's raw frame into the
/// reference sensor's raw frame; transforms[0] is the identity.
/// reference_levelling maps the reference raw frame into a gravity-aligned
/// frame with the ground at z = 0 (useful downstream, not part of the
/// per-sensor transforms).
struct AlignmentResult {
  std::vector<RigidTransform> transforms;
  std::vector<double> residual_rmse;
  std::vector<bool> converged;
  std::vector<std::string> failures;  // empty string when the pair succeeded
  RigidTransform reference_levelling;
};

AlignmentResult align_all(const AlignmentInput& input, const IcpConfig& cfg = {},
                          const RansacPlaneConfig& plane_cfg = {},
                          const YawSearchConfig& yaw_cfg = {});

/// JSON (de)serialization of an AlignmentResult: row-major rotations,
/// translations, residuals and a config echo.
std::string alignment_to_json(const AlignmentResult& result, const IcpConfig& cfg);
AlignmentResult alignment_from_json(const std::string& json_text);

}  // namespace crossview
