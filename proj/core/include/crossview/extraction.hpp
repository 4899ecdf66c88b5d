#pragma once

#include "crossview/fusion.hpp"
#include "crossview/geometry.hpp"

#include <array>
#include <vector>

namespace crossview {

struct ExtractionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DbscanConfig {
  double eps = 0.7;              // meters
  int min_pts = 5;               // core-point neighborhood threshold (incl. self)
  std::size_t min_cluster_size = 10;
};

/// One connected dynamic object: its points and a per-frame cluster index.
struct Cluster {
  PointCloud points;
  int cluster_id = 0;
};

/// Density clustering with textbook DBSCAN semantics. Clusters are the
/// connected components of core points (>= min_pts neighbors within eps,
/// self included); border points join the cluster of their nearest core
/// neighbor (ties broken by the lexicographically smallest core coordinate),
/// which makes the partition independent of point order. Noise is dropped,
/// as are clusters smaller than min_cluster_size. Cluster ids are assigned
/// in ascending order of each cluster's smallest member index.
std::vector<Cluster> cluster_dbscan(const FusedFrame& frame, const DbscanConfig& cfg = {});
std::vector<Cluster> cluster_dbscan(const PointCloud& cloud, const DbscanConfig& cfg = {});

/// Gravity-aligned oriented bounding box. axes[0] is vertical (+z), axes[1]
/// the major horizontal direction (heading candidate), axes[2] the lateral
/// direction; extents are half-lengths along each axis.
struct OrientedBoundingBox {
  Vec3 centroid = Vec3::Zero();
  std::array<Vec3, 3> axes = {Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitY()};
  Vec3 extents = Vec3::Zero();

  bool contains(const Vec3& p, double slack = 1e-6) const;
  /// Yaw of the major horizontal axis in the ground plane.
  double yaw() const { return std::atan2(axes[1].y(), axes[1].x()); }
};

/// PCA box fit: horizontal axes from the 2D covariance of ground-projected
/// points (largest eigenvalue first), centroid at the min/max midpoint per
/// axis. The major axis is oriented toward non-negative x (y breaks ties).
/// Degenerate ground projections produce a line-box with a 0.05 m floor on
/// the extents. Throws ExtractionError for clusters of fewer than 3 points.
OrientedBoundingBox fit_bounding_box(const Cluster& cluster);

/// Full-3D PCA variant (no gravity alignment); kept behind its own entry
/// point for scenes where boxes may pitch or roll.
OrientedBoundingBox fit_bounding_box_3d(const Cluster& cluster);

}  // namespace crossview
