#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace crossview {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Thrown when an operation requires a non-empty cloud or index.
struct EmptyCloudError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Beam/azimuth lattice metadata for sensors that report every beam,
/// including beams with no echo. `ranges` and `has_return` cover the full
/// beam_count x azimuth_count lattice (row-major by beam); `beam_index` and
/// `azimuth_index` are per returned point. A no-return cell stores range 0
/// with has_return = 0, so a genuine zero-range return stays representable.
struct Organization {
  int beam_count = 0;
  int azimuth_count = 0;
  std::vector<int> beam_index;
  std::vector<int> azimuth_index;
  std::vector<double> ranges;
  std::vector<std::uint8_t> has_return;

  std::size_t lattice_size() const {
    return static_cast<std::size_t>(beam_count) * static_cast<std::size_t>(azimuth_count);
  }
  std::size_t cell(int beam, int azimuth) const {
    return static_cast<std::size_t>(beam) * static_cast<std::size_t>(azimuth_count) +
           static_cast<std::size_t>(azimuth);
  }
};

/// A set of 3D points, optionally beam-organized, stamped with the capture
/// time and the id of the sensor that produced it.
struct PointCloud {
  std::vector<Vec3> points;
  std::optional<Organization> organization;
  double timestamp = 0.0;
  int sensor_id = 0;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Rotation + translation mapping one frame into another. The rotation is
/// expected to stay orthonormal with determinant +1 (see is_rigid()).
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  /// Composition: result.apply(p) == this->apply(other.apply(p)).
  RigidTransform compose(const RigidTransform& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }

  RigidTransform inverse() const {
    Mat3 rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  bool is_rigid(double tol = 1e-9) const;

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  static RigidTransform from_yaw(double yaw_rad);
  /// Rotation by yaw_rad about a vertical axis through `pivot`.
  static RigidTransform yaw_about(double yaw_rad, const Vec3& pivot);
};

/// Plane {p : normal . p + offset = 0} with |normal| = 1.
struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
  std::size_t inlier_count = 0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) + offset; }
};

/// Transforms every point; organization metadata is carried through
/// unchanged (beam indices and ranges stay valid relative to the sensor).
PointCloud apply_transform(const RigidTransform& t, const PointCloud& c);

/// Arithmetic mean of the points. Throws EmptyCloudError on an empty cloud.
Vec3 centroid(const PointCloud& c);

/// Asymmetric 3D cloud distance: mean over points of `a` of the distance to
/// each point's nearest neighbor in `b`. Coincident points are not
/// deduplicated. Throws EmptyCloudError if either cloud is empty.
double cloud_distance(const PointCloud& a, const PointCloud& b);

/// max(cloud_distance(a,b), cloud_distance(b,a)). Provided for diagnostics;
/// alignment uses the asymmetric form.
double cloud_distance_symmetric(const PointCloud& a, const PointCloud& b);

/// Uniform-stride subsample down to at most max_points (keeps organization
/// dropped; used to bound search costs).
PointCloud subsample(const PointCloud& c, std::size_t max_points);

inline double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

inline double deg_to_rad(double d) { return d * M_PI / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / M_PI; }

}  // namespace crossview
