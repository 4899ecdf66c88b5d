#include "crossview/geometry.hpp"

#include "crossview/kdtree.hpp"

#include <cmath>

namespace crossview {

bool RigidTransform::is_rigid(double tol) const {
  Mat3 should_be_identity = rotation.transpose() * rotation;
  if ((should_be_identity - Mat3::Identity()).norm() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

RigidTransform RigidTransform::from_yaw(double yaw_rad) {
  RigidTransform t;
  t.rotation = Eigen::AngleAxisd(yaw_rad, Vec3::UnitZ()).toRotationMatrix();
  return t;
}

RigidTransform RigidTransform::yaw_about(double yaw_rad, const Vec3& pivot) {
  RigidTransform r = from_yaw(yaw_rad);
  r.translation = pivot - r.rotation * pivot;
  return r;
}

PointCloud apply_transform(const RigidTransform& t, const PointCloud& c) {
  PointCloud out;
  out.points.reserve(c.points.size());
  for (const Vec3& p : c.points) out.points.push_back(t.apply(p));
  out.organization = c.organization;
  out.timestamp = c.timestamp;
  out.sensor_id = c.sensor_id;
  return out;
}

Vec3 centroid(const PointCloud& c) {
  if (c.empty()) throw EmptyCloudError("centroid: empty cloud");
  Vec3 sum = Vec3::Zero();
  for (const Vec3& p : c.points) sum += p;
  return sum / static_cast<double>(c.points.size());
}

double cloud_distance(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw EmptyCloudError("cloud_distance: empty cloud");
  KdTree tree(b);
  double sum = 0.0;
  for (const Vec3& p : a.points) sum += tree.nearest(p).distance;
  return sum / static_cast<double>(a.points.size());
}

double cloud_distance_symmetric(const PointCloud& a, const PointCloud& b) {
  return std::max(cloud_distance(a, b), cloud_distance(b, a));
}

PointCloud subsample(const PointCloud& c, std::size_t max_points) {
  if (c.points.size() <= max_points || max_points == 0) {
    PointCloud out = c;
    out.organization.reset();
    return out;
  }
  PointCloud out;
  out.timestamp = c.timestamp;
  out.sensor_id = c.sensor_id;
  out.points.reserve(max_points);
  const double stride = static_cast<double>(c.points.size()) / static_cast<double>(max_points);
  for (std::size_t i = 0; i < max_points; ++i) {
    out.points.push_back(c.points[static_cast<std::size_t>(i * stride)]);
  }
  return out;
}

}  // namespace crossview
