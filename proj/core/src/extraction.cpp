#include "crossview/extraction.hpp"

#include "crossview/kdtree.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace crossview {

namespace {

struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

}  // namespace

std::vector<Cluster> cluster_dbscan(const PointCloud& cloud, const DbscanConfig& cfg) {
  std::vector<Cluster> clusters;
  const std::size_t n = cloud.points.size();
  if (n == 0) return clusters;

  KdTree tree(cloud.points);
  std::vector<std::vector<std::size_t>> neighbors(n);
  std::vector<bool> core(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    neighbors[i] = tree.radius_search(cloud.points[i], cfg.eps);
    core[i] = neighbors[i].size() >= static_cast<std::size_t>(cfg.min_pts);
  }

  // Connected components over core points.
  DisjointSet dsu(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    for (std::size_t j : neighbors[i]) {
      if (core[j]) dsu.unite(static_cast<int>(i), static_cast<int>(j));
    }
  }

  // Border points attach to the nearest core neighbor's component; ties go
  // to the core point with the lexicographically smallest coordinates so the
  // partition does not depend on input order.
  std::vector<int> component(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) component[i] = dsu.find(static_cast<int>(i));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    double best_d = std::numeric_limits<double>::infinity();
    int best_core = -1;
    for (std::size_t j : neighbors[i]) {
      if (!core[j]) continue;
      const double d = (cloud.points[i] - cloud.points[j]).norm();
      if (d < best_d ||
          (d == best_d && best_core >= 0 &&
           lex_less(cloud.points[j], cloud.points[static_cast<std::size_t>(best_core)]))) {
        best_d = d;
        best_core = static_cast<int>(j);
      }
    }
    if (best_core >= 0) component[i] = dsu.find(best_core);
  }

  // Group by component root; roots are smallest member indices, so sorting
  // by root yields ids in ascending first-member order.
  std::vector<std::pair<int, std::vector<std::size_t>>> groups;
  for (std::size_t i = 0; i < n; ++i) {
    if (component[i] < 0) continue;  // noise
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.first == component[i]; });
    if (it == groups.end()) {
      groups.push_back({component[i], {i}});
    } else {
      it->second.push_back(i);
    }
  }
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  int next_id = 0;
  for (auto& [root, members] : groups) {
    if (members.size() < cfg.min_cluster_size) continue;
    Cluster cl;
    cl.cluster_id = next_id++;
    cl.points.timestamp = cloud.timestamp;
    cl.points.points.reserve(members.size());
    for (std::size_t i : members) cl.points.points.push_back(cloud.points[i]);
    clusters.push_back(std::move(cl));
  }
  return clusters;
}

std::vector<Cluster> cluster_dbscan(const FusedFrame& frame, const DbscanConfig& cfg) {
  return cluster_dbscan(frame.points, cfg);
}

bool OrientedBoundingBox::contains(const Vec3& p, double slack) const {
  const Vec3 d = p - centroid;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(axes[a].dot(d)) > extents[a] + slack) return false;
  }
  return true;
}

namespace {

OrientedBoundingBox box_from_axes(const std::vector<Vec3>& pts, const std::array<Vec3, 3>& axes) {
  Vec3 lo(std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Vec3& p : pts) {
    for (int a = 0; a < 3; ++a) {
      const double proj = axes[a].dot(p);
      lo[a] = std::min(lo[a], proj);
      hi[a] = std::max(hi[a], proj);
    }
  }
  OrientedBoundingBox box;
  box.axes = axes;
  Vec3 mid_proj = 0.5 * (lo + hi);
  box.centroid = axes[0] * mid_proj[0] + axes[1] * mid_proj[1] + axes[2] * mid_proj[2];
  for (int a = 0; a < 3; ++a) box.extents[a] = std::max(0.5 * (hi[a] - lo[a]), 0.05);
  return box;
}

Vec3 orient_major(Vec3 axis) {
  if (axis.x() < 0.0 || (axis.x() == 0.0 && axis.y() < 0.0)) return -axis;
  return axis;
}

}  // namespace

OrientedBoundingBox fit_bounding_box(const Cluster& cluster) {
  const auto& pts = cluster.points.points;
  if (pts.size() < 3) throw ExtractionError("fit_bounding_box: cluster needs >= 3 points");

  Vec2 mean = Vec2::Zero();
  for (const Vec3& p : pts) mean += p.head<2>();
  mean /= static_cast<double>(pts.size());
  Mat2 cov = Mat2::Zero();
  for (const Vec3& p : pts) {
    const Vec2 d = p.head<2>() - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(pts.size());

  Eigen::SelfAdjointEigenSolver<Mat2> eig(cov);
  // Eigenvalues ascending; take the dominant direction as the major axis.
  Vec2 major2 = eig.eigenvectors().col(1);
  if (eig.eigenvalues()(1) < 1e-12) major2 = Vec2(1.0, 0.0);  // point-like projection

  const Vec3 vertical = Vec3::UnitZ();
  const Vec3 major = orient_major(Vec3(major2.x(), major2.y(), 0.0).normalized());
  const Vec3 lateral = vertical.cross(major);
  return box_from_axes(pts, {vertical, major, lateral});
}

OrientedBoundingBox fit_bounding_box_3d(const Cluster& cluster) {
  const auto& pts = cluster.points.points;
  if (pts.size() < 3) throw ExtractionError("fit_bounding_box_3d: cluster needs >= 3 points");

  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : pts) {
    const Vec3 d = p - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  // Descending: vertical slot keeps the axis closest to z, then major/lateral.
  std::array<Vec3, 3> dirs = {eig.eigenvectors().col(2), eig.eigenvectors().col(1),
                              eig.eigenvectors().col(0)};
  std::size_t vert = 0;
  for (std::size_t i = 1; i < 3; ++i) {
    if (std::abs(dirs[i].z()) > std::abs(dirs[vert].z())) vert = i;
  }
  std::swap(dirs[0], dirs[vert]);
  if (dirs[0].z() < 0.0) dirs[0] = -dirs[0];
  dirs[1] = orient_major(dirs[1]);
  dirs[2] = dirs[0].cross(dirs[1]);
  return box_from_axes(pts, dirs);
}

}  // namespace crossview
