#pragma once

#include "crossview/geometry.hpp"

#include <cstddef>
#include <vector>

namespace crossview {

/// Counters for instrumenting search cost. distance_evaluations counts
/// point-to-point distance computations performed inside a query.
struct SearchStats {
  std::size_t distance_evaluations = 0;
  std::size_t nodes_visited = 0;
};

/// Exact 3D k-d tree. Construction produces an immutable structure that is
/// safe to share across worker threads; queries never mutate it.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(const std::vector<Vec3>& points);
  explicit KdTree(const PointCloud& cloud) : KdTree(cloud.points) {}

  bool empty() const { return points_.empty(); }
  std::size_t size() const { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  struct Neighbor {
    std::size_t index = 0;
    double distance = 0.0;
  };

  /// Exact nearest neighbor. Throws EmptyCloudError on an empty tree.
  Neighbor nearest(const Vec3& query, SearchStats* stats = nullptr) const;

  /// Indices of all points with |p - query| <= radius.
  std::vector<std::size_t> radius_search(const Vec3& query, double radius,
                                         SearchStats* stats = nullptr) const;

  /// True iff some point lies within `radius` of query. Early-outs, so it is
  /// cheaper than radius_search when only existence matters.
  bool has_neighbor_within(const Vec3& query, double radius,
                           SearchStats* stats = nullptr) const;

 private:
  struct Node {
    int left = -1;
    int right = -1;
    std::uint32_t begin = 0;  // leaf payload range in order_
    std::uint32_t end = 0;
    double split = 0.0;
    std::int8_t axis = -1;  // -1 marks a leaf
  };

  int build(std::size_t begin, std::size_t end, int depth);

  void nearest_impl(int node, const Vec3& query, Neighbor& best, SearchStats* stats) const;
  void radius_impl(int node, const Vec3& query, double r2,
                   std::vector<std::size_t>* out, bool* found, SearchStats* stats) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace crossview
