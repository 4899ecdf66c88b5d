#include "crossview/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace crossview {

namespace {
constexpr std::size_t kLeafSize = 12;
}

KdTree::KdTree(const std::vector<Vec3>& points) : points_(points) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(points_.size() / kLeafSize * 2 + 4);
    root_ = build(0, points_.size(), 0);
  }
}

int KdTree::build(std::size_t begin, std::size_t end, int depth) {
  Node node;
  if (end - begin <= kLeafSize) {
    node.begin = static_cast<std::uint32_t>(begin);
    node.end = static_cast<std::uint32_t>(end);
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size() - 1);
  }
  // Split on the widest axis of the subset bounding box.
  Vec3 lo = points_[order_[begin]], hi = lo;
  for (std::size_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  Vec3 extent = hi - lo;
  int axis = 0;
  if (extent.y() > extent.x()) axis = 1;
  if (extent.z() > extent[axis]) axis = 2;
  if (extent[axis] <= 0.0) {
    // All points coincide along every axis wider than zero: make a leaf.
    node.begin = static_cast<std::uint32_t>(begin);
    node.end = static_cast<std::uint32_t>(end);
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size() - 1);
  }

  std::size_t mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return points_[a][axis] < points_[b][axis];
                   });
  node.axis = static_cast<std::int8_t>(axis);
  node.split = points_[order_[mid]][axis];

  nodes_.push_back(node);
  int id = static_cast<int>(nodes_.size() - 1);
  int left = build(begin, mid, depth + 1);
  int right = build(mid, end, depth + 1);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

KdTree::Neighbor KdTree::nearest(const Vec3& query, SearchStats* stats) const {
  if (points_.empty()) throw EmptyCloudError("KdTree::nearest: empty tree");
  Neighbor best;
  best.distance = std::numeric_limits<double>::infinity();
  nearest_impl(root_, query, best, stats);
  best.distance = std::sqrt(best.distance);
  return best;
}

void KdTree::nearest_impl(int node_id, const Vec3& query, Neighbor& best,
                          SearchStats* stats) const {
  const Node& node = nodes_[node_id];
  if (stats) ++stats->nodes_visited;
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = order_[i];
      double d2 = (points_[idx] - query).squaredNorm();
      if (stats) ++stats->distance_evaluations;
      if (d2 < best.distance) {
        best.distance = d2;
        best.index = idx;
      }
    }
    return;
  }
  const double delta = query[node.axis] - node.split;
  const int near = delta < 0.0 ? node.left : node.right;
  const int far = delta < 0.0 ? node.right : node.left;
  nearest_impl(near, query, best, stats);
  if (delta * delta <= best.distance) nearest_impl(far, query, best, stats);
}

std::vector<std::size_t> KdTree::radius_search(const Vec3& query, double radius,
                                               SearchStats* stats) const {
  std::vector<std::size_t> out;
  if (points_.empty()) return out;
  radius_impl(root_, query, radius * radius, &out, nullptr, stats);
  return out;
}

bool KdTree::has_neighbor_within(const Vec3& query, double radius, SearchStats* stats) const {
  if (points_.empty()) return false;
  bool found = false;
  radius_impl(root_, query, radius * radius, nullptr, &found, stats);
  return found;
}

void KdTree::radius_impl(int node_id, const Vec3& query, double r2,
                         std::vector<std::size_t>* out, bool* found,
                         SearchStats* stats) const {
  if (found && *found) return;
  const Node& node = nodes_[node_id];
  if (stats) ++stats->nodes_visited;
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = order_[i];
      double d2 = (points_[idx] - query).squaredNorm();
      if (stats) ++stats->distance_evaluations;
      if (d2 <= r2) {
        if (found) {
          *found = true;
          return;
        }
        out->push_back(idx);
      }
    }
    return;
  }
  const double delta = query[node.axis] - node.split;
  const int near = delta < 0.0 ? node.left : node.right;
  const int far = delta < 0.0 ? node.right : node.left;
  radius_impl(near, query, r2, out, found, stats);
  if (delta * delta <= r2) radius_impl(far, query, r2, out, found, stats);
}

}  // namespace crossview
