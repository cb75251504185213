#include "csf/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "csf/scene_model.hpp"

namespace csf {

double Neighbor::distance() const { return std::sqrt(sq_distance); }

SceneIndex::SceneIndex(std::span<const Eigen::Vector3f> points, int leaf_size) {
  if (points.empty()) throw InvariantError("cannot index an empty cloud");
  if (points.size() >= std::numeric_limits<std::uint32_t>::max())
    throw InvariantError("cloud too large for the spatial index");
  order_.resize(points.size());
  std::iota(order_.begin(), order_.end(), 0u);
  points_.assign(points.begin(), points.end());
  nodes_.reserve(2 * points.size() / std::max(1, leaf_size) + 2);
  build(0, static_cast<std::uint32_t>(points.size()), std::max(1, leaf_size));
  std::vector<Eigen::Vector3f> permuted(points.size());
  for (std::size_t i = 0; i < order_.size(); ++i) permuted[i] = points[order_[i]];
  points_ = std::move(permuted);
}

std::uint32_t SceneIndex::build(std::uint32_t begin, std::uint32_t end, int leaf_size) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({});
  if (end - begin <= static_cast<std::uint32_t>(leaf_size)) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  Eigen::Vector3f lo = points_[order_[begin]], hi = lo;
  for (auto i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis;
  (hi - lo).maxCoeff(&axis);
  const auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
  // Left holds coordinates <= split, right holds coordinates >= split.
  const float split = points_[order_[mid]][axis];
  const auto left = build(begin, mid, leaf_size);
  const auto right = build(mid, end, leaf_size);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void SceneIndex::search(const Eigen::Vector3d& q, double& best_sq, std::uint32_t& best_idx) const {
  struct Pending {
    std::uint32_t node;
    double bound;  // lower bound on squared distance to anything in the subtree
  };
  Pending stack[128];
  int top = 0;
  stack[top++] = {0, 0.0};
  while (top > 0) {
    const Pending cur = stack[--top];
    if (cur.bound > best_sq) continue;
    const Node& n = nodes_[cur.node];
    if (n.axis < 0) {
      for (auto s = n.begin; s < n.end; ++s) {
        const double d = squared_distance(q, points_[s]);
        const auto idx = order_[s];
        if (d < best_sq || (d == best_sq && idx < best_idx)) {
          best_sq = d;
          best_idx = idx;
        }
      }
      continue;
    }
    const double diff = q[n.axis] - static_cast<double>(n.split);
    const double plane = diff * diff;
    const auto near = diff <= 0 ? n.left : n.right;
    const auto far = diff <= 0 ? n.right : n.left;
    // Push far first so the near side is explored first. Pruning uses a strict
    // comparison so equidistant points with lower indices are still visited.
    stack[top++] = {far, std::max(cur.bound, plane)};
    stack[top++] = {near, cur.bound};
  }
}

Neighbor SceneIndex::nearest(const Eigen::Vector3d& q) const {
  double best = std::numeric_limits<double>::infinity();
  std::uint32_t idx = std::numeric_limits<std::uint32_t>::max();
  search(q, best, idx);
  return {idx, best};
}

std::optional<Neighbor> SceneIndex::nearest_within(const Eigen::Vector3d& q, double max_sq_distance) const {
  double best = max_sq_distance;
  std::uint32_t idx = std::numeric_limits<std::uint32_t>::max();
  search(q, best, idx);
  if (idx == std::numeric_limits<std::uint32_t>::max()) return std::nullopt;
  return Neighbor{idx, best};
}

SceneIndex build_spatial_index(std::span<const Eigen::Vector3f> points) { return SceneIndex(points); }

}  // namespace csf
