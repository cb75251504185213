#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace csf {

struct Neighbor {
  std::uint32_t index = 0;
  double sq_distance = 0;

  double distance() const;
  bool operator==(const Neighbor&) const = default;
};

/// Squared Euclidean distance, evaluated in double. Every nearest-neighbour
/// path in the library uses this exact expression so results compare bitwise.
inline double squared_distance(const Eigen::Vector3d& q, const Eigen::Vector3f& p) {
  const double dx = q.x() - static_cast<double>(p.x());
  const double dy = q.y() - static_cast<double>(p.y());
  const double dz = q.z() - static_cast<double>(p.z());
  return dx * dx + dy * dy + dz * dz;
}

/// Static kd-tree over scene positions answering exact nearest-neighbour
/// queries. Among equidistant points the lowest index is reported, which makes
/// results identical to an exhaustive scan.
class SceneIndex {
 public:
  explicit SceneIndex(std::span<const Eigen::Vector3f> points, int leaf_size = 12);

  std::size_t size() const { return points_.size(); }

  Neighbor nearest(const Eigen::Vector3d& q) const;
  /// Nearest point with squared distance <= max_sq_distance, if any.
  std::optional<Neighbor> nearest_within(const Eigen::Vector3d& q, double max_sq_distance) const;

 private:
  struct Node {
    // Inner node: children at left/right, split on `axis` at `split`.
    // Leaf: axis < 0, points [begin, end) of order_.
    float split = 0;
    std::int32_t axis = -1;
    std::uint32_t left = 0, right = 0;
    std::uint32_t begin = 0, end = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end, int leaf_size);
  void search(const Eigen::Vector3d& q, double& best_sq, std::uint32_t& best_idx) const;

  std::vector<Eigen::Vector3f> points_;  // permuted copy, leaf-contiguous
  std::vector<std::uint32_t> order_;     // permuted slot -> original index
  std::vector<Node> nodes_;
};

/// Builds the index; throws InvariantError for an empty cloud.
SceneIndex build_spatial_index(std::span<const Eigen::Vector3f> points);

}  // namespace csf
