#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "csf/projection.hpp"
#include "csf/scene_model.hpp"
#include "csf/spatial_index.hpp"

namespace csf {

/// Per-point, per-class vote counts (dense N x m, row-major).
class VoteAccumulator {
 public:
  VoteAccumulator(std::size_t n_points, std::size_t n_classes);

  std::size_t n_points() const { return n_points_; }
  std::size_t n_classes() const { return n_classes_; }

  std::uint32_t count(std::size_t point, ClassId cls) const { return counts_[point * n_classes_ + cls]; }
  std::span<const std::uint32_t> row(std::size_t point) const {
    return {counts_.data() + point * n_classes_, n_classes_};
  }
  void add(std::size_t point, ClassId cls) { ++counts_[point * n_classes_ + cls]; }

  /// Elementwise sum; throws InvariantError on a dimension mismatch.
  VoteAccumulator& operator+=(const VoteAccumulator& other);
  std::uint64_t total() const;
  const std::vector<std::uint32_t>& counts() const { return counts_; }

  bool operator==(const VoteAccumulator&) const = default;

  /// Binary dump: "CSFACC01", u64 N, u32 m, N*m u32 counts; little-endian.
  void save(const std::filesystem::path& path) const;
  static VoteAccumulator load(const std::filesystem::path& path);

 private:
  std::size_t n_points_;
  std::size_t n_classes_;
  std::vector<std::uint32_t> counts_;
};

struct FusionConfig {
  double radius_m = 0.1;
  int pixel_stride = 1;
  int frame_stride = 50;

  void validate() const;
};

/// Adds one vote per fragment point whose nearest scene point lies within
/// `radius_m` (inclusive). Returns the number of votes added.
std::size_t transfer_votes(const LabeledFragment& fragment, const SceneIndex& index, VoteAccumulator& acc,
                           double radius_m);

VoteAccumulator merge_accumulators(const VoteAccumulator& a, const VoteAccumulator& b);

/// Per-point argmax; all-zero rows map to `ignore_id`, ties go to the lowest class id.
std::vector<ClassId> fuse_labels(const VoteAccumulator& acc, ClassId ignore_id);

struct FusionStats {
  std::size_t frames_used = 0;
  std::size_t fragment_points = 0;
  std::size_t gated_votes = 0;
  std::vector<std::uint64_t> votes_per_class;
  double ignore_fraction = 0;
};

struct FusionResult {
  std::vector<ClassId> labels;
  VoteAccumulator accumulator;
  FusionStats stats;
};

/// Cumulative semantic fusion over the given frames (each must carry a mask).
/// Frames are processed in parallel with private accumulators; the result is
/// bit-identical to processing them sequentially in any order.
FusionResult run_csf(const ScenePointCloud& cloud, std::span<const FrameRecord> frames,
                     const FusionConfig& cfg, const ClassTable& classes);

/// Same, starting from an existing accumulator (resumable fusion).
FusionResult run_csf(const ScenePointCloud& cloud, std::span<const FrameRecord> frames,
                     const FusionConfig& cfg, const ClassTable& classes, VoteAccumulator initial);

/// Summary statistics for an accumulator and its fused labels.
FusionStats summarize(const VoteAccumulator& acc, std::span<const ClassId> labels, ClassId ignore_id);

}  // namespace csf
