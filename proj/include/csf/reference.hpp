#pragma once

// Serial, straightforward implementations of the parallel kernels. They are
// kept as test oracles and as the baseline of the benchmark.

#include <span>
#include <vector>

#include "csf/evaluation.hpp"
#include "csf/fusion.hpp"
#include "csf/prompting.hpp"
#include "csf/projection.hpp"

namespace csf::reference {

/// Exhaustive nearest neighbour; lowest index among equal distances.
Neighbor nearest_brute_force(std::span<const Eigen::Vector3f> points, const Eigen::Vector3d& q);

/// transfer_votes with an exhaustive scan in place of the kd-tree.
std::size_t transfer_votes_brute_force(const LabeledFragment& fragment, std::span<const Eigen::Vector3f> points,
                                       VoteAccumulator& acc, double radius_m);

LabeledFragment frame_to_fragment(const FrameRecord& frame, const LabelMask& mask, int pixel_stride,
                                  ClassId ignore_id);

/// Per-point splatting in index order with a plain depth test.
RenderedFrame render_frame(const ScenePointCloud& cloud, const CameraIntrinsics& k, const CameraPose& pose,
                           int splat_radius_px, ClassId ignore_id);

/// Frames in the given order, one shared accumulator. `use_brute_force`
/// replaces the kd-tree by the exhaustive scan.
FusionResult run_csf(const ScenePointCloud& cloud, std::span<const FrameRecord> frames, const FusionConfig& cfg,
                     const ClassTable& classes, bool use_brute_force = false);

Pixel augment_max_distance(const BinaryMask& initial, Pixel anchor);
Pixel augment_max_entropy(const RgbImage& image, const BinaryMask& initial, Pixel anchor,
                          int window = kEntropyWindow);

EvalReport evaluate(std::span<const ClassId> pred, std::span<const ClassId> gt, const ClassTable& classes,
                    IgnorePolicy policy);

}  // namespace csf::reference
