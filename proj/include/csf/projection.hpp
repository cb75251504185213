#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "csf/scene_model.hpp"

namespace csf {

/// World-space points unprojected from one frame's labeled pixels.
struct LabeledFragment {
  std::vector<Eigen::Vector3d> points;
  std::vector<ClassId> labels;
  int source_frame = 0;

  std::size_t size() const { return points.size(); }
};

/// Projection of a world point onto the image plane.
struct PixelDepth {
  double u = 0;
  double v = 0;
  std::int64_t depth_mm = 0;
};

/// Integer (u, v) addresses the pixel center. Throws InvariantError for depth 0
/// or a pixel outside the image.
Eigen::Vector3d unproject_pixel(int u, int v, std::uint16_t depth_mm, const CameraIntrinsics& k);

/// std::nullopt when the point is at or behind the camera plane.
std::optional<PixelDepth> project_point(const Eigen::Vector3d& p_world, const CameraIntrinsics& k,
                                        const CameraPose& pose);

/// Unprojects every pixel on the stride grid with valid depth and a non-ignore
/// label. Output order is row-major.
LabeledFragment frame_to_fragment(const FrameRecord& frame, const LabelMask& mask, int pixel_stride,
                                  ClassId ignore_id);

struct RenderedFrame {
  DepthMap depth;
  LabelMask mask;
  std::optional<RgbImage> color;  // present when the cloud has colors
};

/// Z-buffer point splatting. Each point covers a (2r+1)^2 pixel square around
/// its rounded projection; the nearest depth wins and equal depths keep the
/// lower point index. Unhit pixels get depth 0 and `ignore_id`.
RenderedFrame render_frame(const ScenePointCloud& cloud, const CameraIntrinsics& k,
                           const CameraPose& pose, int splat_radius_px, ClassId ignore_id);

}  // namespace csf
