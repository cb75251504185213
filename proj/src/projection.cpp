#include "csf/projection.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace csf {

Eigen::Vector3d unproject_pixel(int u, int v, std::uint16_t depth_mm, const CameraIntrinsics& k) {
  if (depth_mm == 0) throw InvariantError("invalid depth (0) at pixel");
  if (u < 0 || v < 0 || u >= k.width || v >= k.height) throw InvariantError("pixel outside the image");
  const double z = depth_mm / 1000.0;
  return {(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z};
}

std::optional<PixelDepth> project_point(const Eigen::Vector3d& p_world, const CameraIntrinsics& k,
                                        const CameraPose& pose) {
  const Eigen::Vector3d p = pose.to_camera(p_world);
  if (!(p.z() > 0)) return std::nullopt;
  return PixelDepth{k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy,
                    std::llround(1000.0 * p.z())};
}

LabeledFragment frame_to_fragment(const FrameRecord& frame, const LabelMask& mask, int pixel_stride,
                                  ClassId ignore_id) {
  if (pixel_stride < 1) throw InvariantError("pixel stride must be >= 1");
  const auto& depth = frame.depth;
  if (!mask.same_shape(depth)) throw InvariantError("mask dimensions do not match depth");
  const auto& k = frame.intrinsics;
  if (!depth.same_shape(k.width, k.height)) throw InvariantError("depth dimensions do not match intrinsics");

  const int rows = (depth.height + pixel_stride - 1) / pixel_stride;
  auto keep = [&](int u, int v) {
    const auto i = depth.index(u, v);
    return depth.values[i] != 0 && mask.values[i] != ignore_id;
  };

  // Two passes (count, fill) keep the output row-major regardless of thread count.
  std::vector<std::size_t> offsets(rows + 1, 0);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int v = r * pixel_stride;
    std::size_t c = 0;
    for (int u = 0; u < depth.width; u += pixel_stride) c += keep(u, v);
    offsets[r + 1] = c;
  }
  for (int r = 0; r < rows; ++r) offsets[r + 1] += offsets[r];

  LabeledFragment frag;
  frag.source_frame = frame.frame_index;
  frag.points.resize(offsets[rows]);
  frag.labels.resize(offsets[rows]);
  const Eigen::Matrix3d rot = frame.pose.rotation();
  const Eigen::Vector3d t = frame.pose.translation();
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int v = r * pixel_stride;
    std::size_t o = offsets[r];
    for (int u = 0; u < depth.width; u += pixel_stride) {
      if (!keep(u, v)) continue;
      const auto i = depth.index(u, v);
      frag.points[o] = rot * unproject_pixel(u, v, depth.values[i], k) + t;
      frag.labels[o] = mask.values[i];
      ++o;
    }
  }
  return frag;
}

namespace {

// Z-buffer key: depth in the high word, point index in the low word, so that
// std::min picks the nearest depth and then the lowest point index.
using ZKey = std::uint64_t;
constexpr ZKey kEmpty = std::numeric_limits<ZKey>::max();

void splat_points(const ScenePointCloud& cloud, const CameraIntrinsics& k, const CameraPose& pose,
                  int radius, std::size_t begin, std::size_t end, std::vector<ZKey>& zbuf) {
  for (std::size_t i = begin; i < end; ++i) {
    auto pd = project_point(cloud.positions[i].cast<double>(), k, pose);
    if (!pd || pd->depth_mm < 1 || pd->depth_mm > 65535) continue;
    const double fu = std::floor(pd->u + 0.5), fv = std::floor(pd->v + 0.5);
    if (fu < -radius || fv < -radius || fu > k.width - 1 + radius || fv > k.height - 1 + radius) continue;
    const int pu = static_cast<int>(fu), pv = static_cast<int>(fv);
    const ZKey key = (static_cast<ZKey>(pd->depth_mm) << 32) | static_cast<ZKey>(i);
    for (int v = std::max(0, pv - radius); v <= std::min(k.height - 1, pv + radius); ++v)
      for (int u = std::max(0, pu - radius); u <= std::min(k.width - 1, pu + radius); ++u) {
        auto& z = zbuf[static_cast<std::size_t>(v) * k.width + u];
        z = std::min(z, key);
      }
  }
}

}  // namespace

RenderedFrame render_frame(const ScenePointCloud& cloud, const CameraIntrinsics& k,
                           const CameraPose& pose, int splat_radius_px, ClassId ignore_id) {
  if (!cloud.has_labels()) throw InvariantError("render_frame needs a labeled cloud");
  if (splat_radius_px < 0) throw InvariantError("splat radius must be >= 0");
  if (cloud.size() >= (std::size_t{1} << 32)) throw InvariantError("cloud too large to render");
  k.validate();
  const std::size_t npix = static_cast<std::size_t>(k.width) * k.height;
  std::vector<ZKey> zbuf(npix, kEmpty);

#pragma omp parallel
  {
    const std::size_t nt = omp_get_num_threads(), t = omp_get_thread_num();
    const std::size_t chunk = (cloud.size() + nt - 1) / nt;
    const std::size_t b = std::min(cloud.size(), t * chunk), e = std::min(cloud.size(), b + chunk);
    std::vector<ZKey> local(npix, kEmpty);
    splat_points(cloud, k, pose, splat_radius_px, b, e, local);
#pragma omp critical(csf_render_merge)
    for (std::size_t p = 0; p < npix; ++p) zbuf[p] = std::min(zbuf[p], local[p]);
  }

  RenderedFrame out;
  out.depth = DepthMap(k.width, k.height, 0);
  out.mask = LabelMask(k.width, k.height, ignore_id);
  if (cloud.has_colors()) out.color = RgbImage(k.width, k.height);
  for (std::size_t p = 0; p < npix; ++p) {
    if (zbuf[p] == kEmpty) continue;
    const auto idx = static_cast<std::size_t>(zbuf[p] & 0xffffffffu);
    out.depth.values[p] = static_cast<std::uint16_t>(zbuf[p] >> 32);
    out.mask.values[p] = cloud.gt_labels[idx];
    if (out.color) out.color->values[p] = cloud.colors[idx];
  }
  return out;
}

}  // namespace csf
