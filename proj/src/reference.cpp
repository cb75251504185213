#include "csf/reference.hpp"

#include <cmath>
#include <limits>

namespace csf::reference {

Neighbor nearest_brute_force(std::span<const Eigen::Vector3f> points, const Eigen::Vector3d& q) {
  if (points.empty()) throw InvariantError("empty cloud");
  Neighbor best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = squared_distance(q, points[i]);
    if (d < best.sq_distance) best = {static_cast<std::uint32_t>(i), d};
  }
  return best;
}

std::size_t transfer_votes_brute_force(const LabeledFragment& fragment, std::span<const Eigen::Vector3f> points,
                                       VoteAccumulator& acc, double radius_m) {
  const double max_sq = radius_m * radius_m;
  std::size_t added = 0;
  for (std::size_t j = 0; j < fragment.size(); ++j) {
    const auto nb = nearest_brute_force(points, fragment.points[j]);
    if (nb.sq_distance <= max_sq) {
      acc.add(nb.index, fragment.labels[j]);
      ++added;
    }
  }
  return added;
}

LabeledFragment frame_to_fragment(const FrameRecord& frame, const LabelMask& mask, int pixel_stride,
                                  ClassId ignore_id) {
  LabeledFragment frag;
  frag.source_frame = frame.frame_index;
  const Eigen::Matrix3d rot = frame.pose.rotation();
  const Eigen::Vector3d t = frame.pose.translation();
  for (int v = 0; v < frame.depth.height; v += pixel_stride)
    for (int u = 0; u < frame.depth.width; u += pixel_stride) {
      const auto d = frame.depth.at(u, v);
      const auto l = mask.at(u, v);
      if (d == 0 || l == ignore_id) continue;
      frag.points.push_back(rot * unproject_pixel(u, v, d, frame.intrinsics) + t);
      frag.labels.push_back(l);
    }
  return frag;
}

RenderedFrame render_frame(const ScenePointCloud& cloud, const CameraIntrinsics& k, const CameraPose& pose,
                           int splat_radius_px, ClassId ignore_id) {
  RenderedFrame out;
  out.depth = DepthMap(k.width, k.height, 0);
  out.mask = LabelMask(k.width, k.height, ignore_id);
  if (cloud.has_colors()) out.color = RgbImage(k.width, k.height);
  const int r = splat_radius_px;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto pd = project_point(cloud.positions[i].cast<double>(), k, pose);
    if (!pd || pd->depth_mm < 1 || pd->depth_mm > 65535) continue;
    const auto d = static_cast<std::uint16_t>(pd->depth_mm);
    const double cu = std::floor(pd->u + 0.5), cv = std::floor(pd->v + 0.5);
    for (double v = cv - r; v <= cv + r; ++v)
      for (double u = cu - r; u <= cu + r; ++u) {
        if (u < 0 || v < 0 || u >= k.width || v >= k.height) continue;
        const int iu = static_cast<int>(u), iv = static_cast<int>(v);
        auto& z = out.depth.at(iu, iv);
        // Points arrive in index order, so strict < keeps the lower index on ties.
        if (z != 0 && z <= d) continue;
        z = d;
        out.mask.at(iu, iv) = cloud.gt_labels[i];
        if (out.color) out.color->at(iu, iv) = cloud.colors[i];
      }
  }
  return out;
}

FusionResult run_csf(const ScenePointCloud& cloud, std::span<const FrameRecord> frames, const FusionConfig& cfg,
                     const ClassTable& classes, bool use_brute_force) {
  cfg.validate();
  VoteAccumulator acc(cloud.size(), classes.size());
  const SceneIndex index(cloud.positions);
  FusionStats stats;
  for (const auto& f : frames) {
    if (f.frame_index % cfg.frame_stride != 0) continue;
    if (!f.mask) throw InvariantError("frame has no mask");
    const auto frag = reference::frame_to_fragment(f, *f.mask, cfg.pixel_stride, classes.ignore_id());
    stats.fragment_points += frag.size();
    stats.gated_votes += use_brute_force ? transfer_votes_brute_force(frag, cloud.positions, acc, cfg.radius_m)
                                         : transfer_votes(frag, index, acc, cfg.radius_m);
    ++stats.frames_used;
  }
  std::vector<ClassId> labels(cloud.size(), classes.ignore_id());
  for (std::size_t p = 0; p < cloud.size(); ++p) {
    std::uint32_t best = 0;
    for (std::size_t c = 0; c < classes.size(); ++c)
      if (acc.count(p, static_cast<ClassId>(c)) > best) {
        best = acc.count(p, static_cast<ClassId>(c));
        labels[p] = static_cast<ClassId>(c);
      }
  }
  auto s = summarize(acc, labels, classes.ignore_id());
  stats.votes_per_class = s.votes_per_class;
  stats.ignore_fraction = s.ignore_fraction;
  return {std::move(labels), std::move(acc), stats};
}

Pixel augment_max_distance(const BinaryMask& initial, Pixel anchor) {
  bool found = false;
  Pixel best;
  long long best_d = -1;
  for (int v = 0; v < initial.height; ++v)
    for (int u = 0; u < initial.width; ++u) {
      if (!initial.at(u, v)) continue;
      const long long du = u - anchor.u, dv = v - anchor.v, d = du * du + dv * dv;
      if (d > best_d) {
        best_d = d;
        best = {u, v};
        found = true;
      }
    }
  if (!found) throw InvariantError("initial mask is empty");
  return best;
}

Pixel augment_max_entropy(const RgbImage& image, const BinaryMask& initial, Pixel anchor, int window) {
  const double ha = region_entropy(image, anchor, window);
  bool found = false;
  Pixel best;
  double best_s = -1;
  for (int v = 0; v < initial.height; ++v)
    for (int u = 0; u < initial.width; ++u) {
      if (!initial.at(u, v)) continue;
      const double s = std::abs(region_entropy(image, {u, v}, window) - ha);
      if (s > best_s) {
        best_s = s;
        best = {u, v};
        found = true;
      }
    }
  if (!found) throw InvariantError("initial mask is empty");
  return best;
}

EvalReport evaluate(std::span<const ClassId> pred, std::span<const ClassId> gt, const ClassTable& classes,
                    IgnorePolicy policy) {
  if (pred.size() != gt.size()) throw InvariantError("length mismatch");
  const std::size_t m = classes.size();
  const ClassId ign = classes.ignore_id();
  EvalReport r;
  r.n_classes = m;
  r.confusion.assign(m * (m + 1), 0);
  std::uint64_t labeled = 0, covered = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == ign) continue;
    ++labeled;
    if (pred[i] != ign) ++covered;
    else if (policy == IgnorePolicy::exclude) continue;
    ++r.confusion[gt[i] * (m + 1) + pred[i]];
  }
  r.coverage = labeled ? static_cast<double>(covered) / labeled : 0.0;
  r.per_class_iou.assign(m, std::nullopt);
  double sum = 0;
  int n = 0;
  for (std::size_t c = 0; c < m; ++c) {
    std::uint64_t tp = r.cell(c, c), fn = 0, fp = 0;
    for (std::size_t p = 0; p <= m; ++p)
      if (p != c) fn += r.cell(c, p);
    for (std::size_t g = 0; g < m; ++g)
      if (g != c) fp += r.cell(g, c);
    r.scored_points += tp + fn;
    if (tp + fn == 0) continue;
    r.per_class_iou[c] = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    sum += *r.per_class_iou[c];
    ++n;
  }
  r.miou = n ? sum / n : 0.0;
  return r;
}

}  // namespace csf::reference
