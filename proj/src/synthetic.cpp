#include "csf/synthetic.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "csf/io.hpp"
#include "csf/rng.hpp"

namespace csf {

void SceneSpec::validate(const ClassTable& classes) const {
  if (!(room_x > 0 && room_y > 0 && room_z > 0)) throw InvariantError("room dimensions must be positive");
  if (!(density > 0)) throw InvariantError("surface density must be positive");
  if (object_count < 0) throw InvariantError("object count must be >= 0");
  if (object_count > 0 && object_classes.empty()) throw InvariantError("no object classes allowed");
  for (const auto& c : object_classes)
    if (!classes.find(c)) throw InvariantError("unknown object class: " + c);
  if (!classes.find("wall") || !classes.find("floor"))
    throw InvariantError("class table needs 'wall' and 'floor'");
}

bool Cuboid::overlaps_xy(const Cuboid& o, double gap) const {
  return min.x() - gap < o.max.x() && o.min.x() - gap < max.x() && min.y() - gap < o.max.y() &&
         o.min.y() - gap < max.y();
}

namespace {

Rgb base_color(const std::string& name) {
  static const std::map<std::string, Rgb> palette = {
      {"wall", {174, 199, 232}},        {"floor", {152, 223, 138}},        {"cabinet", {31, 119, 180}},
      {"bed", {255, 187, 120}},         {"chair", {188, 189, 34}},         {"sofa", {140, 86, 75}},
      {"table", {255, 152, 150}},       {"door", {214, 39, 40}},           {"window", {197, 176, 213}},
      {"bookshelf", {148, 103, 189}},   {"picture", {196, 156, 148}},      {"counter", {23, 190, 207}},
      {"desk", {247, 182, 210}},        {"curtain", {219, 219, 141}},      {"refrigerator", {255, 127, 14}},
      {"shower curtain", {158, 218, 229}}, {"toilet", {44, 160, 44}},      {"sink", {112, 128, 144}},
      {"bathtub", {227, 119, 194}},     {"otherfurniture", {82, 84, 163}}};
  if (auto it = palette.find(name); it != palette.end()) return it->second;
  const auto h = splitmix64(std::hash<std::string>{}(name));
  return {static_cast<std::uint8_t>(h), static_cast<std::uint8_t>(h >> 8), static_cast<std::uint8_t>(h >> 16)};
}

std::uint8_t clamp8(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

class SurfaceSampler {
 public:
  SurfaceSampler(ScenePointCloud& cloud, double density, std::mt19937_64& rng)
      : cloud_(cloud), density_(density), rng_(rng) {}

  // Jittered stratified samples over the rectangle origin + s*e1 + t*e2, s,t in [0,1).
  template <typename Keep>
  void rect(const Eigen::Vector3d& origin, const Eigen::Vector3d& e1, const Eigen::Vector3d& e2, ClassId label,
            Rgb color, Keep keep) {
    const double cells_per_m = std::sqrt(density_);
    const int n1 = std::max(1, static_cast<int>(std::lround(e1.norm() * cells_per_m)));
    const int n2 = std::max(1, static_cast<int>(std::lround(e2.norm() * cells_per_m)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> noise(-6, 6);
    for (int j = 0; j < n2; ++j)
      for (int i = 0; i < n1; ++i) {
        const double s = (i + unit(rng_)) / n1, t = (j + unit(rng_)) / n2;
        const Eigen::Vector3d p = origin + s * e1 + t * e2;
        const int dr = noise(rng_), dg = noise(rng_), db = noise(rng_);
        if (!keep(p)) continue;
        cloud_.positions.push_back(p.cast<float>());
        cloud_.colors.push_back({clamp8(color.r + dr), clamp8(color.g + dg), clamp8(color.b + db)});
        cloud_.gt_labels.push_back(label);
      }
  }

  void rect(const Eigen::Vector3d& origin, const Eigen::Vector3d& e1, const Eigen::Vector3d& e2, ClassId label,
            Rgb color) {
    rect(origin, e1, e2, label, color, [](const Eigen::Vector3d&) { return true; });
  }

 private:
  ScenePointCloud& cloud_;
  double density_;
  std::mt19937_64& rng_;
};

Rgb jitter(Rgb c, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(-25, 25);
  return {clamp8(c.r + d(rng)), clamp8(c.g + d(rng)), clamp8(c.b + d(rng))};
}

}  // namespace

SyntheticScene make_scene(const SceneSpec& spec, const ClassTable& classes) {
  spec.validate(classes);
  std::mt19937_64 rng(spec.rng_seed);
  SyntheticScene scene;

  // Objects stay inside the central square so every face is seen by the orbit.
  const double half_x = spec.room_x / 2, half_y = spec.room_y / 2;
  const double place_x = 0.3 * spec.room_x, place_y = 0.3 * spec.room_y;
  const double gap = 0.2;
  std::uniform_real_distribution<double> side(0.3, 0.7), height(0.4, 1.1), unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_class(0, spec.object_classes.empty() ? 0 : spec.object_classes.size() - 1);
  // Sequential placement can jam, so a failed layout restarts from scratch.
  bool layout_ok = false;
  for (int layout = 0; layout < 200 && !layout_ok; ++layout) {
    scene.objects.clear();
    layout_ok = true;
    for (int k = 0; k < spec.object_count && layout_ok; ++k) {
      const ClassId cls = *classes.find(spec.object_classes[pick_class(rng)]);
      bool placed = false;
      for (int attempt = 0; attempt < 500 && !placed; ++attempt) {
        const double sx = std::min(side(rng), 2 * place_x), sy = std::min(side(rng), 2 * place_y);
        const double h = std::min(height(rng), 0.9 * spec.room_z);
        const double cx = (unit(rng) * 2 - 1) * (place_x - sx / 2), cy = (unit(rng) * 2 - 1) * (place_y - sy / 2);
        Cuboid c{{cx - sx / 2, cy - sy / 2, 0.0}, {cx + sx / 2, cy + sy / 2, h}, cls};
        if (std::none_of(scene.objects.begin(), scene.objects.end(),
                         [&](const Cuboid& o) { return o.overlaps_xy(c, gap); })) {
          scene.objects.push_back(c);
          placed = true;
        }
      }
      layout_ok = placed;
    }
  }
  if (!layout_ok) throw InvariantError("scene too crowded");

  auto& cloud = scene.cloud;
  SurfaceSampler sampler(cloud, spec.density, rng);
  const ClassId wall = *classes.find("wall"), floor = *classes.find("floor");
  const double hz = spec.room_z;

  auto under_object = [&](const Eigen::Vector3d& p) {
    return std::any_of(scene.objects.begin(), scene.objects.end(), [&](const Cuboid& c) {
      return p.x() >= c.min.x() && p.x() <= c.max.x() && p.y() >= c.min.y() && p.y() <= c.max.y();
    });
  };
  sampler.rect({-half_x, -half_y, 0}, {spec.room_x, 0, 0}, {0, spec.room_y, 0}, floor,
               jitter(base_color("floor"), rng), [&](const Eigen::Vector3d& p) { return !under_object(p); });
  double area = spec.room_x * spec.room_y;

  const Rgb wall_color = base_color("wall");
  sampler.rect({-half_x, -half_y, 0}, {spec.room_x, 0, 0}, {0, 0, hz}, wall, jitter(wall_color, rng));
  sampler.rect({-half_x, half_y, 0}, {spec.room_x, 0, 0}, {0, 0, hz}, wall, jitter(wall_color, rng));
  sampler.rect({-half_x, -half_y, 0}, {0, spec.room_y, 0}, {0, 0, hz}, wall, jitter(wall_color, rng));
  sampler.rect({half_x, -half_y, 0}, {0, spec.room_y, 0}, {0, 0, hz}, wall, jitter(wall_color, rng));
  area += 2 * (spec.room_x + spec.room_y) * hz;

  for (const auto& c : scene.objects) {
    const Eigen::Vector3d d = c.max - c.min;
    const Rgb col = jitter(base_color(classes.name(c.class_id)), rng);
    area -= d.x() * d.y();  // floor footprint removed
    area += d.x() * d.y() + 2 * (d.x() + d.y()) * d.z();
    sampler.rect({c.min.x(), c.min.y(), c.max.z()}, {d.x(), 0, 0}, {0, d.y(), 0}, c.class_id, col);
    sampler.rect({c.min.x(), c.min.y(), 0}, {d.x(), 0, 0}, {0, 0, d.z()}, c.class_id, col);
    sampler.rect({c.min.x(), c.max.y(), 0}, {d.x(), 0, 0}, {0, 0, d.z()}, c.class_id, col);
    sampler.rect({c.min.x(), c.min.y(), 0}, {0, d.y(), 0}, {0, 0, d.z()}, c.class_id, col);
    sampler.rect({c.max.x(), c.min.y(), 0}, {0, d.y(), 0}, {0, 0, d.z()}, c.class_id, col);
  }
  scene.surface_area = area;
  cloud.validate(classes);
  return scene;
}

CameraIntrinsics default_intrinsics() { return {320.0, 320.0, 319.5, 239.5, 640, 480}; }

std::vector<CameraPose> make_trajectory(const SceneSpec& spec, int n_frames) {
  if (n_frames < 1) throw InvariantError("trajectory needs at least one frame");
  const double radius = 0.42 * std::min(spec.room_x, spec.room_y);
  const double eye = std::min(1.5, 0.6 * spec.room_z);
  const Eigen::Vector3d target(0, 0, 0.35 * spec.room_z);
  const Eigen::Vector3d up(0, 0, 1);
  std::vector<CameraPose> poses;
  poses.reserve(n_frames);
  for (int i = 0; i < n_frames; ++i) {
    const double a = 2 * std::numbers::pi * i / n_frames;
    const Eigen::Vector3d pos(radius * std::cos(a), radius * std::sin(a), eye);
    // Camera axes: x right, y down, z forward.
    const Eigen::Vector3d fwd = (target - pos).normalized();
    const Eigen::Vector3d right = fwd.cross(up).normalized();
    const Eigen::Vector3d down = fwd.cross(right);
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 1>(0, 0) = right;
    m.block<3, 1>(0, 1) = down;
    m.block<3, 1>(0, 2) = fwd;
    m.block<3, 1>(0, 3) = pos;
    poses.emplace_back(m);
  }
  return poses;
}

std::vector<FrameRecord> render_frames(const SyntheticScene& scene, const std::vector<CameraPose>& poses,
                                       const CameraIntrinsics& k, const ClassTable& classes,
                                       const EmitOptions& options) {
  std::vector<FrameRecord> frames;
  frames.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    auto r = render_frame(scene.cloud, k, poses[i], options.splat_radius_px, classes.ignore_id());
    FrameRecord f;
    f.frame_index = static_cast<int>(i) * options.frame_index_step;
    f.intrinsics = k;
    f.pose = poses[i];
    f.depth = std::move(r.depth);
    f.mask = std::move(r.mask);
    f.color = std::move(r.color);
    frames.push_back(std::move(f));
  }
  return frames;
}

EmittedDataset emit_dataset(const SceneSpec& spec, int n_frames, const CameraIntrinsics& k,
                            const std::filesystem::path& out_dir, const ClassTable& classes,
                            const EmitOptions& options) {
  if (options.frame_index_step < 1) throw InvariantError("frame index step must be >= 1");
  EmittedDataset out{make_scene(spec, classes), {}};
  std::filesystem::create_directories(out_dir);
  DatasetLayout layout{out_dir};
  save_scene(out.scene.cloud, std::nullopt, layout.scene(), classes);
  classes.save(layout.classes());
  const auto frames = render_frames(out.scene, make_trajectory(spec, n_frames), k, classes, options);
  for (const auto& f : frames) {
    write_frame(f, out_dir, classes);
    out.frame_indices.push_back(f.frame_index);
  }
  return out;
}

// ---- Two-lobe fixtures ------------------------------------------------------

ClassTable two_lobe_classes() { return ClassTable({"background", "object"}); }

std::vector<TwoLobeFixture> make_two_lobe_fixtures(int count, std::uint64_t seed) {
  constexpr int kSize = 96;
  std::vector<TwoLobeFixture> out;
  out.reserve(count);
  auto bin = [](Rgb c) { return ((c.r >> 5) << 6) | ((c.g >> 5) << 3) | (c.b >> 5); };
  for (int n = 0; n < count; ++n) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(n)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> byte(0, 255);
    const double angle = unit(rng) * std::numbers::pi;
    const double radius = 6 + 6 * unit(rng);
    const double half_sep = radius + 4 + (34 - 2 * radius) * unit(rng);
    const double bar = 3 + 2 * unit(rng);
    const Eigen::Vector2d center(kSize / 2.0 - 0.5, kSize / 2.0 - 0.5);
    const Eigen::Vector2d axis(std::cos(angle), std::sin(angle));
    const Eigen::Vector2d c1 = center - half_sep * axis, c2 = center + half_sep * axis;

    Rgb flat, background;
    do {
      flat = {static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng)),
              static_cast<std::uint8_t>(byte(rng))};
      background = {static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng)),
                    static_cast<std::uint8_t>(byte(rng))};
    } while (bin(flat) == bin(background));

    TwoLobeFixture f{RgbImage(kSize, kSize, background), LabelMask(kSize, kSize, 0), BinaryMask(kSize, kSize)};
    for (int v = 0; v < kSize; ++v)
      for (int u = 0; u < kSize; ++u) {
        const Eigen::Vector2d p(u, v);
        const double s = (p - center).dot(axis);
        const double perp = std::abs((p - center).dot(Eigen::Vector2d(-axis.y(), axis.x())));
        const bool inside = (p - c1).norm() <= radius || (p - c2).norm() <= radius ||
                            (std::abs(s) <= half_sep && perp <= bar);
        if (!inside) continue;
        f.gt.at(u, v) = 1;
        f.object.at(u, v) = 1;
        f.image.at(u, v) = s < 0 ? flat
                                 : Rgb{static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng)),
                                       static_cast<std::uint8_t>(byte(rng))};
      }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace csf

namespace csf {

double two_lobe_mean_iou(const std::vector<TwoLobeFixture>& fixtures, AugmentStrategy strategy,
                         std::uint64_t seed, GranularityMode mode) {
  if (fixtures.empty()) throw InvariantError("no fixtures");
  const ClassTable classes = two_lobe_classes();
  double sum = 0;
  for (std::size_t n = 0; n < fixtures.size(); ++n) {
    const auto& f = fixtures[n];
    const PromptedOracleSegmenter seg({{0, f.gt}}, classes, mode);
    const std::uint64_t s = mix_seed(seed, n);
    const PromptSet ps = sample_sparse_prompts(f.gt, classes.ignore_id(), s);
    const BinaryMask m = run_augmented_prompt(seg, 0, &f.image, ps, 1, strategy, s);
    sum += mask_iou(m, f.object);
  }
  return sum / static_cast<double>(fixtures.size());
}

}  // namespace csf
