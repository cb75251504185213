#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "csf/projection.hpp"
#include "csf/prompting.hpp"
#include "csf/prompt_types.hpp"
#include "csf/scene_model.hpp"

namespace csf {

struct SceneSpec {
  double room_x = 4.0;  // meters
  double room_y = 4.0;
  double room_z = 2.5;
  int object_count = 8;
  std::vector<std::string> object_classes = {"cabinet", "bed",  "chair",        "sofa",   "table",  "bookshelf",
                                             "desk",    "sink", "refrigerator", "toilet", "bathtub", "otherfurniture"};
  double density = 3500.0;  // points per square meter of surface
  std::uint64_t rng_seed = 0;

  void validate(const ClassTable& classes) const;
};

/// Axis-aligned box standing on the floor.
struct Cuboid {
  Eigen::Vector3d min;
  Eigen::Vector3d max;
  ClassId class_id = 0;

  bool overlaps_xy(const Cuboid& o, double gap = 0) const;
};

struct SyntheticScene {
  ScenePointCloud cloud;
  std::vector<Cuboid> objects;
  /// Total area of the sampled surfaces (floor outside the objects, four walls,
  /// object tops and sides), in square meters.
  double surface_area = 0;
};

/// Floor, four walls and non-overlapping cuboids, surface-sampled with
/// jittered stratified sampling. Deterministic per seed. Throws
/// InvariantError("scene too crowded") when objects cannot be placed.
SyntheticScene make_scene(const SceneSpec& spec, const ClassTable& classes);

/// Camera-to-world poses orbiting the room center at eye height, looking inward.
std::vector<CameraPose> make_trajectory(const SceneSpec& spec, int n_frames);

/// 640x480 camera with a 90 degree horizontal field of view.
CameraIntrinsics default_intrinsics();

struct EmitOptions {
  int frame_index_step = 50;  // emitted frames are 0, step, 2*step, ...
  int splat_radius_px = 1;
};

struct EmittedDataset {
  SyntheticScene scene;
  std::vector<int> frame_indices;
};

/// Writes scene.ply, classes.txt, intrinsics and per-frame depth/pose/color/label
/// files in DatasetLayout. Labels are ground-truth renderings.
EmittedDataset emit_dataset(const SceneSpec& spec, int n_frames, const CameraIntrinsics& k,
                            const std::filesystem::path& out_dir, const ClassTable& classes,
                            const EmitOptions& options = {});

/// Renders the frames of a synthetic scene in memory (same content as emit_dataset).
std::vector<FrameRecord> render_frames(const SyntheticScene& scene, const std::vector<CameraPose>& poses,
                                       const CameraIntrinsics& k, const ClassTable& classes,
                                       const EmitOptions& options = {});

// ---- Two-lobe prompt fixtures --------------------------------------------

/// Dumbbell-shaped object on a flat background: one lobe flat-colored, the
/// other textured. Class 0 is background, class 1 the object.
struct TwoLobeFixture {
  RgbImage image;
  LabelMask gt;
  BinaryMask object;
};

ClassTable two_lobe_classes();
std::vector<TwoLobeFixture> make_two_lobe_fixtures(int count, std::uint64_t seed);

/// Mean IoU of the object mask returned by the prompted oracle for one sparse
/// point annotation per fixture, using the given augmentation strategy.
double two_lobe_mean_iou(const std::vector<TwoLobeFixture>& fixtures, AugmentStrategy strategy,
                         std::uint64_t seed, GranularityMode mode = GranularityMode::three_level);

}  // namespace csf
