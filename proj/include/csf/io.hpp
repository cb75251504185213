#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "csf/scene_model.hpp"

namespace csf {

namespace fs = std::filesystem;

// ---- PLY ----------------------------------------------------------------

enum class PlyEncoding { ascii, binary_little_endian };

/// Reads a PLY vertex cloud. Positions come from x/y/z, colors from
/// red/green/blue, labels from a `label` property (255 = ignore).
ScenePointCloud load_scene(const fs::path& path, const ClassTable& classes);

/// Writes positions as float, colors as uchar and, when `labels` is given
/// (or the cloud carries gt_labels), a uchar `label` property.
void save_scene(const ScenePointCloud& cloud, std::optional<std::span<const ClassId>> labels,
                const fs::path& path, const ClassTable& classes,
                PlyEncoding encoding = PlyEncoding::binary_little_endian);

// ---- Netpbm -------------------------------------------------------------

/// 16-bit binary PGM, big-endian samples.
DepthMap read_depth_pgm(const fs::path& path);
void write_depth_pgm(const DepthMap& depth, const fs::path& path);

/// 8-bit binary PGM label mask; 255 maps to ignore.
LabelMask read_label_pgm(const fs::path& path, const ClassTable& classes);
void write_label_pgm(const LabelMask& mask, const fs::path& path, const ClassTable& classes);

/// Raw 8-bit grayscale PGM.
Image<std::uint8_t> read_gray_pgm(const fs::path& path);
void write_gray_pgm(const Image<std::uint8_t>& img, const fs::path& path);

/// Binary PPM (P6, maxval 255).
RgbImage read_ppm(const fs::path& path);
void write_ppm(const RgbImage& img, const fs::path& path);

// ---- Frame dataset layout -------------------------------------------------
//
//   <root>/scene.ply          scene cloud (optional for frame loading)
//   <root>/classes.txt        class table (optional, defaults to ScanNet 20)
//   <root>/intrinsics.txt     shared depth-camera intrinsics
//   <root>/depth/<i>.pgm      16-bit depth, millimeters
//   <root>/pose/<i>.txt       camera-to-world 4x4
//   <root>/color/<i>.ppm      optional color
//   <root>/label/<i>.pgm      optional ground-truth mask

struct DatasetLayout {
  fs::path root;

  fs::path scene() const { return root / "scene.ply"; }
  fs::path classes() const { return root / "classes.txt"; }
  fs::path intrinsics() const { return root / "intrinsics.txt"; }
  fs::path depth(int i) const { return root / "depth" / (std::to_string(i) + ".pgm"); }
  fs::path pose(int i) const { return root / "pose" / (std::to_string(i) + ".txt"); }
  fs::path color(int i) const { return root / "color" / (std::to_string(i) + ".ppm"); }
  fs::path label(int i) const { return root / "label" / (std::to_string(i) + ".pgm"); }

  /// Sorted indices of frames that have a depth file.
  std::vector<int> frame_indices() const;
  /// One past the largest frame index on disk (0 when there are none).
  int sequence_length() const;
};

/// Loads one frame; the label mask is read when present.
FrameRecord load_frame(const fs::path& dir, int index, const ClassTable& classes);

/// Writes every present field of `frame` under `dir` using DatasetLayout.
/// Intrinsics are written to the shared intrinsics file.
void write_frame(const FrameRecord& frame, const fs::path& dir, const ClassTable& classes);

/// Reads a whole file into a string; throws IoError.
std::string read_text_file(const fs::path& path);

}  // namespace csf
