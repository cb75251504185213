#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace csf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// File contents do not follow the expected format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A value violates a type invariant (pose not rigid, label out of range, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

using ClassId = std::uint16_t;

/// Label value used for "no label" in 8-bit PGM masks and PLY label properties.
inline constexpr std::uint8_t kFileIgnoreLabel = 255;

/// Ordered class taxonomy. Class ids are 0..size()-1; ignore_id() == size().
class ClassTable {
 public:
  explicit ClassTable(std::vector<std::string> names);

  /// The 20 ScanNet benchmark categories.
  static ClassTable scannet20();
  /// One class name per line; blank lines and '#' comments skipped.
  static ClassTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return names_.size(); }
  ClassId ignore_id() const { return static_cast<ClassId>(names_.size()); }
  bool is_valid(ClassId id) const { return id < names_.size(); }
  const std::string& name(ClassId id) const { return names_.at(id); }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<ClassId> find(const std::string& name) const;

  /// Maps a stored label to an internal id. 255 becomes ignore_id().
  ClassId from_file_label(std::uint32_t raw) const;
  /// Inverse of from_file_label.
  std::uint8_t to_file_label(ClassId id) const;

  bool operator==(const ClassTable&) const = default;

 private:
  std::vector<std::string> names_;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

struct ScenePointCloud {
  std::vector<Eigen::Vector3f> positions;
  std::vector<Rgb> colors;           // empty or one per point
  std::vector<ClassId> gt_labels;    // empty or one per point

  std::size_t size() const { return positions.size(); }
  bool has_colors() const { return !colors.empty(); }
  bool has_labels() const { return !gt_labels.empty(); }

  /// Throws InvariantError when the cloud is empty, non-finite or inconsistent.
  void validate(const ClassTable& classes) const;
};

struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const;
  bool operator==(const CameraIntrinsics&) const = default;

  /// Text file with `key value` lines for fx fy cx cy width height.
  static CameraIntrinsics load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

/// Camera-to-world rigid transform.
class CameraPose {
 public:
  CameraPose() : matrix_(Eigen::Matrix4d::Identity()) {}
  /// Throws InvariantError("pose not rigid") unless `m` is a proper rigid transform.
  explicit CameraPose(const Eigen::Matrix4d& m);

  static bool is_rigid(const Eigen::Matrix4d& m, double tol = 1e-5);

  const Eigen::Matrix4d& matrix() const { return matrix_; }
  Eigen::Matrix3d rotation() const { return matrix_.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return matrix_.topRightCorner<3, 1>(); }
  Eigen::Vector3d to_world(const Eigen::Vector3d& p_cam) const;
  Eigen::Vector3d to_camera(const Eigen::Vector3d& p_world) const;

  /// Whitespace-separated 4x4 row-major text.
  static CameraPose load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool operator==(const CameraPose& o) const { return matrix_ == o.matrix_; }

 private:
  Eigen::Matrix4d matrix_;
};

/// Generic row-major image buffer.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> values;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t size() const { return values.size(); }
  bool in_bounds(int u, int v) const { return u >= 0 && v >= 0 && u < width && v < height; }
  std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
  T& at(int u, int v) { return values[index(u, v)]; }
  const T& at(int u, int v) const { return values[index(u, v)]; }
  bool same_shape(int w, int h) const { return width == w && height == h; }
  template <typename U>
  bool same_shape(const Image<U>& o) const { return width == o.width && height == o.height; }

  bool operator==(const Image&) const = default;
};

/// Depth in millimeters; 0 marks an invalid pixel.
using DepthMap = Image<std::uint16_t>;
/// Class ids per pixel; ClassTable::ignore_id() for unlabeled pixels.
using LabelMask = Image<ClassId>;
using RgbImage = Image<Rgb>;

struct FrameRecord {
  int frame_index = 0;
  CameraIntrinsics intrinsics;
  CameraPose pose;
  DepthMap depth;
  std::optional<RgbImage> color;
  std::optional<LabelMask> mask;

  void validate(const ClassTable& classes) const;
  bool operator==(const FrameRecord&) const = default;
};

/// Frame indices 0, stride, 2*stride, ... below `total`.
std::vector<int> select_frames(int total, int stride);

/// Checks every value of `mask` is a class id or the ignore id.
void validate_mask(const LabelMask& mask, const ClassTable& classes);

}  // namespace csf
