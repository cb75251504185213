#include "csf/scene_model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "csf/io.hpp"

namespace csf {

ClassTable::ClassTable(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw InvariantError("class table is empty");
  if (names_.size() >= kFileIgnoreLabel)
    throw InvariantError("class table supports at most 254 classes");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw InvariantError("empty class name");
    if (!seen.insert(n).second) throw InvariantError("duplicate class name: " + n);
  }
}

ClassTable ClassTable::scannet20() {
  return ClassTable({"wall", "floor", "cabinet", "bed", "chair", "sofa", "table", "door", "window",
                     "bookshelf", "picture", "counter", "desk", "curtain", "refrigerator",
                     "shower curtain", "toilet", "sink", "bathtub", "otherfurniture"});
}

ClassTable ClassTable::load(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    auto e = line.find_last_not_of(" \t\r");
    names.push_back(line.substr(b, e - b + 1));
  }
  return ClassTable(std::move(names));
}

void ClassTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& n : names_) out << n << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::optional<ClassId> ClassTable::find(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<ClassId>(it - names_.begin());
}

ClassId ClassTable::from_file_label(std::uint32_t raw) const {
  if (raw == kFileIgnoreLabel) return ignore_id();
  if (raw >= names_.size())
    throw InvariantError("label out of range: " + std::to_string(raw) + " (classes: " +
                         std::to_string(names_.size()) + ")");
  return static_cast<ClassId>(raw);
}

std::uint8_t ClassTable::to_file_label(ClassId id) const {
  if (id == ignore_id()) return kFileIgnoreLabel;
  if (!is_valid(id)) throw InvariantError("label out of range: " + std::to_string(id));
  return static_cast<std::uint8_t>(id);
}

void ScenePointCloud::validate(const ClassTable& classes) const {
  if (positions.empty()) throw InvariantError("point cloud is empty");
  for (const auto& p : positions)
    if (!p.allFinite()) throw InvariantError("non-finite point coordinate");
  if (!colors.empty() && colors.size() != positions.size())
    throw InvariantError("color count does not match point count");
  if (!gt_labels.empty()) {
    if (gt_labels.size() != positions.size())
      throw InvariantError("label count does not match point count");
    for (auto l : gt_labels)
      if (l > classes.ignore_id()) throw InvariantError("label out of range");
  }
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw InvariantError("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvariantError("image size must be positive");
  if (!(cx >= 0 && cx < width && cy >= 0 && cy < height))
    throw InvariantError("principal point outside the image");
}

CameraIntrinsics CameraIntrinsics::load(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::map<std::string, double> kv;
  std::string key;
  double value = 0;
  while (in >> key) {
    if (!(in >> value)) throw FormatError("intrinsics: missing value for " + key);
    kv[key] = value;
  }
  auto get = [&](const char* k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw FormatError(std::string("intrinsics: missing key ") + k);
    return it->second;
  };
  CameraIntrinsics k;
  k.fx = get("fx");
  k.fy = get("fy");
  k.cx = get("cx");
  k.cy = get("cy");
  k.width = static_cast<int>(get("width"));
  k.height = static_cast<int>(get("height"));
  k.validate();
  return k;
}

void CameraIntrinsics::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  out << "fx " << fx << "\nfy " << fy << "\ncx " << cx << "\ncy " << cy << "\nwidth " << width
      << "\nheight " << height << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

bool CameraPose::is_rigid(const Eigen::Matrix4d& m, double tol) {
  if (!m.allFinite()) return false;
  if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0)
    return false;
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  if ((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

CameraPose::CameraPose(const Eigen::Matrix4d& m) : matrix_(m) {
  if (!is_rigid(m)) throw InvariantError("pose not rigid");
}

Eigen::Vector3d CameraPose::to_world(const Eigen::Vector3d& p_cam) const {
  return matrix_.topLeftCorner<3, 3>() * p_cam + matrix_.topRightCorner<3, 1>();
}

Eigen::Vector3d CameraPose::to_camera(const Eigen::Vector3d& p_world) const {
  // Rigid inverse: R^T (p - t).
  return matrix_.topLeftCorner<3, 3>().transpose() * (p_world - matrix_.topRightCorner<3, 1>());
}

CameraPose CameraPose::load(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      if (!(in >> m(r, c))) throw FormatError("pose file needs 16 numbers: " + path.string());
  std::string extra;
  if (in >> extra) throw FormatError("trailing data in pose file: " + path.string());
  return CameraPose(m);
}

void CameraPose::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) out << (c ? " " : "") << matrix_(r, c);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void validate_mask(const LabelMask& mask, const ClassTable& classes) {
  if (mask.values.size() != static_cast<std::size_t>(mask.width) * mask.height)
    throw InvariantError("mask size does not match its dimensions");
  for (auto v : mask.values)
    if (v > classes.ignore_id()) throw InvariantError("label out of range: " + std::to_string(v));
}

void FrameRecord::validate(const ClassTable& classes) const {
  intrinsics.validate();
  if (!CameraPose::is_rigid(pose.matrix())) throw InvariantError("pose not rigid");
  if (depth.values.size() != static_cast<std::size_t>(depth.width) * depth.height)
    throw InvariantError("depth size does not match its dimensions");
  if (!depth.same_shape(intrinsics.width, intrinsics.height))
    throw InvariantError("depth dimensions do not match intrinsics");
  if (color && (!color->same_shape(depth) ||
                color->values.size() != depth.values.size()))
    throw InvariantError("color dimensions do not match depth");
  if (mask) {
    if (!mask->same_shape(depth)) throw InvariantError("mask dimensions do not match depth");
    validate_mask(*mask, classes);
  }
}

std::vector<int> select_frames(int total, int stride) {
  if (stride < 1) throw InvariantError("frame stride must be >= 1");
  std::vector<int> out;
  for (int i = 0; i < total; i += stride) out.push_back(i);
  return out;
}

}  // namespace csf
