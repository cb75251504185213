#include <doctest.h>

#include <Eigen/Geometry>
#include <random>

#include "csf/projection.hpp"
#include "csf/reference.hpp"
#include "csf/synthetic.hpp"

using namespace csf;

namespace {

CameraPose random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = q.toRotationMatrix();
  m.topRightCorner<3, 1>() = 3 * Eigen::Vector3d(n(rng), n(rng), n(rng));
  return CameraPose(m);
}

FrameRecord flat_frame(int w, int h, std::uint16_t depth, ClassId label) {
  FrameRecord f;
  f.intrinsics = {10, 10, (w - 1) / 2.0, (h - 1) / 2.0, w, h};
  f.depth = DepthMap(w, h, depth);
  f.mask = LabelMask(w, h, label);
  return f;
}

}  // namespace

TEST_CASE("unproject examples") {
  const CameraIntrinsics k{100, 100, 50, 50, 200, 200};
  CHECK(unproject_pixel(50, 50, 1000, k) == Eigen::Vector3d(0, 0, 1.0));
  const auto p = unproject_pixel(150, 50, 2000, k);
  CHECK(p.x() == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(p.y() == 0.0);
  CHECK(p.z() == 2.0);
  CHECK_THROWS_AS(unproject_pixel(0, 0, 0, k), InvariantError);
  CHECK_THROWS_AS(unproject_pixel(200, 0, 10, k), InvariantError);
}

TEST_CASE("project examples") {
  const CameraIntrinsics k{100, 120, 31.5, 23.5, 64, 48};
  const auto pd = project_point({0, 0, 1}, k, CameraPose());
  REQUIRE(pd);
  CHECK(pd->u == 31.5);
  CHECK(pd->v == 23.5);
  CHECK(pd->depth_mm == 1000);
  CHECK_FALSE(project_point({0, 0, -1}, k, CameraPose()).has_value());
  CHECK_FALSE(project_point({1, 0, 0}, k, CameraPose()).has_value());
}

TEST_CASE("round trip through a random pose") {
  std::mt19937_64 rng(3);
  const CameraIntrinsics k{525, 525, 319.5, 239.5, 640, 480};
  std::uniform_int_distribution<int> U(0, 639), V(0, 479), D(100, 10000);
  for (int i = 0; i < 2000; ++i) {
    const auto pose = random_pose(rng);
    const int u = U(rng), v = V(rng);
    const auto d = static_cast<std::uint16_t>(D(rng));
    const Eigen::Vector3d w = pose.to_world(unproject_pixel(u, v, d, k));
    const auto pd = project_point(w, k, pose);
    REQUIRE(pd);
    CHECK(std::abs(pd->u - u) <= 0.5);
    CHECK(std::abs(pd->v - v) <= 0.5);
    CHECK(std::abs(pd->depth_mm - d) <= 1);
  }
}

TEST_CASE("frame_to_fragment hand enumeration") {
  auto f = flat_frame(4, 4, 1000, 3);
  const auto frag = frame_to_fragment(f, *f.mask, 1, 20);
  CHECK(frag.size() == 16);
  for (std::size_t i = 0; i < frag.size(); ++i) {
    CHECK(frag.points[i].z() == 1.0);
    CHECK(frag.labels[i] == 3);
  }
  // Row-major order: second point is pixel (1, 0).
  CHECK(frag.points[1].x() == doctest::Approx((1 - 1.5) / 10.0));
  CHECK(frag.points[4].y() == doctest::Approx((1 - 1.5) / 10.0));
}

TEST_CASE("frame_to_fragment empties and bounds") {
  auto f = flat_frame(7, 5, 1000, 20);
  CHECK(frame_to_fragment(f, *f.mask, 1, 20).size() == 0);
  f = flat_frame(7, 5, 0, 1);
  CHECK(frame_to_fragment(f, *f.mask, 1, 20).size() == 0);
  f = flat_frame(7, 5, 1200, 1);
  for (int s = 1; s <= 8; ++s) CHECK(frame_to_fragment(f, *f.mask, s, 20).size() == ((7 + s - 1) / s) * ((5 + s - 1) / s));
  CHECK_THROWS_AS(frame_to_fragment(f, LabelMask(6, 5, 1), 1, 20), InvariantError);
  CHECK_THROWS_AS(frame_to_fragment(f, *f.mask, 0, 20), InvariantError);
}

TEST_CASE("frame_to_fragment matches the serial reference") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    auto f = flat_frame(33, 21, 0, 0);
    f.pose = random_pose(rng);
    for (auto& d : f.depth.values) d = rng() % 3 ? static_cast<std::uint16_t>(rng() % 5000) : 0;
    for (auto& l : f.mask->values) l = static_cast<ClassId>(rng() % 6);
    for (int s : {1, 2, 5}) {
      const auto a = frame_to_fragment(f, *f.mask, s, 5), b = reference::frame_to_fragment(f, *f.mask, s, 5);
      CHECK(a.points == b.points);
      CHECK(a.labels == b.labels);
      for (auto l : a.labels) CHECK(l != 5);
    }
  }
}

TEST_CASE("rigid invariance under translation") {
  std::mt19937_64 rng(8);
  auto f = flat_frame(9, 7, 0, 1);
  f.pose = random_pose(rng);
  for (auto& d : f.depth.values) d = static_cast<std::uint16_t>(500 + rng() % 3000);
  const auto a = frame_to_fragment(f, *f.mask, 1, 20);
  const Eigen::Vector3d shift(0.7, -1.3, 2.1);
  Eigen::Matrix4d m = f.pose.matrix();
  m.topRightCorner<3, 1>() += shift;
  f.pose = CameraPose(m);
  const auto b = frame_to_fragment(f, *f.mask, 1, 20);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.labels[i] == b.labels[i]);
    CHECK((b.points[i] - a.points[i] - shift).norm() < 1e-6);
  }
}

TEST_CASE("render single point and z-buffer") {
  const CameraIntrinsics k{100, 100, 10, 8, 21, 17};
  ScenePointCloud c;
  c.positions = {{0, 0, 1}};
  c.gt_labels = {4};
  auto r = render_frame(c, k, CameraPose(), 0, 20);
  for (int v = 0; v < 17; ++v)
    for (int u = 0; u < 21; ++u) {
      const bool hit = u == 10 && v == 8;
      CHECK(r.depth.at(u, v) == (hit ? 1000 : 0));
      CHECK(r.mask.at(u, v) == (hit ? 4 : 20));
    }
  c.positions = {{0, 0, 2}, {0, 0, 1}};
  c.gt_labels = {7, 3};
  r = render_frame(c, k, CameraPose(), 1, 20);
  CHECK(r.depth.at(10, 8) == 1000);
  CHECK(r.mask.at(10, 8) == 3);
  // Equal depth keeps the lower point index.
  c.positions = {{0, 0, 1}, {0, 0, 1}};
  c.gt_labels = {6, 2};
  r = render_frame(c, k, CameraPose(), 1, 20);
  CHECK(r.mask.at(10, 8) == 6);
}

TEST_CASE("render matches the serial reference and respects the z-buffer") {
  const auto ct = ClassTable::scannet20();
  SceneSpec spec;
  spec.density = 400;
  spec.rng_seed = 5;
  const auto scene = make_scene(spec, ct);
  const auto k = CameraIntrinsics{160, 160, 79.5, 59.5, 160, 120};
  for (const auto& pose : make_trajectory(spec, 4)) {
    const auto a = render_frame(scene.cloud, k, pose, 1, ct.ignore_id());
    const auto b = reference::render_frame(scene.cloud, k, pose, 1, ct.ignore_id());
    CHECK(a.depth == b.depth);
    CHECK(a.mask == b.mask);
    CHECK(a.color == b.color);
    // No pixel is deeper than a point splatting onto it.
    for (std::size_t i = 0; i < scene.cloud.size(); i += 7) {
      const auto pd = project_point(scene.cloud.positions[i].cast<double>(), k, pose);
      if (!pd) continue;
      const int u = static_cast<int>(std::floor(pd->u + 0.5)), v = static_cast<int>(std::floor(pd->v + 0.5));
      for (int dv = -1; dv <= 1; ++dv)
        for (int du = -1; du <= 1; ++du)
          if (a.depth.in_bounds(u + du, v + dv)) {
            const auto z = a.depth.at(u + du, v + dv);
            CHECK(z != 0);
            CHECK(z <= pd->depth_mm);
          }
    }
  }
}

TEST_CASE("render then unproject recovers source labels") {
  const auto ct = ClassTable::scannet20();
  SceneSpec spec;
  spec.rng_seed = 6;
  const auto scene = make_scene(spec, ct);
  const auto k = default_intrinsics();
  const SceneIndex index(scene.cloud.positions);
  std::size_t agree = 0, total = 0;
  for (const auto& pose : make_trajectory(spec, 3)) {
    FrameRecord f;
    f.intrinsics = k;
    f.pose = pose;
    auto r = render_frame(scene.cloud, k, pose, 1, ct.ignore_id());
    f.depth = r.depth;
    const auto frag = frame_to_fragment(f, r.mask, 2, ct.ignore_id());
    for (std::size_t j = 0; j < frag.size(); ++j) {
      const auto nb = index.nearest(frag.points[j]);
      agree += scene.cloud.gt_labels[nb.index] == frag.labels[j];
      ++total;
    }
  }
  REQUIRE(total > 0);
  CHECK(static_cast<double>(agree) / total >= 0.99);
}
