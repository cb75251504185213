#include <doctest.h>

#include <set>

#include "csf/io.hpp"
#include "csf/synthetic.hpp"
#include "test_util.hpp"

using namespace csf;

TEST_CASE("empty room has only wall and floor labels") {
  const auto ct = ClassTable::scannet20();
  SceneSpec spec;
  spec.object_count = 0;
  spec.density = 300;
  const auto s = make_scene(spec, ct);
  std::set<ClassId> labels(s.cloud.gt_labels.begin(), s.cloud.gt_labels.end());
  CHECK(labels == std::set<ClassId>{*ct.find("wall"), *ct.find("floor")});
}

TEST_CASE("point count follows the analytic surface area") {
  const auto ct = ClassTable::scannet20();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SceneSpec spec;
    spec.density = 500;
    spec.rng_seed = seed;
    const auto s = make_scene(spec, ct);
    // Closed form: floor minus footprints, 4 walls, object tops and sides.
    double area = spec.room_x * spec.room_y + 2 * (spec.room_x + spec.room_y) * spec.room_z;
    for (const auto& c : s.objects) {
      const Eigen::Vector3d d = c.max - c.min;
      area += 2 * (d.x() + d.y()) * d.z();
    }
    CHECK(s.surface_area == doctest::Approx(area).epsilon(1e-12));
    const double expect = area * spec.density;
    CHECK(std::abs(static_cast<double>(s.cloud.size()) - expect) <= 0.05 * expect);
  }
}

TEST_CASE("scene invariants and determinism") {
  const auto ct = ClassTable::scannet20();
  SceneSpec spec;
  spec.density = 400;
  spec.rng_seed = 17;
  const auto a = make_scene(spec, ct), b = make_scene(spec, ct);
  CHECK(a.cloud.positions == b.cloud.positions);
  CHECK(a.cloud.colors == b.cloud.colors);
  CHECK(a.cloud.gt_labels == b.cloud.gt_labels);
  spec.rng_seed = 18;
  CHECK(make_scene(spec, ct).cloud.positions != a.cloud.positions);

  CHECK(a.objects.size() == 8);
  for (std::size_t i = 0; i < a.objects.size(); ++i) {
    const auto& o = a.objects[i];
    CHECK(o.min.x() >= -spec.room_x / 2);
    CHECK(o.max.x() <= spec.room_x / 2);
    CHECK(o.min.y() >= -spec.room_y / 2);
    CHECK(o.max.y() <= spec.room_y / 2);
    CHECK(o.min.z() == 0.0);
    CHECK(o.max.z() <= spec.room_z);
    for (std::size_t j = i + 1; j < a.objects.size(); ++j) CHECK_FALSE(o.overlaps_xy(a.objects[j]));
  }
  for (auto l : a.cloud.gt_labels) CHECK(ct.is_valid(l));
  for (const auto& p : a.cloud.positions) {
    CHECK(std::abs(p.x()) <= spec.room_x / 2 + 1e-5);
    CHECK(std::abs(p.y()) <= spec.room_y / 2 + 1e-5);
  }
}

TEST_CASE("spec validation and crowding") {
  const auto ct = ClassTable::scannet20();
  SceneSpec spec;
  spec.room_x = 0;
  CHECK_THROWS_AS(make_scene(spec, ct), InvariantError);
  spec = {};
  spec.density = 0;
  CHECK_THROWS_AS(make_scene(spec, ct), InvariantError);
  spec = {};
  spec.object_classes = {"dragon"};
  CHECK_THROWS_AS(make_scene(spec, ct), InvariantError);
  spec = {};
  spec.object_count = 60;
  CHECK_THROWS_WITH(make_scene(spec, ct), "scene too crowded");
}

TEST_CASE("trajectory poses are rigid and smooth") {
  SceneSpec spec;
  CHECK(make_trajectory(spec, 1).size() == 1);
  CHECK_THROWS_AS(make_trajectory(spec, 0), InvariantError);
  const auto poses = make_trajectory(spec, 30);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    CHECK(CameraPose::is_rigid(poses[i].matrix()));
    const auto& a = poses[i];
    const auto& b = poses[(i + 1) % poses.size()];
    CHECK((a.translation() - b.translation()).norm() < 0.4);
    // Optical axis points toward the room center.
    const Eigen::Vector3d fwd = a.rotation().col(2);
    CHECK(fwd.dot(-a.translation()) > 0);
  }
}

TEST_CASE("emit then load every frame") {
  const auto dir = scratch_dir("emit");
  const auto ct = ClassTable::scannet20();
  SceneSpec spec;
  spec.density = 300;
  spec.rng_seed = 3;
  const CameraIntrinsics k{80, 80, 79.5, 59.5, 160, 120};
  const auto ds = emit_dataset(spec, 4, k, dir, ct);
  CHECK(ds.frame_indices == std::vector<int>{0, 50, 100, 150});
  const auto cloud = load_scene(DatasetLayout{dir}.scene(), ct);
  CHECK(cloud.positions == ds.scene.cloud.positions);
  CHECK(cloud.gt_labels == ds.scene.cloud.gt_labels);
  CHECK(ClassTable::load(DatasetLayout{dir}.classes()) == ct);
  const auto rendered = render_frames(ds.scene, make_trajectory(spec, 4), k, ct);
  for (std::size_t i = 0; i < rendered.size(); ++i) {
    const auto f = load_frame(dir, ds.frame_indices[i], ct);
    CHECK_NOTHROW(f.validate(ct));
    CHECK(f == rendered[i]);
    CHECK(f.depth == render_frame(ds.scene.cloud, k, f.pose, 1, ct.ignore_id()).depth);
  }
}

TEST_CASE("two-lobe fixtures") {
  const auto a = make_two_lobe_fixtures(30, 4), b = make_two_lobe_fixtures(30, 4);
  REQUIRE(a.size() == 30);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].image == b[i].image);
    CHECK(a[i].object == BinaryMask::of_class(a[i].gt, 1));
    // Single connected object, never touching the border.
    const auto inst = find_instances(a[i].gt, two_lobe_classes().ignore_id());
    CHECK(inst.size() == 2);
    for (int u = 0; u < 96; ++u) {
      CHECK(a[i].gt.at(u, 0) == 0);
      CHECK(a[i].gt.at(u, 95) == 0);
      CHECK(a[i].gt.at(0, u) == 0);
      CHECK(a[i].gt.at(95, u) == 0);
    }
  }
}
