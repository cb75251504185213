#include <doctest.h>

#include <algorithm>
#include <random>

#include "csf/fusion.hpp"
#include "csf/reference.hpp"
#include "csf/synthetic.hpp"
#include "test_util.hpp"

using namespace csf;

namespace {

std::vector<Eigen::Vector3f> line_cloud(int n) {
  std::vector<Eigen::Vector3f> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(static_cast<float>(i), 0.f, 0.f);
  return pts;
}

struct SmallScene {
  ClassTable classes = ClassTable::scannet20();
  SyntheticScene scene;
  std::vector<FrameRecord> frames;
};

SmallScene small_scene(std::uint64_t seed, int n_frames) {
  SmallScene s;
  SceneSpec spec;
  spec.density = 600;
  spec.object_count = 4;
  spec.rng_seed = seed;
  s.scene = make_scene(spec, s.classes);
  const CameraIntrinsics k{80, 80, 79.5, 59.5, 160, 120};
  s.frames = render_frames(s.scene, make_trajectory(spec, n_frames), k, s.classes);
  return s;
}

}  // namespace

TEST_CASE("transfer examples") {
  const auto pts = line_cloud(10);
  const SceneIndex idx(pts);
  VoteAccumulator acc(10, 20);
  LabeledFragment f;
  f.points = {{5, 0, 0}};
  f.labels = {2};
  CHECK(transfer_votes(f, idx, acc, 0.1) == 1);
  CHECK(acc.count(5, 2) == 1);
  CHECK(acc.total() == 1);

  f.points = {{5, 0.15, 0}};
  CHECK(transfer_votes(f, idx, acc, 0.1) == 0);
  CHECK(acc.total() == 1);

  VoteAccumulator b(10, 20);
  f.points = {{3, 0, 0}, {3, 0, 0}, {3, 0, 0}};
  f.labels = {2, 2, 7};
  transfer_votes(f, idx, b, 0.1);
  CHECK(b.count(3, 2) == 2);
  CHECK(b.count(3, 7) == 1);
  CHECK(b.total() == 3);

  f.labels = {2, 2, 20};
  CHECK_THROWS_AS(transfer_votes(f, idx, b, 0.1), InvariantError);
  VoteAccumulator wrong(9, 20);
  CHECK_THROWS_AS(transfer_votes(f, idx, wrong, 0.1), InvariantError);
}

TEST_CASE("each fragment point votes once, on its nearest point") {
  const auto pts = line_cloud(3);
  const SceneIndex idx(pts);
  VoteAccumulator acc(3, 4);
  LabeledFragment f;
  f.points = {{1.4, 0, 0}};
  f.labels = {1};
  transfer_votes(f, idx, acc, 10.0);
  CHECK(acc.total() == 1);
  CHECK(acc.count(1, 1) == 1);
  // Equidistant: lowest index wins.
  f.points = {{0.5, 0, 0}};
  transfer_votes(f, idx, acc, 10.0);
  CHECK(acc.count(0, 1) == 1);
}

TEST_CASE("fuse_labels argmax and ties") {
  VoteAccumulator acc(4, 10);
  const ClassId ign = 10;
  acc.add(1, 8);
  acc.add(1, 8);
  acc.add(1, 3);
  for (int i = 0; i < 3; ++i) {
    acc.add(2, 9);
    acc.add(2, 4);
  }
  acc.add(3, 0);
  const auto l = fuse_labels(acc, ign);
  CHECK(l == std::vector<ClassId>{ign, 8, 4, 0});
}

TEST_CASE("fuse_labels equals a brute-force max scan") {
  std::mt19937 rng(3);
  VoteAccumulator acc(500, 6);
  for (int i = 0; i < 3000; ++i) acc.add(rng() % 500, static_cast<ClassId>(rng() % 6));
  const auto l = fuse_labels(acc, 6);
  for (std::size_t p = 0; p < 500; ++p) {
    const auto row = acc.row(p);
    const auto mx = *std::max_element(row.begin(), row.end());
    if (mx == 0) {
      CHECK(l[p] == 6);
      continue;
    }
    ClassId first = 0;
    while (row[first] != mx) ++first;
    CHECK(l[p] == first);
  }
}

TEST_CASE("merge identities") {
  std::mt19937 rng(4);
  VoteAccumulator a(50, 5), b(50, 5), zero(50, 5);
  for (int i = 0; i < 200; ++i) {
    a.add(rng() % 50, static_cast<ClassId>(rng() % 5));
    b.add(rng() % 50, static_cast<ClassId>(rng() % 5));
  }
  CHECK(merge_accumulators(a, zero) == a);
  CHECK(merge_accumulators(a, b) == merge_accumulators(b, a));
  CHECK(merge_accumulators(a, b).total() == a.total() + b.total());
  CHECK_THROWS_AS(merge_accumulators(a, VoteAccumulator(49, 5)), InvariantError);
  CHECK_THROWS_AS(merge_accumulators(a, VoteAccumulator(50, 4)), InvariantError);
}

TEST_CASE("accumulator dump round trip and corruption") {
  const auto dir = scratch_dir("acc");
  VoteAccumulator a(37, 7);
  std::mt19937 rng(5);
  for (int i = 0; i < 500; ++i) a.add(rng() % 37, static_cast<ClassId>(rng() % 7));
  a.save(dir / "a.bin");
  CHECK(VoteAccumulator::load(dir / "a.bin") == a);
  std::filesystem::resize_file(dir / "a.bin", std::filesystem::file_size(dir / "a.bin") - 3);
  CHECK_THROWS_AS(VoteAccumulator::load(dir / "a.bin"), FormatError);
}

TEST_CASE("fusion config validation") {
  CHECK_NOTHROW(FusionConfig{}.validate());
  CHECK(FusionConfig{}.radius_m == 0.1);
  CHECK(FusionConfig{}.frame_stride == 50);
  CHECK(FusionConfig{}.pixel_stride == 1);
  CHECK_THROWS_AS((FusionConfig{0, 1, 1}.validate()), InvariantError);
  CHECK_THROWS_AS((FusionConfig{0.1, 0, 1}.validate()), InvariantError);
  CHECK_THROWS_AS((FusionConfig{0.1, 1, 0}.validate()), InvariantError);
}

TEST_CASE("run_csf with zero frames leaves every point ignored") {
  const auto s = small_scene(1, 1);
  const auto r = run_csf(s.scene.cloud, std::span<const FrameRecord>{}, FusionConfig{}, s.classes);
  CHECK(std::all_of(r.labels.begin(), r.labels.end(), [&](ClassId l) { return l == s.classes.ignore_id(); }));
  CHECK(r.stats.ignore_fraction == 1.0);
  CHECK(r.stats.frames_used == 0);
}

TEST_CASE("single unanimous frame with a huge radius") {
  ScenePointCloud c;
  c.positions = {{0, 0, 1}, {0.01f, 0, 1}, {5, 5, 5}};
  c.gt_labels = {3, 3, 3};
  const auto ct = ClassTable::scannet20();
  FrameRecord f;
  f.intrinsics = {10, 10, 4.5, 4.5, 10, 10};
  auto r = render_frame(c, f.intrinsics, f.pose, 2, ct.ignore_id());
  f.depth = r.depth;
  f.mask = r.mask;
  const std::vector<FrameRecord> frames{f};
  const auto out = run_csf(c, frames, {100.0, 1, 50}, ct);
  for (std::size_t i = 0; i < c.size(); ++i)
    if (out.labels[i] != ct.ignore_id()) CHECK(out.labels[i] == 3);
  CHECK(out.labels[0] == 3);
}

TEST_CASE("run_csf properties on small synthetic runs") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto s = small_scene(seed, 6);
    const FusionConfig cfg{0.1, 2, 50};
    const auto par = run_csf(s.scene.cloud, s.frames, cfg, s.classes);
    const auto ser = reference::run_csf(s.scene.cloud, s.frames, cfg, s.classes);
    CHECK(par.labels == ser.labels);
    CHECK(par.accumulator == ser.accumulator);
    CHECK(par.stats.gated_votes == ser.stats.gated_votes);
    // Conservation: total votes equal gated fragment points.
    CHECK(par.accumulator.total() == par.stats.gated_votes);
    CHECK(par.stats.fragment_points >= par.stats.gated_votes);

    // Sequential transfer equals merged per-frame accumulators.
    VoteAccumulator merged(s.scene.cloud.size(), s.classes.size());
    for (const auto& f : s.frames)
      merged += run_csf(s.scene.cloud, std::span<const FrameRecord>(&f, 1), cfg, s.classes).accumulator;
    CHECK(merged == par.accumulator);

    // Monotonicity when appending frames.
    VoteAccumulator prev(s.scene.cloud.size(), s.classes.size());
    for (std::size_t n = 1; n <= s.frames.size(); ++n) {
      const auto cur = run_csf(s.scene.cloud, std::span<const FrameRecord>(s.frames.data(), n), cfg, s.classes);
      bool grew = true;
      for (std::size_t i = 0; i < prev.counts().size(); ++i) grew = grew && cur.accumulator.counts()[i] >= prev.counts()[i];
      CHECK(grew);
      prev = cur.accumulator;
    }

    // Resumable fusion from a partial accumulator.
    const auto half = run_csf(s.scene.cloud, std::span<const FrameRecord>(s.frames.data(), 3), cfg, s.classes);
    const auto rest = run_csf(s.scene.cloud, std::span<const FrameRecord>(s.frames.data() + 3, s.frames.size() - 3),
                              cfg, s.classes, half.accumulator);
    CHECK(rest.accumulator == par.accumulator);
    CHECK(rest.labels == par.labels);
  }
}

TEST_CASE("gating: far points stay ignored") {
  auto s = small_scene(4, 3);
  // A distant cluster no camera sees.
  const std::size_t n0 = s.scene.cloud.size();
  for (int i = 0; i < 10; ++i) {
    s.scene.cloud.positions.emplace_back(100.f + i, 100.f, 100.f);
    s.scene.cloud.colors.push_back({});
    s.scene.cloud.gt_labels.push_back(0);
  }
  const auto r = run_csf(s.scene.cloud, s.frames, FusionConfig{}, s.classes);
  for (std::size_t i = n0; i < s.scene.cloud.size(); ++i) {
    CHECK(r.labels[i] == s.classes.ignore_id());
    for (auto c : r.accumulator.row(i)) CHECK(c == 0);
  }
}

TEST_CASE("frame stride filters by frame index") {
  const auto s = small_scene(5, 4);  // indices 0, 50, 100, 150
  const auto all = run_csf(s.scene.cloud, s.frames, {0.1, 3, 50}, s.classes);
  CHECK(all.stats.frames_used == 4);
  const auto some = run_csf(s.scene.cloud, s.frames, {0.1, 3, 100}, s.classes);
  CHECK(some.stats.frames_used == 2);
  const auto one = run_csf(s.scene.cloud, s.frames, {0.1, 3, 1000}, s.classes);
  CHECK(one.stats.frames_used == 1);
  auto no_mask = s.frames;
  no_mask[1].mask.reset();
  CHECK_THROWS_AS(run_csf(s.scene.cloud, no_mask, {0.1, 3, 50}, s.classes), InvariantError);
  CHECK_NOTHROW(run_csf(s.scene.cloud, no_mask, {0.1, 3, 100}, s.classes));
}
