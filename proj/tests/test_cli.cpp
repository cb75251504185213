#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "csf/app/app.hpp"
#include "csf/io.hpp"
#include "test_util.hpp"

using namespace csf;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "csf");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = app::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string bytes(const fs::path& p) { return read_text_file(p); }

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

// Small dataset shared by several cases.
const fs::path& dataset() {
  static const fs::path dir = [] {
    auto d = scratch_dir("dataset");
    const auto r = cli({"synth", "--out", d.string(), "--seed", "3", "--density", "800", "--frames", "6"});
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

double fused_coverage(const fs::path& ply) {
  const auto ct = ClassTable::scannet20();
  const auto c = load_scene(ply, ct);
  std::size_t n = 0;
  for (auto l : c.gt_labels) n += l != ct.ignore_id();
  return static_cast<double>(n) / c.size();
}

}  // namespace

TEST_CASE("config defaults, file values and flag precedence") {
  const app::PipelineConfig d;
  CHECK(d.frame_stride == 50);
  CHECK(d.pixel_stride == 1);
  CHECK(d.radius_m == 0.1);
  CHECK(d.strategy == AugmentStrategy::none);
  CHECK(d.policy == IgnorePolicy::penalize);

  const auto c = app::PipelineConfig::parse("# comment\nframe_stride = 10\nradius=0.05  # inline\n\nstrategy = max_entropy\n");
  CHECK(c.frame_stride == 10);
  CHECK(c.radius_m == 0.05);
  CHECK(c.strategy == AugmentStrategy::max_entropy);
  CHECK_THROWS_AS(app::PipelineConfig::parse("bogus = 1\n"), FormatError);
  CHECK_THROWS_AS(app::PipelineConfig::parse("frame_stride\n"), FormatError);
  CHECK_THROWS_AS(app::PipelineConfig::parse("radius = 0.1m\n"), FormatError);

  // The echo re-parses to the same configuration.
  std::string text;
  for (const auto& [k, v] : c.entries()) text += k + " = " + v + "\n";
  CHECK(app::PipelineConfig::parse(text).entries() == c.entries());

  const auto dir = scratch_dir("cfg");
  write_text(dir / "run.cfg", "frame_stride = 1000\npixel_stride = 3\n");
  const auto r = cli({"fuse", "--config", (dir / "run.cfg").string(), "--frames", dataset().string(), "--frame-stride",
                      "50", "--out", (dir / "out").string()});
  CHECK(r.code == 0);
  CHECK(r.err.find("warning") == std::string::npos);  // flag overrode the 1000 from the file
  CHECK(r.out.find("fused 6 frames") != std::string::npos);
}

TEST_CASE("synth: determinism and empty rooms") {
  const auto a = scratch_dir("synth_a"), b = scratch_dir("synth_b");
  for (const auto& d : {a, b})
    REQUIRE(cli({"synth", "--out", d.string(), "--seed", "9", "--density", "200", "--frames", "2"}).code == 0);
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    CHECK(bytes(e.path()) == bytes(b / fs::relative(e.path(), a)));
  }
  const auto z = scratch_dir("synth_zero");
  const auto r = cli({"synth", "--out", z.string(), "--objects", "0", "--density", "200", "--frames", "1"});
  CHECK(r.code == 0);
  CHECK(r.out.find("objects 0") != std::string::npos);
  const auto cloud = load_scene(z / "scene.ply", ClassTable::scannet20());
  for (auto l : cloud.gt_labels) CHECK(l <= 1);
  CHECK(cli({"synth", "--out", z.string(), "--objects", "90"}).code == 1);
}

TEST_CASE("fuse: oracle masks, stride warning, order invariance") {
  const auto dir = scratch_dir("fuse");
  auto r = cli({"fuse", "--frames", dataset().string(), "--out", (dir / "a").string(), "--save-accumulator"});
  REQUIRE(r.code == 0);
  CHECK(fused_coverage(dir / "a" / "fused.ply") >= 0.95);
  CHECK(fs::exists(dir / "a" / "accumulator.bin"));
  CHECK(fs::exists(dir / "a" / "fuse_stats.txt"));

  r = cli({"fuse", "--frames", dataset().string(), "--out", (dir / "b").string(), "--frame-list",
           "250,100,0,200,50,150"});
  REQUIRE(r.code == 0);
  CHECK(bytes(dir / "a" / "fused.ply") == bytes(dir / "b" / "fused.ply"));

  r = cli({"fuse", "--frames", dataset().string(), "--out", (dir / "c").string(), "--frame-stride", "100000"});
  CHECK(r.code == 0);
  CHECK(r.err.find("warning") != std::string::npos);
  CHECK(r.out.find("fused 1 frames") != std::string::npos);

  // Frames 0, 50, ... but masks only for frame 0.
  const auto masks = dir / "masks";
  fs::create_directories(masks);
  fs::copy_file(dataset() / "label" / "0.pgm", masks / "0.pgm");
  r = cli({"fuse", "--frames", dataset().string(), "--out", (dir / "d").string(), "--masks", "directory",
           "--mask-dir", masks.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("frame 50") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "d"));
  r = cli({"fuse", "--frames", dataset().string(), "--out", (dir / "d").string(), "--masks", "directory",
           "--mask-dir", masks.string(), "--skip-missing"});
  CHECK(r.code == 0);
  CHECK(r.out.find("fused 1 frames") != std::string::npos);

  CHECK(cli({"fuse", "--frames", (dir / "nowhere").string(), "--out", (dir / "e").string()}).code == 1);
  CHECK(cli({"fuse", "--frames", dataset().string(), "--radius", "-1"}).code != 0);
  CHECK(cli({"fuse", "--frames", dataset().string(), "--strategy", "best"}).code == 2);
}

TEST_CASE("augment command") {
  const auto dir = scratch_dir("augment");
  Image<std::uint8_t> seg(11, 2, 0);
  for (int u = 0; u <= 10; ++u) seg.at(u, 0) = 1;
  write_gray_pgm(seg, dir / "seg.pgm");
  auto r = cli({"augment", "--mask", (dir / "seg.pgm").string(), "--anchor", "0,0", "--strategy", "max_distance"});
  CHECK(r.code == 0);
  CHECK(r.out == "(10,0)\n");

  write_ppm(RgbImage(11, 2, Rgb{9, 9, 9}), dir / "flat.ppm");
  Image<std::uint8_t> m(11, 2, 0);
  m.at(4, 1) = 1;
  m.at(7, 0) = 1;
  write_gray_pgm(m, dir / "m.pgm");
  r = cli({"augment", "--image", (dir / "flat.ppm").string(), "--mask", (dir / "m.pgm").string(), "--anchor", "0,0",
           "--strategy", "max_entropy"});
  CHECK(r.code == 0);
  CHECK(r.out == "(7,0)\n");

  r = cli({"augment", "--mask", (dir / "seg.pgm").string(), "--anchor", "0,0", "--strategy", "furthest"});
  CHECK(r.code == 2);
  write_gray_pgm(Image<std::uint8_t>(4, 4, 0), dir / "empty.pgm");
  r = cli({"augment", "--mask", (dir / "empty.pgm").string(), "--anchor", "0,0", "--strategy", "max_distance"});
  CHECK(r.code == 1);

  // A second point across the bar promotes the whole instance.
  LabelMask gt(11, 2, 1);
  for (int u = 0; u <= 10; ++u) gt.at(u, 0) = 0;
  write_label_pgm(gt, dir / "gt.pgm", ClassTable({"bar", "bg"}));
  write_text(dir / "classes.txt", "bar\nbg\n");
  Image<std::uint8_t> half(11, 2, 0);
  for (int u = 0; u <= 8; ++u) half.at(u, 0) = 1;
  write_gray_pgm(half, dir / "half.pgm");
  r = cli({"augment", "--mask", (dir / "half.pgm").string(), "--anchor", "0,0", "--strategy", "max_distance", "--gt",
           (dir / "gt.pgm").string(), "--classes", (dir / "classes.txt").string(), "--out",
           (dir / "aug.pgm").string()});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("(8,0)\n", 0) == 0);
  const auto aug = read_gray_pgm(dir / "aug.pgm");
  for (int u = 0; u <= 10; ++u) {
    CHECK(aug.at(u, 0) == 255);
    CHECK(aug.at(u, 1) == 0);
  }
  CHECK(r.out.find("confidence 0.9") != std::string::npos);
}

TEST_CASE("eval command") {
  const auto dir = scratch_dir("eval");
  const ClassTable ab({"A", "B"});
  write_text(dir / "classes.txt", "A\nB\n");
  ScenePointCloud gt;
  for (int i = 0; i < 8; ++i) gt.positions.emplace_back(float(i), 0.f, 0.f);
  gt.gt_labels = {0, 0, 0, 0, 1, 1, 1, 2};
  save_scene(gt, std::nullopt, dir / "gt.ply", ab);
  ScenePointCloud pred = gt;
  pred.gt_labels = {0, 0, 2, 2, 1, 1, 1, 0};
  save_scene(pred, std::nullopt, dir / "pred.ply", ab);
  const std::string cls = (dir / "classes.txt").string();

  auto r = cli({"eval", (dir / "gt.ply").string(), (dir / "gt.ply").string(), "--classes", cls});
  CHECK(r.code == 0);
  CHECK(r.out.find("miou 100.0") != std::string::npos);

  r = cli({"eval", (dir / "pred.ply").string(), (dir / "gt.ply").string(), "--classes", cls, "--out", dir.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("miou 75.0") != std::string::npos);
  CHECK(bytes(dir / "eval.txt").find("miou=0.750000") != std::string::npos);

  const auto exc = cli({"eval", (dir / "pred.ply").string(), (dir / "gt.ply").string(), "--classes", cls, "--policy", "exclude"});
  CHECK(exc.out.find("miou 100.0") != std::string::npos);

  ScenePointCloud shorter = gt;
  shorter.positions.pop_back();
  shorter.gt_labels.pop_back();
  save_scene(shorter, std::nullopt, dir / "short.ply", ab);
  r = cli({"eval", (dir / "short.ply").string(), (dir / "gt.ply").string(), "--classes", cls});
  CHECK(r.code == 1);
  CHECK(r.err.find("mismatch") != std::string::npos);
  CHECK(cli({"eval", (dir / "gt.ply").string(), (dir / "gt.ply").string(), "--policy", "lenient"}).code == 2);
}

TEST_CASE("pipeline: broken config writes nothing") {
  const auto dir = scratch_dir("pipe_broken");
  const auto r = cli({"pipeline", "--synth", "--config", (dir / "missing.cfg").string(), "--out", (dir / "o").string()});
  CHECK(r.code != 0);
  CHECK_FALSE(fs::exists(dir / "o"));
  write_text(dir / "bad.cfg", "frame_stride = fifty\n");
  CHECK(cli({"pipeline", "--synth", "--config", (dir / "bad.cfg").string(), "--out", (dir / "o").string()}).code != 0);
  CHECK_FALSE(fs::exists(dir / "o"));
  CHECK(cli({"pipeline", "--frames", (dir / "none").string(), "--out", (dir / "o").string()}).code != 0);
  CHECK_FALSE(fs::exists(dir / "o"));
}

TEST_CASE("pipeline: end to end, manifests, prompted oracle") {
  const auto dir = scratch_dir("pipe");
  auto r = cli({"pipeline", "--frames", dataset().string(), "--out", (dir / "a").string()});
  REQUIRE(r.code == 0);
  r = cli({"pipeline", "--frames", dataset().string(), "--out", (dir / "a").string()});
  REQUIRE(r.code == 0);
  auto m = nlohmann::json::parse(bytes(dir / "a" / "manifest.json"));
  CHECK(m["results"]["exclude"]["miou"].get<double>() >= 95.0);
  CHECK(m["config"]["frame_stride"] == "50");
  CHECK(m["config"]["radius"] == "0.1");

  // Identical runs differ only in the timestamp.
  REQUIRE(cli({"pipeline", "--frames", dataset().string(), "--out", (dir / "b").string()}).code == 0);
  auto m2 = nlohmann::json::parse(bytes(dir / "b" / "manifest.json"));
  m.erase("timestamp");
  m2.erase("timestamp");
  m["config"].erase("out");
  m2["config"].erase("out");
  CHECK(m == m2);
  CHECK(bytes(dir / "a" / "fused.ply") == bytes(dir / "b" / "fused.ply"));

  r = cli({"pipeline", "--frames", dataset().string(), "--out", (dir / "p").string(), "--masks", "prompted-oracle",
           "--strategy", "max_entropy", "--fixtures", "20"});
  REQUIRE(r.code == 0);
  m = nlohmann::json::parse(bytes(dir / "p" / "manifest.json"));
  const auto& bench = m["prompt_benchmark"];
  CHECK(bench["miou_augmented"].get<double>() >= bench["miou_none"].get<double>());
  CHECK(bench["miou_augmented"] == bench["miou_max_entropy"]);
}

TEST_CASE("usage errors") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}
