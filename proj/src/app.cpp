#include "csf/app/app.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "csf/evaluation.hpp"
#include "csf/io.hpp"
#include "csf/prompting.hpp"
#include "csf/rng.hpp"
#include "csf/segmenters.hpp"
#include "csf/synthetic.hpp"

namespace csf::app {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "1.0.0";

class UsageError : public Error {
 public:
  using Error::Error;
};

ClassTable resolve_classes(const PipelineConfig& cfg) {
  if (!cfg.classes.empty()) return ClassTable::load(cfg.classes);
  const DatasetLayout layout{cfg.frames};
  if (!cfg.frames.empty() && fs::exists(layout.classes())) return ClassTable::load(layout.classes());
  return ClassTable::scannet20();
}

fs::path scene_path(const PipelineConfig& cfg) {
  return cfg.scene.empty() ? DatasetLayout{cfg.frames}.scene() : cfg.scene;
}

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw InvariantError(what + " path not set");
  if (!fs::is_regular_file(p)) throw IoError(what + " not found: " + p.string());
}

void require_dir(const fs::path& p, const std::string& what) {
  if (p.empty()) throw InvariantError(what + " path not set");
  if (!fs::is_directory(p)) throw IoError(what + " not found: " + p.string());
}

std::string percent(double v) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(1) << 100.0 * v;
  return o.str();
}

double round_to(double v, int digits) {
  const double s = std::pow(10.0, digits);
  return std::round(v * s) / s;
}

void write_stats(const FuseOutcome& r, const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  const auto& s = r.fusion.stats;
  f << "points=" << r.cloud.size() << "\nframes_used=" << s.frames_used << "\nfragment_points=" << s.fragment_points
    << "\nvotes=" << s.gated_votes << "\ncoverage=" << std::setprecision(6) << std::fixed
    << 1.0 - s.ignore_fraction << '\n';
  for (std::size_t c = 0; c < r.classes.size(); ++c)
    f << "votes[" << r.classes.name(static_cast<ClassId>(c)) << "]=" << s.votes_per_class[c] << '\n';
}

// Options shared by fuse and pipeline. Values are kept as text and applied
// through PipelineConfig::set after the config file, so flags win.
struct ConfigFlags {
  std::string config;
  std::vector<std::pair<CLI::Option*, std::string>> keyed;
  std::map<std::string, std::string> values;
  std::vector<std::pair<CLI::Option*, std::string>> switches;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "flat key = value configuration file");
    auto opt = [&](const std::string& flag, const std::string& key, const std::string& help) {
      keyed.emplace_back(cmd->add_option(flag, values[key], help), key);
    };
    opt("--seed", "seed", "random seed");
    opt("--frame-stride", "frame_stride", "fuse frames whose index is a multiple of this");
    opt("--pixel-stride", "pixel_stride", "pixel subsampling step");
    opt("--radius", "radius", "vote transfer radius in meters");
    opt("--strategy", "strategy", "prompt augmentation: none, random, max_distance, max_entropy");
    opt("--policy", "policy", "ignore policy: penalize or exclude");
    opt("--out", "out", "output directory");
    opt("--frames", "frames", "frame dataset directory");
    opt("--scene", "scene", "scene PLY (default <frames>/scene.ply)");
    opt("--classes", "classes", "class table file");
    opt("--masks", "mask_source", "mask source: directory, oracle, prompted-oracle");
    opt("--mask-dir", "mask_dir", "mask directory for --masks directory");
    opt("--noise-drop", "noise_drop", "oracle instance drop probability");
    opt("--noise-mislabel", "noise_mislabel", "oracle relabel probability");
    opt("--noise-morph", "noise_morph_radius", "oracle erosion (<0) / dilation (>0) radius");
    opt("--frame-list", "frame_list", "comma-separated frame indices, in processing order");
    opt("--synth-frames", "synth_frames", "frames to synthesize (pipeline --synth)");
    opt("--synth-objects", "synth_objects", "objects to synthesize (pipeline --synth)");
    opt("--fixtures", "fixtures", "two-lobe fixtures for the prompt benchmark");
    switches.emplace_back(cmd->add_flag("--skip-missing", "skip frames without a mask"), "skip_missing");
    switches.emplace_back(cmd->add_flag("--save-accumulator", "write the vote accumulator"), "save_accumulator");
  }

  PipelineConfig resolve() const {
    PipelineConfig cfg;
    if (!config.empty()) {
      if (!fs::is_regular_file(config)) throw IoError("config file not found: " + config);
      cfg = PipelineConfig::load(config);
    }
    try {
      for (const auto& [o, key] : keyed)
        if (o->count()) cfg.set(key, values.at(key));
      for (const auto& [o, key] : switches)
        if (o->count()) cfg.set(key, "true");
    } catch (const InvariantError& e) {
      throw UsageError(e.what());
    }
    cfg.validate();
    return cfg;
  }
};

void write_fuse_outputs(const PipelineConfig& cfg, const FuseOutcome& r, std::ostream& out) {
  fs::create_directories(cfg.out);
  save_scene(r.cloud, std::span<const ClassId>(r.fusion.labels), cfg.out / "fused.ply", r.classes);
  if (cfg.save_accumulator) r.fusion.accumulator.save(cfg.out / "accumulator.bin");
  write_stats(r, cfg.out / "fuse_stats.txt");
  const auto& s = r.fusion.stats;
  out << "fused " << s.frames_used << " frames, " << s.fragment_points << " fragment points, " << s.gated_votes
      << " votes\ncoverage " << percent(1.0 - s.ignore_fraction) << "%\n";
}

int cmd_synth(const SceneSpec& spec, int n_frames, const fs::path& out_dir, std::ostream& out) {
  const ClassTable classes = ClassTable::scannet20();
  const auto ds = emit_dataset(spec, n_frames, default_intrinsics(), out_dir, classes);
  out << "points " << ds.scene.cloud.size() << "\nframes " << ds.frame_indices.size() << "\nobjects "
      << ds.scene.objects.size() << '\n';
  std::vector<std::size_t> hist(classes.size(), 0);
  for (auto l : ds.scene.cloud.gt_labels) ++hist[l];
  for (std::size_t c = 0; c < hist.size(); ++c)
    if (hist[c]) out << "  " << classes.name(static_cast<ClassId>(c)) << ' ' << hist[c] << '\n';
  return 0;
}

Pixel parse_pixel(const std::string& s) {
  int u = 0, v = 0;
  char comma = 0;
  std::istringstream in(s);
  if (!(in >> u >> comma >> v) || comma != ',' || !in.eof()) throw UsageError("anchor must be 'u,v': " + s);
  return {u, v};
}

struct AugmentArgs {
  std::string image, mask, anchor, strategy = "max_entropy", gt, classes, out;
  std::uint64_t seed = 0;
};

int cmd_augment(const AugmentArgs& a, std::ostream& out) {
  const fs::path image_path = a.image, mask_path = a.mask;
  const std::string& anchor_text = a.anchor;
  const std::string& strategy_text = a.strategy;
  const std::uint64_t seed = a.seed;
  AugmentStrategy strategy;
  try {
    strategy = parse_strategy(strategy_text);
  } catch (const InvariantError& e) {
    throw UsageError(e.what());
  }
  if (strategy == AugmentStrategy::none) throw UsageError("strategy 'none' adds no point");
  const Pixel anchor = parse_pixel(anchor_text);
  const auto gray = read_gray_pgm(mask_path);
  BinaryMask mask(gray.width, gray.height);
  for (std::size_t i = 0; i < gray.size(); ++i) mask.values[i] = gray.values[i] != 0;
  if (!mask.in_bounds(anchor.u, anchor.v)) throw InvariantError("anchor outside the mask");
  std::optional<RgbImage> image;
  if (!image_path.empty()) {
    image = read_ppm(image_path);
    if (!image->same_shape(mask)) throw InvariantError("image and mask dimensions differ");
  }
  if (!a.out.empty() && a.gt.empty()) throw UsageError("--out needs --gt to segment with the augmented prompt");
  std::optional<LabelMask> gt;
  const ClassTable classes = a.classes.empty() ? ClassTable::scannet20() : ClassTable::load(a.classes);
  if (!a.gt.empty()) {
    gt = read_label_pgm(a.gt, classes);
    if (!gt->same_shape(mask)) throw InvariantError("ground-truth and mask dimensions differ");
  }
  const Pixel p = choose_augmented_point(strategy, image ? &*image : nullptr, mask, anchor, seed);
  out << '(' << p.u << ',' << p.v << ")\n";
  if (gt) {
    // Re-prompt the ground-truth oracle with the anchor and the augmented point.
    const ClassId cls = gt->at(anchor.u, anchor.v);
    const PromptedOracleSegmenter seg({{0, *gt}}, classes);
    PointPrompt prompt;
    prompt.positives = {{anchor, cls, PromptRole::positive}, {p, cls, PromptRole::positive}};
    const auto output = seg.query({0, image ? &*image : nullptr, prompt});
    const auto& best = output.best();
    Image<std::uint8_t> img(mask.width, mask.height);
    for (std::size_t i = 0; i < img.size(); ++i) img.values[i] = best.binary().values[i] ? 255 : 0;
    fs::create_directories(fs::absolute(a.out).parent_path());
    write_gray_pgm(img, a.out);
    out << "augmented mask " << best.binary().area() << " px, confidence " << best.confidence << '\n';
  }
  return 0;
}

std::vector<ClassId> labels_of(const ScenePointCloud& c, const fs::path& p) {
  if (!c.has_labels()) throw FormatError("no label property in " + p.string());
  return c.gt_labels;
}

int cmd_eval(const fs::path& pred_path, const fs::path& gt_path, const fs::path& classes_path,
             IgnorePolicy policy, const fs::path& out_dir, std::ostream& out) {
  const ClassTable classes = classes_path.empty() ? ClassTable::scannet20() : ClassTable::load(classes_path);
  const auto pred = load_scene(pred_path, classes);
  const auto gt = load_scene(gt_path, classes);
  if (pred.size() != gt.size())
    throw InvariantError("point count mismatch: " + std::to_string(pred.size()) + " vs " +
                         std::to_string(gt.size()));
  const auto report = evaluate(labels_of(pred, pred_path), labels_of(gt, gt_path), classes, policy);
  out << format_report(report, classes) << "miou " << percent(report.miou) << "\ncoverage "
      << percent(report.coverage) << '\n';
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream f(out_dir / "eval.txt");
    if (!f) throw IoError("cannot write " + (out_dir / "eval.txt").string());
    f << format_report_lines(report, classes);
  }
  return 0;
}

json report_json(const EvalReport& r, const ClassTable& classes) {
  json per = json::object();
  for (std::size_t c = 0; c < classes.size(); ++c)
    if (r.per_class_iou[c]) per[classes.name(static_cast<ClassId>(c))] = round_to(100 * *r.per_class_iou[c], 4);
  return {{"miou", round_to(100 * r.miou, 4)}, {"per_class_iou", per}};
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream o;
  o << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return o.str();
}

int cmd_pipeline(PipelineConfig cfg, std::ostream& out, std::ostream& err) {
  // Paths are checked before anything is written.
  if (cfg.synth) {
    if (cfg.frames.empty()) cfg.frames = cfg.out / "data";
  } else {
    require_dir(cfg.frames, "frame directory");
    require_file(scene_path(cfg), "scene");
  }
  if (!cfg.classes.empty()) require_file(cfg.classes, "class table");

  json stages = json::array();
  if (cfg.synth) {
    SceneSpec spec;
    spec.object_count = cfg.synth_objects;
    spec.density = cfg.synth_density;
    spec.rng_seed = cfg.seed;
    const auto ds = emit_dataset(spec, cfg.synth_frames, default_intrinsics(), cfg.frames, resolve_classes(cfg));
    out << "synth: " << ds.scene.cloud.size() << " points, " << ds.frame_indices.size() << " frames\n";
    stages.push_back("synth");
  }

  const FuseOutcome r = fuse_dataset(cfg, err);
  write_fuse_outputs(cfg, r, out);
  stages.push_back("fuse");

  const auto gt = load_scene(scene_path(cfg), r.classes);
  if (!gt.has_labels()) throw FormatError("scene has no ground-truth labels to evaluate against");
  const auto rep_pen = evaluate(r.fusion.labels, gt.gt_labels, r.classes, IgnorePolicy::penalize);
  const auto rep_exc = evaluate(r.fusion.labels, gt.gt_labels, r.classes, IgnorePolicy::exclude);
  const auto& rep = cfg.policy == IgnorePolicy::penalize ? rep_pen : rep_exc;
  out << format_report(rep, r.classes) << "miou " << percent(rep.miou) << " (" << to_string(cfg.policy)
      << ")\n";
  {
    std::ofstream f(cfg.out / "eval.txt");
    f << format_report_lines(rep, r.classes);
  }
  stages.push_back("eval");

  json manifest;
  manifest["timestamp"] = utc_now();
  json config = json::object();
  for (const auto& [k, v] : cfg.entries()) config[k] = v;
  manifest["config"] = config;
  manifest["versions"] = {{"csf", kVersion},
                          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                        "." + std::to_string(EIGEN_MINOR_VERSION)},
                          {"compiler", __VERSION__},
                          {"cxx_standard", __cplusplus}};
  manifest["stages"] = stages;
  const auto& s = r.fusion.stats;
  manifest["fusion"] = {{"points", r.cloud.size()},
                        {"frames_used", s.frames_used},
                        {"fragment_points", s.fragment_points},
                        {"votes", s.gated_votes}};
  manifest["results"] = {{"policy", to_string(cfg.policy)},
                         {"miou", round_to(100 * rep.miou, 4)},
                         {"coverage", round_to(100 * rep.coverage, 4)},
                         {"penalize", report_json(rep_pen, r.classes)},
                         {"exclude", report_json(rep_exc, r.classes)}};
  if (cfg.mask_source == MaskSource::prompted_oracle) {
    const auto fixtures = make_two_lobe_fixtures(cfg.fixtures, cfg.seed);
    json bench = json::object();
    bench["fixtures"] = cfg.fixtures;
    for (auto st : {AugmentStrategy::none, AugmentStrategy::random, AugmentStrategy::max_distance,
                    AugmentStrategy::max_entropy})
      bench["miou_" + to_string(st)] = round_to(100 * two_lobe_mean_iou(fixtures, st, cfg.seed), 4);
    bench["miou_augmented"] = bench["miou_" + to_string(cfg.strategy)];
    manifest["prompt_benchmark"] = bench;
  }
  std::ofstream f(cfg.out / "manifest.json");
  if (!f) throw IoError("cannot write manifest");
  f << manifest.dump(2) << '\n';
  out << "manifest " << (cfg.out / "manifest.json").string() << '\n';
  return 0;
}

}  // namespace

FuseOutcome fuse_dataset(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  require_dir(cfg.frames, "frame directory");
  const fs::path scene = scene_path(cfg);
  require_file(scene, "scene");
  if (!cfg.classes.empty()) require_file(cfg.classes, "class table");
  const DatasetLayout layout{cfg.frames};
  require_file(layout.intrinsics(), "intrinsics");

  FuseOutcome r{resolve_classes(cfg), {}, {{}, VoteAccumulator(0, 1), {}}, {}};
  const ClassTable& classes = r.classes;
  std::unique_ptr<MaskDirectorySegmenter> mask_dir;
  if (cfg.mask_source == MaskSource::directory) {
    require_dir(cfg.mask_dir, "mask directory");
    mask_dir = load_mask_directory(cfg.mask_dir, classes);
  }
  r.cloud = load_scene(scene, classes);

  std::vector<int> indices = cfg.frame_list.empty() ? layout.frame_indices() : cfg.frame_list;
  const int length = layout.sequence_length();
  if (cfg.frame_stride > length)
    log << "warning: frame_stride " << cfg.frame_stride << " exceeds the sequence length " << length
        << "; only frame 0 qualifies\n";
  std::erase_if(indices, [&](int i) { return i % cfg.frame_stride != 0; });
  if (indices.empty()) log << "warning: no frame selected, every point stays unlabeled\n";

  NoiseSpec noise = cfg.noise;
  noise.rng_seed = cfg.seed;
  std::vector<FrameRecord> frames;
  for (int i : indices) {
    FrameRecord f = load_frame(cfg.frames, i, classes);
    std::optional<LabelMask> mask;
    auto missing = [&](const std::string& why) {
      if (!cfg.skip_missing) throw MissingMaskError("frame " + std::to_string(i) + ": " + why);
      log << "warning: skipping frame " << i << ": " << why << '\n';
    };
    switch (cfg.mask_source) {
      case MaskSource::directory:
        if (mask_dir->has_frame(i)) mask = mask_dir->query({i, nullptr, std::nullopt}).best().labels();
        else missing("no mask in " + cfg.mask_dir.string());
        break;
      case MaskSource::oracle:
        if (f.mask) mask = OracleSegmenter({{i, *f.mask}}, classes, noise).query({i, nullptr, std::nullopt}).best().labels();
        else missing("no ground-truth label image");
        break;
      case MaskSource::prompted_oracle:
        if (!f.mask) {
          missing("no ground-truth label image");
          break;
        }
        if (cfg.strategy == AugmentStrategy::max_entropy && !f.color)
          throw InvariantError("frame " + std::to_string(i) + " has no color image for max_entropy");
        {
          const PromptedOracleSegmenter seg({{i, *f.mask}}, classes);
          mask = segment_frame_with_prompts(seg, i, f.color ? &*f.color : nullptr, *f.mask, classes.ignore_id(),
                                            cfg.strategy, mix_seed(cfg.seed, static_cast<std::uint64_t>(i)));
        }
        break;
    }
    if (!mask) continue;
    if (!mask->same_shape(f.depth))
      throw InvariantError("frame " + std::to_string(i) + ": mask dimensions do not match depth");
    f.mask = std::move(mask);
    f.color.reset();
    r.frames.push_back(i);
    frames.push_back(std::move(f));
  }

  FusionConfig fc{cfg.radius_m, cfg.pixel_stride, cfg.frame_stride};
  r.fusion = run_csf(r.cloud, frames, fc, classes);
  return r;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App cli{"Cumulative semantic fusion of 2D masks into 3D point-cloud pseudo-labels"};
  cli.require_subcommand(1);

  auto* synth = cli.add_subcommand("synth", "generate a synthetic room dataset");
  SceneSpec spec;
  int synth_frames = 30;
  std::string synth_out = "synth";
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--seed", spec.rng_seed, "random seed");
  synth->add_option("--objects", spec.object_count, "number of cuboid objects");
  synth->add_option("--frames", synth_frames, "number of orbit frames");
  synth->add_option("--density", spec.density, "surface samples per square meter");
  synth->add_option("--room-x", spec.room_x, "room size along x (m)");
  synth->add_option("--room-y", spec.room_y, "room size along y (m)");
  synth->add_option("--room-z", spec.room_z, "room height (m)");

  ConfigFlags fuse_flags, pipe_flags;
  auto* fuse = cli.add_subcommand("fuse", "fuse per-frame masks into point labels");
  fuse_flags.attach(fuse);
  auto* pipeline = cli.add_subcommand("pipeline", "synth (optional), fuse and eval in one run");
  pipe_flags.attach(pipeline);
  pipeline->add_flag("--synth", [&](std::int64_t) {}, "generate the dataset first");

  auto* augment = cli.add_subcommand("augment", "choose an augmentation prompt point");
  AugmentArgs aug;
  augment->add_option("--image", aug.image, "color image (PPM)");
  augment->add_option("--mask", aug.mask, "initial mask (PGM, nonzero = member)")->required();
  augment->add_option("--anchor", aug.anchor, "anchor pixel u,v")->required();
  augment->add_option("--strategy", aug.strategy, "random, max_distance or max_entropy");
  augment->add_option("--seed", aug.seed, "random seed");
  augment->add_option("--gt", aug.gt, "ground-truth label PGM for the prompted oracle");
  augment->add_option("--classes", aug.classes, "class table file");
  augment->add_option("--out", aug.out, "write the augmented mask (PGM)");

  auto* eval = cli.add_subcommand("eval", "score predicted labels against ground truth");
  std::string eval_pred, eval_gt, eval_classes, eval_policy = "penalize", eval_out;
  eval->add_option("pred", eval_pred, "predicted PLY")->required();
  eval->add_option("gt", eval_gt, "ground-truth PLY")->required();
  eval->add_option("--policy", eval_policy, "penalize or exclude");
  eval->add_option("--classes", eval_classes, "class table file");
  eval->add_option("--out", eval_out, "directory for eval.txt");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return cli.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(spec, synth_frames, synth_out, out);
    if (augment->parsed()) return cmd_augment(aug, out);
    if (eval->parsed()) {
      IgnorePolicy policy;
      try {
        policy = parse_policy(eval_policy);
      } catch (const InvariantError& e) {
        throw UsageError(e.what());
      }
      return cmd_eval(eval_pred, eval_gt, eval_classes, policy, eval_out, out);
    }
    if (fuse->parsed()) {
      const PipelineConfig cfg = fuse_flags.resolve();
      const FuseOutcome r = fuse_dataset(cfg, err);
      write_fuse_outputs(cfg, r, out);
      return 0;
    }
    if (pipeline->parsed()) {
      PipelineConfig cfg = pipe_flags.resolve();
      if (pipeline->count("--synth")) cfg.synth = true;
      return cmd_pipeline(cfg, out, err);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace csf::app
