#include "csf/segmenters.hpp"

#include <fstream>
#include <limits>
#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <sstream>

#include "csf/io.hpp"
#include "csf/rng.hpp"

namespace csf {

const SegmenterCandidate& SegmenterOutput::best() const {
  if (candidates.empty()) throw SegmenterError("segmenter returned no candidates");
  return candidates.front();
}

const SegmenterCandidate& SegmenterOutput::smallest() const {
  const SegmenterCandidate* out = nullptr;
  std::size_t best = 0;
  for (const auto& c : candidates) {
    const auto a = c.binary().area();
    if (!out || a < best) {
      out = &c;
      best = a;
    }
  }
  if (!out) throw SegmenterError("segmenter returned no candidates");
  return *out;
}

// ---- File-backed ----------------------------------------------------------

namespace {

std::optional<int> frame_of(const std::filesystem::path& p, const char* ext) {
  if (p.extension() != ext) return std::nullopt;
  const auto stem = p.stem().string();
  if (stem.empty() || stem.size() > 9 || !std::all_of(stem.begin(), stem.end(), ::isdigit)) return std::nullopt;
  return std::stoi(stem);
}

double read_confidence(const std::filesystem::path& p) {
  std::istringstream in(read_text_file(p));
  double c;
  if (!(in >> c) || !std::isfinite(c) || c < 0 || c > 1)
    throw FormatError("confidence file must start with a number in [0,1]: " + p.string());
  return c;
}

}  // namespace

MaskDirectorySegmenter::MaskDirectorySegmenter(std::filesystem::path dir, ClassTable classes)
    : dir_(std::move(dir)), classes_(std::move(classes)) {
  if (!std::filesystem::is_directory(dir_)) throw IoError("mask directory not found: " + dir_.string());
  for (const auto& e : std::filesystem::directory_iterator(dir_)) {
    if (auto f = frame_of(e.path(), ".pgm")) {
      read_label_pgm(e.path(), classes_);  // validates class ids
      frames_.push_back(*f);
    }
  }
  std::sort(frames_.begin(), frames_.end());
  for (int f : frames_) {
    const auto conf = dir_ / (std::to_string(f) + ".conf");
    if (std::filesystem::exists(conf)) confidence_[f] = read_confidence(conf);
  }
}

bool MaskDirectorySegmenter::has_frame(int index) const {
  return std::binary_search(frames_.begin(), frames_.end(), index);
}

SegmenterOutput MaskDirectorySegmenter::query(const SegmenterRequest& request) const {
  if (!has_frame(request.frame_index))
    throw MissingMaskError("no mask for frame " + std::to_string(request.frame_index) + " in " + dir_.string());
  auto mask = read_label_pgm(dir_ / (std::to_string(request.frame_index) + ".pgm"), classes_);
  if (request.image && !request.image->same_shape(mask))
    throw SegmenterError("mask dimensions do not match the image for frame " + std::to_string(request.frame_index));
  auto it = confidence_.find(request.frame_index);
  SegmenterOutput out;
  out.candidates.push_back({std::move(mask), it == confidence_.end() ? 1.0 : it->second});
  return out;
}

std::unique_ptr<MaskDirectorySegmenter> load_mask_directory(const std::filesystem::path& dir,
                                                            const ClassTable& classes) {
  return std::make_unique<MaskDirectorySegmenter>(dir, classes);
}

void write_mask_directory(const std::filesystem::path& dir, const std::map<int, LabelMask>& masks,
                          const ClassTable& classes, const std::map<int, double>& confidences) {
  std::filesystem::create_directories(dir);
  for (const auto& [f, m] : masks) write_label_pgm(m, dir / (std::to_string(f) + ".pgm"), classes);
  for (const auto& [f, c] : confidences) {
    std::ofstream out(dir / (std::to_string(f) + ".conf"));
    out.precision(17);
    out << c << '\n';
    if (!out) throw IoError("cannot write confidence for frame " + std::to_string(f));
  }
}

// ---- Instances and morphology -----------------------------------------------

std::vector<Instance> find_instances(const LabelMask& mask, ClassId ignore_id) {
  std::vector<Instance> out;
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<std::uint32_t> stack;
  const int w = mask.width, h = mask.height;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (seen[start] || mask.values[start] == ignore_id) continue;
    Instance inst{mask.values[start], {}};
    stack.assign(1, static_cast<std::uint32_t>(start));
    seen[start] = 1;
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      inst.pixels.push_back(i);
      const int u = static_cast<int>(i % w), v = static_cast<int>(i / w);
      auto visit = [&](int uu, int vv) {
        if (uu < 0 || vv < 0 || uu >= w || vv >= h) return;
        const auto j = static_cast<std::size_t>(vv) * w + uu;
        if (!seen[j] && mask.values[j] == inst.class_id) {
          seen[j] = 1;
          stack.push_back(static_cast<std::uint32_t>(j));
        }
      };
      visit(u - 1, v);
      visit(u + 1, v);
      visit(u, v - 1);
      visit(u, v + 1);
    }
    std::sort(inst.pixels.begin(), inst.pixels.end());
    out.push_back(std::move(inst));
  }
  return out;
}

BinaryMask morph(const BinaryMask& mask, int radius) {
  if (radius == 0) return mask;
  const int r = std::abs(radius);
  const bool erode = radius < 0;
  // Separable square window; windows are cropped at the image border.
  auto pass = [&](const BinaryMask& in, bool horizontal) {
    BinaryMask out(in.width, in.height);
    for (int v = 0; v < in.height; ++v)
      for (int u = 0; u < in.width; ++u) {
        bool acc = erode;
        for (int d = -r; d <= r; ++d) {
          const int uu = horizontal ? u + d : u, vv = horizontal ? v : v + d;
          if (!in.in_bounds(uu, vv)) continue;
          const bool m = in.at(uu, vv) != 0;
          acc = erode ? (acc && m) : (acc || m);
        }
        out.at(u, v) = acc;
      }
    return out;
  };
  return pass(pass(mask, true), false);
}

void NoiseSpec::validate() const {
  auto prob = [](double p) { return std::isfinite(p) && p >= 0 && p <= 1; };
  if (!prob(drop_instance_prob) || !prob(mislabel_prob)) throw InvariantError("noise probabilities must lie in [0,1]");
}

LabelMask apply_noise(const LabelMask& gt, const NoiseSpec& noise, int frame_index, const ClassTable& classes) {
  noise.validate();
  if (noise.is_zero()) return gt;
  const auto instances = find_instances(gt, classes.ignore_id());
  struct Survivor {
    std::size_t order;
    std::size_t area;
    ClassId cls;
    BinaryMask mask;
  };
  std::vector<Survivor> kept;
  for (std::size_t k = 0; k < instances.size(); ++k) {
    const auto& inst = instances[k];
    std::mt19937_64 rng(mix_seed(noise.rng_seed, static_cast<std::uint64_t>(frame_index), k));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double drop = unit(rng), relabel = unit(rng);
    if (drop < noise.drop_instance_prob) continue;
    ClassId cls = inst.class_id;
    if (relabel < noise.mislabel_prob && classes.size() > 1) {
      std::uniform_int_distribution<int> other(0, static_cast<int>(classes.size()) - 2);
      const int c = other(rng);
      cls = static_cast<ClassId>(c >= inst.class_id ? c + 1 : c);
    }
    BinaryMask m(gt.width, gt.height);
    for (auto i : inst.pixels) m.values[i] = 1;
    kept.push_back({k, inst.pixels.size(), cls, morph(m, noise.morph_radius_px)});
  }
  // Larger instances are painted first so dilated small ones stay visible.
  std::stable_sort(kept.begin(), kept.end(), [](const Survivor& a, const Survivor& b) { return a.area > b.area; });
  LabelMask out(gt.width, gt.height, classes.ignore_id());
  for (const auto& s : kept)
    for (std::size_t i = 0; i < out.size(); ++i)
      if (s.mask.values[i]) out.values[i] = s.cls;
  return out;
}

// ---- Oracles --------------------------------------------------------------

namespace {

const LabelMask& frame_gt(const std::map<int, LabelMask>& gt, int frame) {
  auto it = gt.find(frame);
  if (it == gt.end()) throw MissingMaskError("no ground truth for frame " + std::to_string(frame));
  return it->second;
}

void check_prompt(const PointPrompt& prompt, const LabelMask& gt, const RgbImage* image) {
  if (prompt.positives.empty()) throw SegmenterError("prompt has no positive point");
  if (image && !image->same_shape(gt)) throw SegmenterError("image dimensions do not match the frame");
  auto in = [&](const PromptPoint& p) { return gt.in_bounds(p.pixel.u, p.pixel.v); };
  if (!std::all_of(prompt.positives.begin(), prompt.positives.end(), in) ||
      !std::all_of(prompt.negatives.begin(), prompt.negatives.end(), in))
    throw SegmenterError("prompt point outside the image");
}

// Connected component of `gt` containing `seed`, restricted to pixels accepted by `allow`.
template <typename Allow>
BinaryMask flood(const LabelMask& gt, Pixel seed, Allow allow) {
  BinaryMask out(gt.width, gt.height);
  const ClassId cls = gt.at(seed.u, seed.v);
  std::vector<Pixel> stack{seed};
  out.at(seed.u, seed.v) = 1;
  while (!stack.empty()) {
    const Pixel p = stack.back();
    stack.pop_back();
    for (const Pixel q : {Pixel{p.u - 1, p.v}, Pixel{p.u + 1, p.v}, Pixel{p.u, p.v - 1}, Pixel{p.u, p.v + 1}}) {
      if (!gt.in_bounds(q.u, q.v) || out.at(q.u, q.v) || gt.at(q.u, q.v) != cls || !allow(q)) continue;
      out.at(q.u, q.v) = 1;
      stack.push_back(q);
    }
  }
  return out;
}

bool contains_any(const BinaryMask& m, const std::vector<PromptPoint>& pts) {
  return std::any_of(pts.begin(), pts.end(), [&](const PromptPoint& p) { return m.contains(p.pixel); });
}

SegmenterOutput finish(std::vector<SegmenterCandidate> cands, const PointPrompt& prompt) {
  std::erase_if(cands, [&](const SegmenterCandidate& c) { return contains_any(c.binary(), prompt.negatives); });
  if (cands.empty()) throw SegmenterError("every candidate contains a negative point");
  std::stable_sort(cands.begin(), cands.end(),
                   [](const SegmenterCandidate& a, const SegmenterCandidate& b) { return a.confidence > b.confidence; });
  return {std::move(cands)};
}

BinaryMask instance_at(const LabelMask& gt, Pixel p, ClassId ignore_id) {
  if (gt.at(p.u, p.v) == ignore_id) throw SegmenterError("prompt on an unlabeled pixel");
  return flood(gt, p, [](Pixel) { return true; });
}

}  // namespace

OracleSegmenter::OracleSegmenter(std::map<int, LabelMask> gt, ClassTable classes, NoiseSpec noise)
    : gt_(std::move(gt)), classes_(std::move(classes)), noise_(noise) {
  noise_.validate();
}

SegmenterOutput OracleSegmenter::query(const SegmenterRequest& request) const {
  const LabelMask& gt = frame_gt(gt_, request.frame_index);
  SegmenterOutput out;
  if (request.prompt) {
    check_prompt(*request.prompt, gt, request.image);
    auto inst = instance_at(gt, request.prompt->positives.front().pixel, classes_.ignore_id());
    return finish({{std::move(inst), 1.0}}, *request.prompt);
  }
  if (request.image && !request.image->same_shape(gt)) throw SegmenterError("image dimensions do not match the frame");
  out.candidates.push_back({apply_noise(gt, noise_, request.frame_index, classes_), 1.0});
  return out;
}

PromptedOracleSegmenter::PromptedOracleSegmenter(std::map<int, LabelMask> gt, ClassTable classes,
                                                 GranularityMode mode, double band_fraction)
    : gt_(std::move(gt)), classes_(std::move(classes)), mode_(mode), band_fraction_(band_fraction) {
  if (!(band_fraction >= 0 && band_fraction < 0.5)) throw InvariantError("band fraction must lie in [0, 0.5)");
}

SegmenterOutput PromptedOracleSegmenter::query(const SegmenterRequest& request) const {
  if (!request.prompt) throw SegmenterError("prompted segmenter needs a point prompt");
  const PointPrompt& prompt = *request.prompt;
  const LabelMask& gt = frame_gt(gt_, request.frame_index);
  check_prompt(prompt, gt, request.image);
  const Pixel p = prompt.positives.front().pixel;
  BinaryMask inst = instance_at(gt, p, classes_.ignore_id());
  if (mode_ == GranularityMode::exact) return finish({{std::move(inst), 1.0}}, prompt);

  // Principal axis of the instance from its pixel covariance.
  const auto members = inst.pixels();
  double mu = 0, mv = 0;
  for (auto q : members) {
    mu += q.u;
    mv += q.v;
  }
  mu /= members.size();
  mv /= members.size();
  double suu = 0, suv = 0, svv = 0;
  for (auto q : members) {
    suu += (q.u - mu) * (q.u - mu);
    suv += (q.u - mu) * (q.v - mv);
    svv += (q.v - mv) * (q.v - mv);
  }
  const double theta = 0.5 * std::atan2(2 * suv, suu - svv);
  const double au = std::cos(theta), av = std::sin(theta);
  auto along = [&](Pixel q) { return (q.u - mu) * au + (q.v - mv) * av; };
  double lo = 0, hi = 0;
  for (auto q : members) {
    lo = std::min(lo, along(q));
    hi = std::max(hi, along(q));
  }
  const double band = band_fraction_ * (hi - lo);
  const double side = along(p) >= 0 ? 1.0 : -1.0;

  BinaryMask lobe = flood(gt, p, [&](Pixel q) { return inst.contains(q) && side * along(q) >= -band; });

  // Nearest other instance of the same class, by centroid distance.
  const auto cls = gt.at(p.u, p.v);
  BinaryMask merged = inst;
  {
    double best = std::numeric_limits<double>::infinity();
    const Instance* nearest = nullptr;
    const auto all = find_instances(gt, classes_.ignore_id());
    for (const auto& other : all) {
      if (other.class_id != cls || inst.values[other.pixels.front()]) continue;
      double cu = 0, cv = 0;
      for (auto i : other.pixels) {
        cu += static_cast<double>(i % gt.width);
        cv += static_cast<double>(i / gt.width);
      }
      cu /= other.pixels.size();
      cv /= other.pixels.size();
      const double d = (cu - mu) * (cu - mu) + (cv - mv) * (cv - mv);
      if (d < best) {
        best = d;
        nearest = &other;
      }
    }
    if (nearest)
      for (auto i : nearest->pixels) merged.values[i] = 1;
  }

  double conf_lobe = kLobeConfidence, conf_inst = kInstanceConfidence, conf_merged = kMergedConfidence;
  for (std::size_t k = 1; k < prompt.positives.size(); ++k) {
    const Pixel q = prompt.positives[k].pixel;
    if (inst.contains(q)) {
      if (side * along(q) < 0) conf_inst = kPromotedConfidence;
    } else if (merged.contains(q)) {
      conf_merged = kPromotedConfidence;
    }
  }
  std::vector<SegmenterCandidate> cands;
  cands.push_back({std::move(lobe), conf_lobe});
  cands.push_back({std::move(inst), conf_inst});
  cands.push_back({std::move(merged), conf_merged});
  return finish(std::move(cands), prompt);
}

}  // namespace csf
