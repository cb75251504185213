#include "csf/prompting.hpp"

#include <omp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "csf/rng.hpp"

namespace csf {

std::size_t BinaryMask::area() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](auto v) { return v != 0; }));
}

std::vector<Pixel> BinaryMask::pixels() const {
  std::vector<Pixel> out;
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u)
      if (at(u, v)) out.push_back({u, v});
  return out;
}

BinaryMask BinaryMask::of_class(const LabelMask& mask, ClassId cls) {
  BinaryMask b(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.size(); ++i) b.values[i] = mask.values[i] == cls;
  return b;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw InvariantError("mask dimensions differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a.values[i] != 0, y = b.values[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

PromptSet sample_sparse_prompts(const LabelMask& gt, ClassId ignore_id, std::uint64_t rng_seed) {
  std::map<ClassId, std::vector<std::uint32_t>> by_class;
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (gt.values[i] != ignore_id) by_class[gt.values[i]].push_back(static_cast<std::uint32_t>(i));
  if (by_class.empty()) throw InvariantError("mask has no labeled pixel to prompt");
  PromptSet ps;
  for (const auto& [cls, pix] : by_class) {
    std::mt19937_64 rng(mix_seed(rng_seed, cls));
    std::uniform_int_distribution<std::size_t> pick(0, pix.size() - 1);
    const auto i = pix[pick(rng)];
    ps[cls] = {static_cast<int>(i % gt.width), static_cast<int>(i / gt.width)};
  }
  return ps;
}

PointPrompt assemble_class_prompt(const PromptSet& ps, ClassId target) {
  auto it = ps.find(target);
  if (it == ps.end()) throw InvariantError("target class " + std::to_string(target) + " has no annotated point");
  PointPrompt p;
  p.positives.push_back({it->second, target, PromptRole::positive});
  for (const auto& [cls, px] : ps)
    if (cls != target) p.negatives.push_back({px, cls, PromptRole::negative});
  return p;
}

AugmentStrategy parse_strategy(const std::string& s) {
  if (s == "none") return AugmentStrategy::none;
  if (s == "random") return AugmentStrategy::random;
  if (s == "max_distance") return AugmentStrategy::max_distance;
  if (s == "max_entropy") return AugmentStrategy::max_entropy;
  throw InvariantError("unknown augmentation strategy: " + s);
}

std::string to_string(AugmentStrategy s) {
  switch (s) {
    case AugmentStrategy::none: return "none";
    case AugmentStrategy::random: return "random";
    case AugmentStrategy::max_distance: return "max_distance";
    case AugmentStrategy::max_entropy: return "max_entropy";
  }
  return "none";
}

Pixel augment_random(const BinaryMask& initial, std::uint64_t rng_seed) {
  const auto members = initial.pixels();
  if (members.empty()) throw InvariantError("initial mask is empty");
  std::mt19937_64 rng(rng_seed);
  std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
  return members[pick(rng)];
}

namespace {

// Parallel argmax over mask members. Higher score wins; equal scores keep the
// lower row-major index, so the result does not depend on the thread count.
template <typename Score, typename ScoreFn>
Pixel argmax_members(const BinaryMask& mask, ScoreFn score) {
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t best_idx = kNone;
  Score best_score{};
  const auto n = static_cast<std::ptrdiff_t>(mask.size());
#pragma omp parallel
  {
    std::size_t idx = kNone;
    Score sc{};
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      if (!mask.values[i]) continue;
      const Score s = score(Pixel{static_cast<int>(i % mask.width), static_cast<int>(i / mask.width)});
      if (idx == kNone || s > sc) {
        sc = s;
        idx = static_cast<std::size_t>(i);
      }
    }
#pragma omp critical(csf_argmax_merge)
    if (idx != kNone && (best_idx == kNone || sc > best_score || (sc == best_score && idx < best_idx))) {
      best_score = sc;
      best_idx = idx;
    }
  }
  if (best_idx == kNone) throw InvariantError("initial mask is empty");
  return {static_cast<int>(best_idx % mask.width), static_cast<int>(best_idx / mask.width)};
}

}  // namespace

Pixel augment_max_distance(const BinaryMask& initial, Pixel anchor) {
  if (!initial.in_bounds(anchor.u, anchor.v)) throw InvariantError("anchor outside the image");
  return argmax_members<std::int64_t>(initial, [&](Pixel p) {
    const std::int64_t du = p.u - anchor.u, dv = p.v - anchor.v;
    return du * du + dv * dv;
  });
}

double region_entropy(const RgbImage& image, Pixel center, int window) {
  if (!image.in_bounds(center.u, center.v)) throw InvariantError("entropy center outside the image");
  if (window < 1) throw InvariantError("entropy window must be >= 1");
  const int r = window / 2;
  std::array<std::uint16_t, 512> hist{};
  int n = 0;
  for (int v = std::max(0, center.v - r); v <= std::min(image.height - 1, center.v + r); ++v)
    for (int u = std::max(0, center.u - r); u <= std::min(image.width - 1, center.u + r); ++u) {
      const Rgb c = image.at(u, v);
      ++hist[((c.r >> 5) << 6) | ((c.g >> 5) << 3) | (c.b >> 5)];
      ++n;
    }
  // Summing over sorted counts makes the value a function of the count
  // multiset alone, hence exactly invariant to pixel order and bin identity.
  std::array<std::uint16_t, 512> counts;
  std::size_t k = 0;
  for (auto c : hist)
    if (c) counts[k++] = c;
  std::sort(counts.begin(), counts.begin() + k);
  double h = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double p = static_cast<double>(counts[i]) / n;
    h -= p * std::log2(p);
  }
  return h;
}

Pixel augment_max_entropy(const RgbImage& image, const BinaryMask& initial, Pixel anchor, int window) {
  if (!image.same_shape(initial)) throw InvariantError("image and mask dimensions differ");
  const double anchor_h = region_entropy(image, anchor, window);
  return argmax_members<double>(initial,
                                [&](Pixel p) { return std::abs(region_entropy(image, p, window) - anchor_h); });
}

Pixel choose_augmented_point(AugmentStrategy strategy, const RgbImage* image, const BinaryMask& initial,
                             Pixel anchor, std::uint64_t rng_seed) {
  switch (strategy) {
    case AugmentStrategy::random: return augment_random(initial, rng_seed);
    case AugmentStrategy::max_distance: return augment_max_distance(initial, anchor);
    case AugmentStrategy::max_entropy:
      if (!image) throw InvariantError("max_entropy augmentation needs a color image");
      return augment_max_entropy(*image, initial, anchor);
    case AugmentStrategy::none: break;
  }
  throw InvariantError("no augmentation point for strategy 'none'");
}

BinaryMask run_augmented_prompt(const Segmenter& segmenter, int frame_index, const RgbImage* image,
                                const PromptSet& ps, ClassId target, AugmentStrategy strategy,
                                std::uint64_t rng_seed) {
  PointPrompt prompt = assemble_class_prompt(ps, target);
  const auto base = segmenter.query({frame_index, image, prompt});
  const BinaryMask& best = base.best().binary();
  if (strategy == AugmentStrategy::none) return best;

  const BinaryMask& initial = base.smallest().binary();
  if (initial.empty()) return best;
  const Pixel anchor = prompt.positives.front().pixel;
  const Pixel extra = choose_augmented_point(strategy, image, initial, anchor, rng_seed);
  prompt.positives.push_back({extra, target, PromptRole::positive});
  return segmenter.query({frame_index, image, prompt}).best().binary();
}

LabelMask segment_frame_with_prompts(const Segmenter& segmenter, int frame_index, const RgbImage* image,
                                     const LabelMask& gt, ClassId ignore_id, AugmentStrategy strategy,
                                     std::uint64_t rng_seed) {
  const PromptSet ps = sample_sparse_prompts(gt, ignore_id, rng_seed);
  struct Piece {
    ClassId cls;
    BinaryMask mask;
    std::size_t area;
  };
  std::vector<Piece> pieces;
  for (const auto& [cls, px] : ps) {
    auto m = run_augmented_prompt(segmenter, frame_index, image, ps, cls, strategy, mix_seed(rng_seed, cls));
    const auto a = m.area();
    pieces.push_back({cls, std::move(m), a});
  }
  std::stable_sort(pieces.begin(), pieces.end(), [](const Piece& a, const Piece& b) { return a.area > b.area; });
  LabelMask out(gt.width, gt.height, ignore_id);
  for (const auto& p : pieces)
    for (std::size_t i = 0; i < out.size(); ++i)
      if (p.mask.values[i]) out.values[i] = p.cls;
  return out;
}

}  // namespace csf
