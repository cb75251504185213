#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "csf/prompt_types.hpp"
#include "csf/segmenters.hpp"

namespace csf {

/// One annotated pixel per class present in a frame.
using PromptSet = std::map<ClassId, Pixel>;

/// Samples one pixel uniformly at random for every class present in `gt`.
/// Throws InvariantError when the mask has no labeled pixel.
PromptSet sample_sparse_prompts(const LabelMask& gt, ClassId ignore_id, std::uint64_t rng_seed);

/// The target's pixel is the positive; every other annotated pixel is a negative.
PointPrompt assemble_class_prompt(const PromptSet& ps, ClassId target);

enum class AugmentStrategy { none, random, max_distance, max_entropy };

AugmentStrategy parse_strategy(const std::string& s);
std::string to_string(AugmentStrategy s);

/// Uniformly random member pixel.
Pixel augment_random(const BinaryMask& initial, std::uint64_t rng_seed);

/// Member pixel farthest from `anchor`; ties go to the first in row-major order.
Pixel augment_max_distance(const BinaryMask& initial, Pixel anchor);

inline constexpr int kEntropyWindow = 9;

/// Shannon entropy (bits) of the joint 3-bit-per-channel color histogram
/// (512 bins) over a window centered at `center`, cropped to the image.
double region_entropy(const RgbImage& image, Pixel center, int window = kEntropyWindow);

/// Member pixel maximizing |H(candidate) - H(anchor)|; ties row-major.
Pixel augment_max_entropy(const RgbImage& image, const BinaryMask& initial, Pixel anchor,
                          int window = kEntropyWindow);

/// Chooses the augmentation pixel for a strategy other than `none`.
Pixel choose_augmented_point(AugmentStrategy strategy, const RgbImage* image, const BinaryMask& initial,
                             Pixel anchor, std::uint64_t rng_seed);

/// Prompts the segmenter for one target class. With a strategy other than
/// `none`, the smallest returned candidate seeds a second positive point and
/// the segmenter is queried again; the highest-confidence mask is returned.
BinaryMask run_augmented_prompt(const Segmenter& segmenter, int frame_index, const RgbImage* image,
                                const PromptSet& ps, ClassId target, AugmentStrategy strategy,
                                std::uint64_t rng_seed);

/// Segments a whole frame from sparse point labels: samples one prompt per
/// class from `gt`, runs the (augmented) prompt for each class and composes
/// the masks, larger masks first so smaller ones stay on top.
LabelMask segment_frame_with_prompts(const Segmenter& segmenter, int frame_index, const RgbImage* image,
                                     const LabelMask& gt, ClassId ignore_id, AugmentStrategy strategy,
                                     std::uint64_t rng_seed);

}  // namespace csf
