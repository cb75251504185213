#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "csf/prompt_types.hpp"
#include "csf/scene_model.hpp"

namespace csf {

class SegmenterError : public Error {
 public:
  using Error::Error;
};

/// Requested frame has no mask available.
class MissingMaskError : public SegmenterError {
 public:
  using SegmenterError::SegmenterError;
};

/// A query is either a whole-frame semantic request (zero-shot, text classes)
/// or a point-prompted request for one target.
struct SegmenterRequest {
  int frame_index = 0;
  const RgbImage* image = nullptr;
  std::optional<PointPrompt> prompt;
};

struct SegmenterCandidate {
  std::variant<BinaryMask, LabelMask> mask;
  double confidence = 1.0;

  const BinaryMask& binary() const { return std::get<BinaryMask>(mask); }
  const LabelMask& labels() const { return std::get<LabelMask>(mask); }
};

/// Candidates in descending confidence order.
struct SegmenterOutput {
  std::vector<SegmenterCandidate> candidates;

  const SegmenterCandidate& best() const;
  /// Binary candidate with the fewest pixels (first one on ties).
  const SegmenterCandidate& smallest() const;
};

class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual SegmenterOutput query(const SegmenterRequest& request) const = 0;
};

// ---- File-backed ----------------------------------------------------------

/// Serves `<dir>/<frame>.pgm` label masks, with the confidence taken from the
/// first line of `<dir>/<frame>.conf` when present.
class MaskDirectorySegmenter : public Segmenter {
 public:
  MaskDirectorySegmenter(std::filesystem::path dir, ClassTable classes);

  SegmenterOutput query(const SegmenterRequest& request) const override;
  const std::vector<int>& frames() const { return frames_; }
  bool has_frame(int index) const;

 private:
  std::filesystem::path dir_;
  ClassTable classes_;
  std::vector<int> frames_;
  std::map<int, double> confidence_;
};

/// Scans and validates a mask directory; throws on any malformed mask.
std::unique_ptr<MaskDirectorySegmenter> load_mask_directory(const std::filesystem::path& dir,
                                                            const ClassTable& classes);

/// Writes masks (and optional confidences) in the layout load_mask_directory reads.
void write_mask_directory(const std::filesystem::path& dir, const std::map<int, LabelMask>& masks,
                          const ClassTable& classes, const std::map<int, double>& confidences = {});

// ---- Ground-truth oracles -------------------------------------------------

struct NoiseSpec {
  int morph_radius_px = 0;  // < 0 erodes, > 0 dilates
  double drop_instance_prob = 0;
  double mislabel_prob = 0;
  std::uint64_t rng_seed = 0;

  void validate() const;
  bool is_zero() const { return morph_radius_px == 0 && drop_instance_prob == 0 && mislabel_prob == 0; }
};

/// One connected (4-neighbour) region of a single class in a label mask.
struct Instance {
  ClassId class_id = 0;
  std::vector<std::uint32_t> pixels;  // row-major pixel indices, ascending
};

/// Connected components in row-major discovery order. Ignore pixels are skipped.
std::vector<Instance> find_instances(const LabelMask& mask, ClassId ignore_id);

/// Square-window erosion (radius < 0) or dilation (radius > 0).
BinaryMask morph(const BinaryMask& mask, int radius);

/// Applies per-instance drop, morphology and relabelling to a ground-truth mask.
/// Deterministic in (mask, noise, frame_index).
LabelMask apply_noise(const LabelMask& gt, const NoiseSpec& noise, int frame_index, const ClassTable& classes);

/// Zero-shot style oracle: returns the (optionally corrupted) ground-truth mask.
class OracleSegmenter : public Segmenter {
 public:
  OracleSegmenter(std::map<int, LabelMask> gt, ClassTable classes, NoiseSpec noise = {});
  SegmenterOutput query(const SegmenterRequest& request) const override;

 private:
  std::map<int, LabelMask> gt_;
  ClassTable classes_;
  NoiseSpec noise_;
};

enum class GranularityMode {
  exact,       // the ground-truth instance, confidence 1.0
  three_level  // sub-lobe / instance / merged instance
};

/// Point-prompted oracle simulating the part/whole ambiguity of a promptable
/// segmenter. For a positive prompt at p on instance I it proposes
///   (i)   the connected part of I on p's side of I's principal-axis split,
///         extended by a band of `band_fraction` of I's length past the split (0.5),
///   (ii)  I itself (0.4),
///   (iii) I merged with its nearest same-class instance (0.3).
/// A further positive on the other side of the split promotes (ii), or (iii)
/// when it lies outside I but inside the merge, to confidence 0.9. Candidates
/// containing a negative point are suppressed.
class PromptedOracleSegmenter : public Segmenter {
 public:
  static constexpr double kLobeConfidence = 0.5;
  static constexpr double kInstanceConfidence = 0.4;
  static constexpr double kMergedConfidence = 0.3;
  static constexpr double kPromotedConfidence = 0.9;

  PromptedOracleSegmenter(std::map<int, LabelMask> gt, ClassTable classes,
                          GranularityMode mode = GranularityMode::three_level, double band_fraction = 0.15);
  SegmenterOutput query(const SegmenterRequest& request) const override;

 private:
  std::map<int, LabelMask> gt_;
  ClassTable classes_;
  GranularityMode mode_;
  double band_fraction_;
};

}  // namespace csf
