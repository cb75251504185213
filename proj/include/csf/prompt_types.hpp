#pragma once

#include <cstdint>
#include <vector>

#include "csf/scene_model.hpp"

namespace csf {

struct Pixel {
  int u = 0;
  int v = 0;
  bool operator==(const Pixel&) const = default;
  /// Row-major order: smaller v first, then smaller u.
  bool operator<(const Pixel& o) const { return v != o.v ? v < o.v : u < o.u; }
};

enum class PromptRole { positive, negative };

struct PromptPoint {
  Pixel pixel;
  ClassId class_id = 0;
  PromptRole role = PromptRole::positive;
  bool operator==(const PromptPoint&) const = default;
};

/// Points handed to a prompted segmenter for one target.
struct PointPrompt {
  std::vector<PromptPoint> positives;
  std::vector<PromptPoint> negatives;
};

/// Member pixels are 1, others 0.
struct BinaryMask : Image<std::uint8_t> {
  using Image::Image;
  BinaryMask() = default;
  BinaryMask(int w, int h) : Image(w, h, 0) {}

  bool contains(Pixel p) const { return in_bounds(p.u, p.v) && at(p.u, p.v) != 0; }
  std::size_t area() const;
  bool empty() const { return area() == 0; }
  /// Members in row-major order.
  std::vector<Pixel> pixels() const;

  static BinaryMask of_class(const LabelMask& mask, ClassId cls);
};

/// |a & b| / |a | b|; 1.0 when both are empty.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

}  // namespace csf
