#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csf/scene_model.hpp"

namespace csf {

/// How ignore predictions on labeled ground truth are scored.
enum class IgnorePolicy {
  penalize,  // counted as a false negative of the GT class
  exclude    // point dropped from scoring
};

IgnorePolicy parse_policy(const std::string& s);
std::string to_string(IgnorePolicy p);

/// Per-class outcome counts over the scored points.
struct ClassCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0;
};

/// TP / (TP + FP + FN); nullopt when the class has no GT support (TP + FN = 0).
std::optional<double> class_iou(const ClassCounts& c);

/// Arithmetic mean of the defined values (0 when none is defined).
double mean_iou(const std::vector<std::optional<double>>& ious);

struct EvalReport {
  std::size_t n_classes = 0;
  /// n_classes rows (GT) x (n_classes + 1) columns (prediction, last = ignore).
  std::vector<std::uint64_t> confusion;
  std::vector<std::optional<double>> per_class_iou;  // nullopt: no GT support
  double miou = 0;
  /// Fraction of labeled-GT points whose prediction is not ignore.
  double coverage = 0;
  std::uint64_t scored_points = 0;

  std::uint64_t cell(std::size_t gt, std::size_t pred) const { return confusion[gt * (n_classes + 1) + pred]; }
  ClassCounts counts(std::size_t cls) const;
};

/// Per-point comparison. GT points carrying the ignore id are never scored.
/// Throws InvariantError on a length mismatch or out-of-range ids.
EvalReport evaluate(std::span<const ClassId> pred, std::span<const ClassId> gt, const ClassTable& classes,
                    IgnorePolicy policy = IgnorePolicy::penalize);

/// Table with one column per class plus "avg"; IoU as percentages with one
/// decimal, "—" for classes without support.
std::string format_report(const EvalReport& report, const ClassTable& classes);

/// Parses a table produced by format_report: class name -> percentage
/// (nullopt for "—"). The mean is stored under "avg".
std::map<std::string, std::optional<double>> parse_report(const std::string& text);

/// One `name=iou` line per class (iou in [0,1], "nan" when undefined), then `miou=` and `coverage=`.
std::string format_report_lines(const EvalReport& report, const ClassTable& classes);

}  // namespace csf
