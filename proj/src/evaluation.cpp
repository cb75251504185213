#include "csf/evaluation.hpp"

#include <cstdio>
#include <sstream>

namespace csf {

namespace {
constexpr const char* kUndefined = "\xE2\x80\x94";  // em dash glyph used in the table
}

IgnorePolicy parse_policy(const std::string& s) {
  if (s == "penalize") return IgnorePolicy::penalize;
  if (s == "exclude") return IgnorePolicy::exclude;
  throw InvariantError("unknown ignore policy: " + s);
}

std::string to_string(IgnorePolicy p) { return p == IgnorePolicy::penalize ? "penalize" : "exclude"; }

std::optional<double> class_iou(const ClassCounts& c) {
  if (c.tp + c.fn == 0) return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp + c.fn);
}

double mean_iou(const std::vector<std::optional<double>>& ious) {
  double sum = 0;
  int n = 0;
  for (const auto& v : ious)
    if (v) {
      sum += *v;
      ++n;
    }
  return n ? sum / n : 0.0;
}

ClassCounts EvalReport::counts(std::size_t cls) const {
  ClassCounts c;
  c.tp = cell(cls, cls);
  for (std::size_t p = 0; p <= n_classes; ++p)
    if (p != cls) c.fn += cell(cls, p);
  for (std::size_t g = 0; g < n_classes; ++g)
    if (g != cls) c.fp += cell(g, cls);
  return c;
}

EvalReport evaluate(std::span<const ClassId> pred, std::span<const ClassId> gt, const ClassTable& classes,
                    IgnorePolicy policy) {
  if (pred.size() != gt.size())
    throw InvariantError("prediction has " + std::to_string(pred.size()) + " points, ground truth " +
                         std::to_string(gt.size()));
  const std::size_t m = classes.size();
  const ClassId ign = classes.ignore_id();
  const std::size_t cols = m + 1;
  EvalReport r;
  r.n_classes = m;
  r.confusion.assign(m * cols, 0);

  const auto n = static_cast<std::ptrdiff_t>(gt.size());
  bool bad = false;
  std::uint64_t labeled = 0, covered = 0;
#pragma omp parallel
  {
    std::vector<std::uint64_t> local(m * cols, 0);
    std::uint64_t lab = 0, cov = 0;
    bool lbad = false;
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const ClassId g = gt[i], p = pred[i];
      if (g > ign || p > ign) {
        lbad = true;
        continue;
      }
      if (g == ign) continue;
      ++lab;
      if (p != ign) ++cov;
      else if (policy == IgnorePolicy::exclude) continue;
      ++local[g * cols + p];
    }
#pragma omp critical(csf_confusion_merge)
    {
      for (std::size_t k = 0; k < local.size(); ++k) r.confusion[k] += local[k];
      labeled += lab;
      covered += cov;
      bad = bad || lbad;
    }
  }
  if (bad) throw InvariantError("label id out of range");

  r.coverage = labeled ? static_cast<double>(covered) / labeled : 0.0;
  r.per_class_iou.resize(m);
  for (std::size_t c = 0; c < m; ++c) {
    const auto k = r.counts(c);
    r.scored_points += k.tp + k.fn;
    r.per_class_iou[c] = class_iou(k);
  }
  r.miou = mean_iou(r.per_class_iou);
  return r;
}

namespace {

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

// Class names may contain spaces; the table uses '|' separators.
std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, '|')) {
    const auto b = cell.find_first_not_of(' ');
    const auto e = cell.find_last_not_of(' ');
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

std::string format_report(const EvalReport& report, const ClassTable& classes) {
  if (report.n_classes != classes.size()) throw InvariantError("report does not match the class table");
  std::vector<std::string> head, vals;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    head.push_back(classes.name(static_cast<ClassId>(c)));
    vals.push_back(report.per_class_iou[c] ? percent(*report.per_class_iou[c]) : kUndefined);
  }
  head.push_back("avg");
  vals.push_back(percent(report.miou));
  std::string h = "|", v = "|";
  for (std::size_t i = 0; i < head.size(); ++i) {
    const bool dash = vals[i] == kUndefined;
    const std::size_t vw = dash ? 1 : vals[i].size();
    const std::size_t w = std::max(head[i].size(), vw);
    h += " " + head[i] + std::string(w - head[i].size(), ' ') + " |";
    v += " " + std::string(w - vw, ' ') + vals[i] + " |";
  }
  return h + "\n" + v + "\n";
}

std::map<std::string, std::optional<double>> parse_report(const std::string& text) {
  std::istringstream in(text);
  std::string hl, vl;
  if (!std::getline(in, hl) || !std::getline(in, vl)) throw FormatError("report table needs two rows");
  auto head = split_row(hl), vals = split_row(vl);
  if (head.size() != vals.size() || head.size() < 2) throw FormatError("report rows differ in width");
  std::map<std::string, std::optional<double>> out;
  for (std::size_t i = 1; i < head.size(); ++i) {
    if (vals[i] == kUndefined) {
      out[head[i]] = std::nullopt;
      continue;
    }
    try {
      std::size_t used = 0;
      out[head[i]] = std::stod(vals[i], &used);
      if (used != vals[i].size()) throw FormatError("");
    } catch (const std::exception&) {
      throw FormatError("bad report value: " + vals[i]);
    }
  }
  return out;
}

std::string format_report_lines(const EvalReport& report, const ClassTable& classes) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    out << classes.name(static_cast<ClassId>(c)) << '=';
    if (report.per_class_iou[c]) out << *report.per_class_iou[c];
    else out << "nan";
    out << '\n';
  }
  out << "miou=" << report.miou << "\ncoverage=" << report.coverage << '\n';
  return out.str();
}

}  // namespace csf
