#include "csf/fusion.hpp"

#include <omp.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <exception>

namespace csf {

VoteAccumulator::VoteAccumulator(std::size_t n_points, std::size_t n_classes)
    : n_points_(n_points), n_classes_(n_classes), counts_(n_points * n_classes, 0) {
  if (n_classes == 0) throw InvariantError("accumulator needs at least one class");
}

VoteAccumulator& VoteAccumulator::operator+=(const VoteAccumulator& other) {
  if (other.n_points_ != n_points_ || other.n_classes_ != n_classes_)
    throw InvariantError("accumulator dimension mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

std::uint64_t VoteAccumulator::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

namespace {

constexpr char kAccMagic[8] = {'C', 'S', 'F', 'A', 'C', 'C', '0', '1'};

template <typename T>
void put_le(std::ofstream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "accumulator I/O assumes little-endian host");
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get_le(std::ifstream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError("accumulator file truncated");
  return v;
}

}  // namespace

void VoteAccumulator::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kAccMagic, sizeof kAccMagic);
  put_le<std::uint64_t>(out, n_points_);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(n_classes_));
  out.write(reinterpret_cast<const char*>(counts_.data()),
            static_cast<std::streamsize>(counts_.size() * sizeof(std::uint32_t)));
  if (!out) throw IoError("write failed: " + path.string());
}

VoteAccumulator VoteAccumulator::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kAccMagic, sizeof magic) != 0)
    throw FormatError("not an accumulator file: " + path.string());
  const auto n = get_le<std::uint64_t>(in);
  const auto m = get_le<std::uint32_t>(in);
  const auto expected = std::filesystem::file_size(path) - 20;
  if (m == 0 || n > expected / sizeof(std::uint32_t) / m || n * m * sizeof(std::uint32_t) != expected)
    throw FormatError("accumulator size does not match its header: " + path.string());
  VoteAccumulator acc(n, m);
  in.read(reinterpret_cast<char*>(acc.counts_.data()),
          static_cast<std::streamsize>(acc.counts_.size() * sizeof(std::uint32_t)));
  if (!in) throw FormatError("accumulator file truncated");
  return acc;
}

void FusionConfig::validate() const {
  if (!(radius_m > 0)) throw InvariantError("radius must be > 0");
  if (pixel_stride < 1) throw InvariantError("pixel stride must be >= 1");
  if (frame_stride < 1) throw InvariantError("frame stride must be >= 1");
}

std::size_t transfer_votes(const LabeledFragment& fragment, const SceneIndex& index, VoteAccumulator& acc,
                           double radius_m) {
  if (acc.n_points() != index.size()) throw InvariantError("accumulator does not match the scene");
  for (auto l : fragment.labels)
    if (l >= acc.n_classes()) throw InvariantError("fragment label out of range: " + std::to_string(l));
  const double max_sq = radius_m * radius_m;
  std::size_t added = 0;
  for (std::size_t j = 0; j < fragment.size(); ++j) {
    if (auto nb = index.nearest_within(fragment.points[j], max_sq)) {
      acc.add(nb->index, fragment.labels[j]);
      ++added;
    }
  }
  return added;
}

VoteAccumulator merge_accumulators(const VoteAccumulator& a, const VoteAccumulator& b) {
  VoteAccumulator out = a;
  out += b;
  return out;
}

std::vector<ClassId> fuse_labels(const VoteAccumulator& acc, ClassId ignore_id) {
  std::vector<ClassId> labels(acc.n_points(), ignore_id);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(acc.n_points()); ++p) {
    const auto row = acc.row(static_cast<std::size_t>(p));
    std::uint32_t best = 0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (row[c] > best) {  // strict: the first (lowest) class keeps ties
        best = row[c];
        labels[p] = static_cast<ClassId>(c);
      }
    }
  }
  return labels;
}

FusionStats summarize(const VoteAccumulator& acc, std::span<const ClassId> labels, ClassId ignore_id) {
  FusionStats s;
  s.votes_per_class.assign(acc.n_classes(), 0);
  for (std::size_t p = 0; p < acc.n_points(); ++p) {
    const auto row = acc.row(p);
    for (std::size_t c = 0; c < row.size(); ++c) s.votes_per_class[c] += row[c];
  }
  const auto ignored = std::count(labels.begin(), labels.end(), ignore_id);
  s.ignore_fraction = labels.empty() ? 0.0 : static_cast<double>(ignored) / labels.size();
  return s;
}

FusionResult run_csf(const ScenePointCloud& cloud, std::span<const FrameRecord> frames,
                     const FusionConfig& cfg, const ClassTable& classes) {
  return run_csf(cloud, frames, cfg, classes, VoteAccumulator(cloud.size(), classes.size()));
}

FusionResult run_csf(const ScenePointCloud& cloud, std::span<const FrameRecord> frames,
                     const FusionConfig& cfg, const ClassTable& classes, VoteAccumulator initial) {
  cfg.validate();
  if (initial.n_points() != cloud.size() || initial.n_classes() != classes.size())
    throw InvariantError("accumulator dimension mismatch");
  std::vector<std::size_t> selected;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].frame_index % cfg.frame_stride != 0) continue;
    if (!frames[i].mask) throw InvariantError("frame " + std::to_string(frames[i].frame_index) + " has no mask");
    selected.push_back(i);
  }

  const SceneIndex index = build_spatial_index(cloud.positions);
  VoteAccumulator acc = std::move(initial);
  std::size_t fragment_points = 0, gated = 0;
  std::exception_ptr failure;

#pragma omp parallel reduction(+ : fragment_points, gated)
  {
    VoteAccumulator local(cloud.size(), classes.size());
#pragma omp for schedule(dynamic, 1)
    for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(selected.size()); ++s) {
      try {
        const auto& f = frames[selected[s]];
        const auto frag = frame_to_fragment(f, *f.mask, cfg.pixel_stride, classes.ignore_id());
        fragment_points += frag.size();
        gated += transfer_votes(frag, index, local, cfg.radius_m);
      } catch (...) {
#pragma omp critical(csf_fusion_error)
        if (!failure) failure = std::current_exception();
      }
    }
#pragma omp critical(csf_fusion_merge)
    acc += local;
  }
  if (failure) std::rethrow_exception(failure);

  FusionResult r{fuse_labels(acc, classes.ignore_id()), std::move(acc), {}};
  r.stats = summarize(r.accumulator, r.labels, classes.ignore_id());
  r.stats.frames_used = selected.size();
  r.stats.fragment_points = fragment_points;
  r.stats.gated_votes = gated;
  return r;
}

}  // namespace csf
