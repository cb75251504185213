#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csf/evaluation.hpp"
#include "csf/prompting.hpp"
#include "csf/segmenters.hpp"

namespace csf::app {

enum class MaskSource { directory, oracle, prompted_oracle };

MaskSource parse_mask_source(const std::string& s);
std::string to_string(MaskSource s);

/// Effective configuration of a run. Loaded from a flat `key = value` file;
/// command-line flags are applied afterwards and win.
struct PipelineConfig {
  std::filesystem::path scene;       // scene PLY; defaults to <frames>/scene.ply
  std::filesystem::path frames;      // frame dataset directory
  MaskSource mask_source = MaskSource::oracle;
  std::filesystem::path mask_dir;    // for mask_source = directory
  NoiseSpec noise;
  int frame_stride = 50;
  int pixel_stride = 1;
  double radius_m = 0.1;
  AugmentStrategy strategy = AugmentStrategy::none;
  IgnorePolicy policy = IgnorePolicy::penalize;
  std::filesystem::path classes;     // defaults to <frames>/classes.txt, then ScanNet 20
  std::filesystem::path out = "out";
  std::uint64_t seed = 0;
  bool skip_missing = false;
  std::vector<int> frame_list;       // explicit frame order; empty = every frame on disk
  bool save_accumulator = false;

  // Synthetic stage of `pipeline`.
  bool synth = false;
  int synth_frames = 30;
  int synth_objects = 8;
  double synth_density = 3500;
  int fixtures = 50;                 // two-lobe benchmark size (prompted_oracle)

  /// Applies one `key`/`value` pair; throws InvariantError for an unknown key
  /// or a malformed value.
  void set(const std::string& key, const std::string& value);
  /// Ordered key/value echo of every field, parseable by `set`.
  std::map<std::string, std::string> entries() const;
  void validate() const;

  static PipelineConfig parse(const std::string& text);
  static PipelineConfig load(const std::filesystem::path& path);
};

}  // namespace csf::app
