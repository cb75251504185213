#pragma once

#include <ostream>
#include <vector>

#include "csf/app/config.hpp"
#include "csf/fusion.hpp"

namespace csf::app {

/// Entry point of the `csf` executable. Returns the process exit status:
/// 0 on success, 1 on a runtime failure, 2 on a usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct FuseOutcome {
  ClassTable classes;
  ScenePointCloud cloud;
  FusionResult fusion;
  std::vector<int> frames;  // fused frame indices, in processing order
};

/// The fusion stage of `fuse` and `pipeline`: validates every input path,
/// builds masks from the configured source and fuses them. Writes nothing.
FuseOutcome fuse_dataset(const PipelineConfig& cfg, std::ostream& log);

}  // namespace csf::app
