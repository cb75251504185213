// Times the OpenMP kernels against their serial reference implementations.
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>

#include "csf/evaluation.hpp"
#include "csf/fusion.hpp"
#include "csf/prompting.hpp"
#include "csf/reference.hpp"
#include "csf/synthetic.hpp"

namespace {

double seconds(const std::function<void()>& fn, int reps = 3) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void row(const char* name, double par, double ser) {
  std::printf("%-22s %10.4f s %10.4f s %8.2fx\n", name, par, ser, ser / par);
}

}  // namespace

int main() {
  using namespace csf;
  const ClassTable classes = ClassTable::scannet20();
  SceneSpec spec;
  spec.rng_seed = 7;
  const auto scene = make_scene(spec, classes);
  const auto k = default_intrinsics();
  const auto poses = make_trajectory(spec, 30);
  const auto frames = render_frames(scene, poses, k, classes);

  std::printf("threads %d, points %zu, frames %zu\n", omp_get_max_threads(), scene.cloud.size(), frames.size());
  std::printf("%-22s %12s %12s %9s\n", "kernel", "parallel", "serial", "speedup");

  row("render_frame",
      seconds([&] { render_frame(scene.cloud, k, poses[0], 1, classes.ignore_id()); }),
      seconds([&] { reference::render_frame(scene.cloud, k, poses[0], 1, classes.ignore_id()); }));
  row("frame_to_fragment",
      seconds([&] { frame_to_fragment(frames[0], *frames[0].mask, 1, classes.ignore_id()); }),
      seconds([&] { reference::frame_to_fragment(frames[0], *frames[0].mask, 1, classes.ignore_id()); }));
  const FusionConfig cfg;
  row("run_csf (30 frames)", seconds([&] { run_csf(scene.cloud, frames, cfg, classes); }, 1),
      seconds([&] { reference::run_csf(scene.cloud, frames, cfg, classes); }, 1));

  const auto fused = run_csf(scene.cloud, frames, cfg, classes).labels;
  row("evaluate",
      seconds([&] { evaluate(fused, scene.cloud.gt_labels, classes, IgnorePolicy::penalize); }),
      seconds([&] { reference::evaluate(fused, scene.cloud.gt_labels, classes, IgnorePolicy::penalize); }));

  const auto fx = make_two_lobe_fixtures(1, 3).front();
  const Pixel anchor{48, 48};
  row("augment_max_entropy", seconds([&] { augment_max_entropy(fx.image, fx.object, anchor); }),
      seconds([&] { reference::augment_max_entropy(fx.image, fx.object, anchor); }));
  return 0;
}
