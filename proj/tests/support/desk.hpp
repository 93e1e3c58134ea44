#pragma once

// The desk-scale 5-ball pipeline configuration shared by the command tests
// and the acceptance run.

#include <cstdint>
#include <filesystem>
#include <string>

#include "pacloud/config.hpp"

namespace fixture {

inline pacloud::ReconConfig desk_config(const std::filesystem::path &out, std::uint64_t seed = 11) {
  using namespace pacloud;
  ReconConfig cfg;
  cfg.seed = seed;
  cfg.paths.output_dir = out.string();
  cfg.acquisition.preset = "desk-20mhz";
  cfg.array.kind = ArrayKind::sphere;
  cfg.array.count = 64;
  cfg.array.radius = 0.04;
  cfg.phantom.kind = PhantomKind::balls;
  cfg.phantom.count = 5;
  cfg.phantom.box = {{-4e-3, -4e-3, -4e-3}, {4e-3, 4e-3, 4e-3}};
  cfg.phantom.min_separation = 4e-3;
  cfg.initialization.n_points = 3000;
  cfg.initialization.box = Box{{-6e-3, -6e-3, -6e-3}, {6e-3, 6e-3, 6e-3}};
  cfg.filter.factor = 8;
  cfg.schedule.levels = {{8, 300, Stage::coarse}, {2, 300, Stage::fine}, {1, 300, Stage::fine}};
  cfg.refine.iters = 100;
  return cfg;
}

} // namespace fixture
