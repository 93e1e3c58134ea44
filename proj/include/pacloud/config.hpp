#pragma once

// Run configuration, read from a JSON file whose key set is fixed: unknown
// keys, wrong types and invariant violations raise ConfigError naming the key.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pacloud/geometry.hpp"
#include "pacloud/optimizer.hpp"
#include "pacloud/phantom.hpp"
#include "pacloud/render.hpp"

namespace pacloud {

struct PathsConfig {
  std::string sensors;
  std::string signals;
  std::string output_dir = "out";
  /// Input cloud (voxelize; reconstruct skips initialization when set; simulate truth).
  std::string cloud;
  /// Volume to score (metrics).
  std::string volume;
  /// Reference volume (metrics).
  std::string reference;
  std::string roi_mask;
  std::string bg_mask;
};

struct PhysicsConfig {
  double sound_speed = 1500.0;
  double t0 = 0.0;
  double cutoff_sigma = 6.0;
};

struct AcquisitionConfig {
  /// "", "standard-40mhz" or "desk-20mhz"; a preset overrides dt and n_samples.
  std::string preset;
  double dt = 50e-9;
  std::size_t n_samples = 1024;
  double noise_sigma = 0.0;
};

struct ArrayConfig {
  ArrayKind kind = ArrayKind::sphere;
  std::size_t count = 64;
  double radius = 0.04;
  Vec3 center;
};

struct PhantomConfig {
  PhantomKind kind = PhantomKind::balls;
  std::size_t count = 5;
  std::size_t branches = 3;
  std::size_t segments = 4;
  std::size_t side_branches = 1;
  double tube_spacing = 0.5;
  Box box{{-4e-3, -4e-3, -4e-3}, {4e-3, 4e-3, 4e-3}};
  std::array<double, 2> p0_range{0.5, 1.0};
  std::array<double, 2> a0_range{0.5e-3, 0.7e-3};
  double min_separation = 4e-3;
  std::vector<SourceBall> balls;
};

struct InitConfig {
  std::size_t n_points = 3000;
  double p0_init = 0.1;
  double a0_init = 0.6e-3;
  /// Default 2 * a0_init.
  std::optional<double> inward_offset;
  /// Optional sub-box of the envelope to initialize in; must lie inside the
  /// offset envelope.
  std::optional<Box> box;
};

struct FilterConfig {
  bool enabled = true;
  std::size_t factor = 8;
  FilterPredicate predicate = FilterPredicate::strict;
};

struct ScheduleConfig {
  /// Empty, or a named preset that supplies the levels.
  std::string preset;
  /// Iterations per preset level.
  std::array<std::size_t, 3> preset_iters{1000, 1000, 1000};
  std::vector<Level> levels{{8, 300, Stage::coarse}, {2, 300, Stage::fine}, {1, 300, Stage::fine}};
  std::size_t duplication_period = 200;
  std::size_t coarse_period = 100;

  Schedule resolve() const;
};

struct OptimizerConfig {
  LearningRates lr = LearningRates::for_voxel(0.4e-3);
  AdamConfig adam;
  double a0_floor = 1e-6;
  double converge_tol = 1e-5;
  std::size_t converge_window = 50;
};

struct RefineConfig {
  std::size_t iters = 100;
};

struct ReconConfig {
  std::uint64_t seed = 11;
  PathsConfig paths;
  PhysicsConfig physics;
  AcquisitionConfig acquisition;
  ArrayConfig array;
  PhantomConfig phantom;
  InitConfig initialization;
  FilterConfig filter;
  ScheduleConfig schedule;
  DensityThresholds thresholds = DensityThresholds::for_voxel(0.4e-3);
  OptimizerConfig optimizer;
  RefineConfig refine;
  RenderSpec render{{64, 64, 64}, 0.4e-3, Vec3(-31.5 * 0.4e-3, -31.5 * 0.4e-3, -31.5 * 0.4e-3), 3.0};
  bool deterministic_reduction = true;

  TimeGrid time_grid() const;
  void validate() const;
};

ReconConfig parse_config(std::string_view json_text);
ReconConfig load_config(const std::string &path);
std::string dump_config(const ReconConfig &cfg);

/// 64-bit FNV-1a, used for manifest config hashes.
std::uint64_t fnv1a64(std::string_view bytes);

} // namespace pacloud
