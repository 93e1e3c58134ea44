#pragma once

// Point-cloud reconstruction loop: zero-gradient filtering of the initial
// cloud, adaptive-moment descent at progressively finer temporal sampling,
// split/destroy/duplicate density control, and a final softplus-constrained
// refinement of the ball sizes.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "pacloud/model.hpp"
#include "pacloud/radiator.hpp"

namespace pacloud {

struct Level {
  std::size_t factor = 1;
  std::size_t max_iters = 0;
  Stage stage = Stage::fine;
};

struct Schedule {
  std::vector<Level> levels;
  /// Fine-stage density-control period; duplication happens on this beat.
  std::size_t duplication_period = 200;
  /// Coarse-stage density-control period.
  std::size_t coarse_period = 100;

  void validate() const;

  /// "sim-16-4-1" or "invivo-4-2-1"; the first level is coarse, the rest fine.
  static Schedule preset(std::string_view name, std::array<std::size_t, 3> iters = {1000, 1000, 1000});
};

struct DensityThresholds {
  double destroy_p0_frac = 0.02;
  double split_a0 = 0.8e-3;
  double duplicate_grad_quantile = 0.90;
  double a0_min = 0.1e-3;
  double a0_max = 4.0e-3;

  /// Defaults tied to the target voxel spacing: split at 2x, keep within [0.25x, 10x].
  static DensityThresholds for_voxel(double spacing);
  void validate() const;
};

struct LearningRates {
  double p0 = 1e-2;
  double a0 = 0.04e-3;
  double position = 0.02e-3;
  /// Used for a0_free during positivity refinement.
  double a0_free = 0.05;

  /// p0: 1e-2, a0: 0.1 x spacing, position: 0.05 x spacing.
  static LearningRates for_voxel(double spacing);
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-20;
};

/// Parameters are ordered p0, a0, x, y, z (a0_free replaces a0 while refining).
struct OptimState {
  PointCloud cloud;
  std::vector<std::array<double, 5>> m1, m2;
  /// Per-ball update count for bias correction; zero for freshly created balls.
  std::vector<std::uint32_t> age;
  std::vector<double> position_grad_norm;
  std::uint64_t steps = 0;
  LearningRates lr;
  AdamConfig adam;
  /// Lower clamp applied to a0 after every update.
  double a0_floor = 1e-6;
  RngSeed seed{};

  OptimState() = default;
  OptimState(PointCloud c, LearningRates rates, AdamConfig cfg = {}, RngSeed s = {});
  void reset_moments();
};

enum class FilterPredicate { strict, lax };

struct FilterReport {
  std::vector<double> gradients;
  std::size_t n_input = 0;
  std::size_t n_retained = 0;
  /// No ball has a negative pressure gradient: the data supports nothing.
  bool no_evidence = false;
};

struct FilterResult {
  PointCloud cloud;
  FilterReport report;
};

/// Zeroes every p0, takes dL/dp0 at decimation f, keeps balls with a negative
/// gradient (or non-positive with the lax predicate) and restores their p0.
/// `real` is the full-rate measurement.
FilterResult zero_gradient_filter(const PointCloud &cloud, const ForwardContext &ctx, const SignalSet &real,
                                  std::size_t f, FilterPredicate predicate = FilterPredicate::strict);

/// One adaptive-moment update. `real_k` lives on ctx.grid.decimated(f).
/// Returns the loss before the update.
double step(OptimState &state, const ForwardContext &ctx, const SignalSet &real_k, std::size_t f, Stage stage);

struct DensityEvent {
  std::uint64_t step = 0;
  std::size_t destroyed = 0;
  std::size_t split = 0;
  std::size_t duplicated = 0;
};

/// Destroy, then split, then (fine stage with `duplicate`) duplicate.
DensityEvent density_control(OptimState &state, const DensityThresholds &thresholds, Stage stage,
                             bool duplicate);

struct TraceRow {
  std::uint64_t step = 0;
  double time_s = 0.0;
  double loss = 0.0;
  std::size_t ball_count = 0;
  std::size_t level = 0;
};

struct IterationTrace {
  std::vector<TraceRow> rows;
  std::vector<DensityEvent> events;
};

struct Progress {
  std::uint64_t step;
  std::size_t level;
  double loss;
  const OptimState &state;
};

struct RunOptions {
  LearningRates lr;
  AdamConfig adam;
  RngSeed seed{};
  double a0_floor = 1e-6;
  double converge_tol = 1e-5;
  std::size_t converge_window = 50;
  /// Zero the moment accumulators when a new level starts.
  bool reset_moments_per_level = true;
  /// Called after every step; returning true stops the run.
  std::function<bool(const Progress &)> monitor;
};

struct RunResult {
  PointCloud cloud;
  IterationTrace trace;
  OptimState state;
  bool stopped_by_monitor = false;
};

RunResult run_hierarchical(const PointCloud &init, const ForwardContext &ctx, const SignalSet &real,
                           const Schedule &schedule, const DensityThresholds &thresholds,
                           const RunOptions &options = {});

double softplus(double x);
/// Inverse of softplus for y > 0: log(expm1(y)) evaluated without overflow.
double inverse_softplus(double y);
double sigmoid(double x);

/// Reparameterizes a0 = softplus(a0_free) and runs `iters` full-rate fine
/// updates with density control frozen. `real` is the full-rate measurement.
PointCloud positivity_refine(OptimState &state, const ForwardContext &ctx, const SignalSet &real,
                             std::size_t iters);

} // namespace pacloud
