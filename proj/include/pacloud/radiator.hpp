#pragma once

// Analytic forward model for Gaussian-ball sources in a homogeneous lossless
// medium, its exact parameter gradients, and temporal decimation.
//
// For a ball (p0, a0) at distance d from a sensor the pressure is
//
//   s(t) = p0 / (2d) * [ u- G(u-) + u+ G(u+) ],   u-+ = d -+ v t,
//   G(u) = exp(-u^2 / (2 a0^2)),
//
// the exact solution of the wave equation for a spherically symmetric Gaussian
// initial pressure. Each term is evaluated only where |u| <= cutoff_sigma * a0.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "pacloud/model.hpp"

namespace pacloud {

/// Instrumentation: number of kernel samples evaluated.
struct EvalCounter {
  std::atomic<std::uint64_t> forward{0};
  std::atomic<std::uint64_t> backward{0};

  std::uint64_t total() const { return forward.load() + backward.load(); }
  void reset() {
    forward = 0;
    backward = 0;
  }
};

struct ForwardContext {
  SensorArray array;
  /// Full-rate acquisition grid. Decimated levels are addressed by a factor f.
  TimeGrid grid;
  double cutoff_sigma = 6.0;
  /// Optional, not owned.
  EvalCounter *counter = nullptr;

  void validate() const;
};

enum class Stage { coarse, fine };

struct BallGradient {
  double d_p0 = 0.0;
  double d_a0 = 0.0;
  Vec3 d_position;
};

using ParamGradients = std::vector<BallGradient>;

struct BackwardResult {
  double loss = 0.0;
  ParamGradients gradients;
};

/// Full-rate simulation.
SignalSet simulate_signals(const PointCloud &cloud, const ForwardContext &ctx);

/// Simulation evaluated directly on the grid decimated by f. Sample m is the
/// kernel at full-rate index m * f, so the result equals
/// downsample(simulate_signals(cloud, ctx), f) exactly.
SignalSet simulate_at_rate(const PointCloud &cloud, const ForwardContext &ctx, std::size_t f);

/// Mean squared sample difference.
double loss(const SignalSet &sim, const SignalSet &real);

/// Loss and analytic gradients at decimation level f. `real` must live on
/// ctx.grid.decimated(f). The coarse stage leaves d_position at zero.
BackwardResult backward(const PointCloud &cloud, const ForwardContext &ctx, const SignalSet &real,
                        Stage stage, std::size_t f = 1);

/// Loss and dL/dp0 only, for every ball.
struct PressureGradient {
  double loss = 0.0;
  std::vector<double> d_p0;
};
PressureGradient pressure_gradient(const PointCloud &cloud, const ForwardContext &ctx,
                                   const SignalSet &real, std::size_t f = 1);

/// Keeps samples 0, f, 2f, ... and rescales the grid accordingly.
SignalSet downsample(const SignalSet &real, std::size_t f);

} // namespace pacloud
