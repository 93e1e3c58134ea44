#pragma once

// Synthetic ground truth: seeded ball phantoms and vessel-like tube trees, and
// simulated acquisitions of them.

#include <cstddef>
#include <optional>
#include <vector>

#include "pacloud/geometry.hpp"
#include "pacloud/model.hpp"
#include "pacloud/render.hpp"

namespace pacloud {

enum class PhantomKind { balls, tube_tree };

struct Box {
  Vec3 lo, hi;
};

struct PhantomSpec {
  PhantomKind kind = PhantomKind::balls;
  /// balls: number of balls to place.
  std::size_t count = 5;
  /// tube_tree: one disjoint vessel per branch, each a polyline of `segments`
  /// segments with `side_branches` short offshoots.
  std::size_t branches = 3;
  std::size_t segments = 4;
  std::size_t side_branches = 1;
  /// Ball spacing along a tube, in units of the tube's a0.
  double tube_spacing = 0.5;

  /// Placement region: the mesh when set (balls only), else the box.
  Box box{{-5e-3, -5e-3, -5e-3}, {5e-3, 5e-3, 5e-3}};
  const EnvelopeMesh *mesh = nullptr;

  RngSeed seed{};
  double p0_lo = 0.5, p0_hi = 1.0;
  double a0_lo = 0.5e-3, a0_hi = 0.7e-3;
  /// balls: minimum center-to-center distance.
  double min_separation = 0.0;
  /// balls: when non-empty, the phantom is exactly this list.
  std::vector<SourceBall> fixed;

  RenderSpec render;

  void validate() const;
};

struct Phantom {
  PointCloud truth;
  VoxelGrid rendered;
};

Phantom generate_phantom(const PhantomSpec &spec);

/// simulate_signals(truth) plus white Gaussian noise with standard deviation
/// noise_sigma times the RMS of the clean signal set.
SignalSet make_dataset(const PointCloud &truth, const SensorArray &array, const TimeGrid &grid,
                       double noise_sigma, RngSeed seed, double cutoff_sigma = 6.0);

struct AcquisitionPreset {
  TimeGrid grid;
  double sound_speed = 1500.0;
};

/// 40 MHz, 4900 samples, 1500 m/s.
AcquisitionPreset standard_acquisition();
/// 20 MHz, 1024 samples, 1500 m/s.
AcquisitionPreset desk_acquisition();

} // namespace pacloud
