#pragma once

// Core value types shared by every stage of the reconstruction pipeline.
// SI units throughout: meters, seconds. Pressure is a relative scale.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pacloud/rng.hpp"
#include "pacloud/vec3.hpp"

namespace pacloud {

/// One Gaussian-ball acoustic source: p(r) = p0 * exp(-|r - position|^2 / (2 a0^2)).
/// Stored in single precision; every kernel accumulates in double.
struct SourceBall {
  Vec3f position;
  float p0 = 0.0f;
  float a0 = 0.0f;
  /// Unconstrained a0 used only while a0 = softplus(a0_free) is being optimized.
  float a0_free = 0.0f;

  bool operator==(const SourceBall &) const = default;
};

struct PointCloud {
  std::vector<SourceBall> balls;
  /// Incremented by every density-control pass.
  std::uint32_t generation = 0;

  std::size_t size() const { return balls.size(); }
  bool empty() const { return balls.empty(); }
};

struct SensorArray {
  std::vector<Vec3> positions;
  double sound_speed = 1500.0;
  /// Outward unit normals, either empty or one per position.
  std::vector<Vec3> normals;

  std::size_t size() const { return positions.size(); }
  void validate() const;
};

struct TimeGrid {
  double t0 = 0.0;
  double dt = 0.0;
  std::size_t n_samples = 0;

  double time(std::size_t n) const { return t0 + static_cast<double>(n) * dt; }
  /// Grid seen after keeping every f-th sample: dt * f, ceil(n / f) samples.
  TimeGrid decimated(std::size_t f) const;
  void validate() const;

  bool operator==(const TimeGrid &) const = default;
};

/// Sensor-major samples, n_sensors rows of grid.n_samples.
struct SignalSet {
  TimeGrid grid;
  std::size_t n_sensors = 0;
  std::vector<float> data;

  SignalSet() = default;
  SignalSet(TimeGrid g, std::size_t sensors);

  std::span<float> row(std::size_t sensor) {
    return {data.data() + sensor * grid.n_samples, grid.n_samples};
  }
  std::span<const float> row(std::size_t sensor) const {
    return {data.data() + sensor * grid.n_samples, grid.n_samples};
  }
  void validate() const;
};

struct VoxelGrid {
  std::array<std::size_t, 3> dims{0, 0, 0};
  double spacing = 0.0;
  /// Center of voxel (0, 0, 0).
  Vec3 origin;
  /// x-fastest.
  std::vector<float> values;

  VoxelGrid() = default;
  VoxelGrid(std::array<std::size_t, 3> d, double spacing_, Vec3 origin_);

  std::size_t count() const { return dims[0] * dims[1] * dims[2]; }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return i + dims[0] * (j + dims[1] * k);
  }
  float &at(std::size_t i, std::size_t j, std::size_t k) { return values[index(i, j, k)]; }
  float at(std::size_t i, std::size_t j, std::size_t k) const { return values[index(i, j, k)]; }
  Vec3 center(std::size_t i, std::size_t j, std::size_t k) const {
    return origin + Vec3(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)) * spacing;
  }
  void validate() const;
};

struct Violation {
  std::size_t index;
  std::string reason;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

/// Lists every ball with a non-finite field or a0 <= 0. Never throws.
ValidationReport validate_cloud(const PointCloud &cloud);

} // namespace pacloud
