#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "pacloud/model.hpp"

namespace pacloud {

struct RenderSpec {
  std::array<std::size_t, 3> dims{0, 0, 0};
  double spacing = 0.0;
  Vec3 origin;
  /// Per-axis truncation of the splat, in units of a0.
  double support_sigma = 3.0;

  void validate() const;
};

enum class Axis { x = 0, y = 1, z = 2 };

/// 2D view of a volume. For projection or slicing along z the image is (x, y);
/// along y it is (x, z); along x it is (y, z). Width is the fastest index.
struct Image2D {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> values;

  float at(std::size_t col, std::size_t row) const { return values[col + width * row]; }
};

/// Splats max(p0, 0) * exp(-|x - mu|^2 / (2 a0^2)) at every voxel center whose
/// per-axis offset from mu is within support_sigma * a0. Contributions are
/// summed in a canonical ball order, so the result does not depend on the
/// order of the input cloud or on the worker count.
VoxelGrid voxelize(const PointCloud &cloud, const RenderSpec &spec);

Image2D max_amplitude_projection(const VoxelGrid &grid, Axis axis);
Image2D slice(const VoxelGrid &grid, Axis axis, std::size_t index);

} // namespace pacloud
