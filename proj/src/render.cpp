#include "pacloud/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>

#include "pacloud/errors.hpp"
#include "pacloud/parallel.hpp"

namespace pacloud {
namespace {

// (width axis, height axis) of the image orthogonal to `axis`.
std::array<int, 2> image_axes(Axis axis) {
  switch (axis) {
  case Axis::x:
    return {1, 2};
  case Axis::y:
    return {0, 2};
  case Axis::z:
    return {0, 1};
  }
  return {0, 1};
}

} // namespace

void RenderSpec::validate() const {
  if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0)
    throw ArgumentError("RenderSpec: dims must be strictly positive");
  if (!(spacing > 0) || !std::isfinite(spacing))
    throw ArgumentError("RenderSpec: spacing must be positive");
  if (!(support_sigma >= 2))
    throw ArgumentError("RenderSpec: support_sigma must be >= 2");
  if (!is_finite(origin))
    throw ArgumentError("RenderSpec: origin must be finite");
}

VoxelGrid voxelize(const PointCloud &cloud, const RenderSpec &spec) {
  spec.validate();
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (!(cloud.balls[i].a0 > 0))
      throw ArgumentError("voxelize: ball " + std::to_string(i) + " has a0 <= 0");

  std::vector<SourceBall> balls;
  balls.reserve(cloud.size());
  for (const auto &b : cloud.balls)
    if (b.p0 > 0)
      balls.push_back(b);
  std::sort(balls.begin(), balls.end(), [](const SourceBall &a, const SourceBall &b) {
    return std::tie(a.position.z, a.position.y, a.position.x, a.p0, a.a0) <
           std::tie(b.position.z, b.position.y, b.position.x, b.p0, b.a0);
  });

  VoxelGrid grid(spec.dims, spec.spacing, spec.origin);
  const auto [nx, ny, nz] = spec.dims;
  const double h = spec.spacing;

  struct Extent {
    long lo[3], hi[3];
  };
  std::vector<Extent> extents(balls.size());
  for (std::size_t b = 0; b < balls.size(); ++b) {
    const double reach = spec.support_sigma * balls[b].a0;
    for (int k = 0; k < 3; ++k) {
      const double c = (balls[b].position[k] - spec.origin[k]) / h;
      const double r = reach / h;
      const double lo = std::ceil(c - r), hi = std::floor(c + r);
      const double n = static_cast<double>(spec.dims[k]);
      extents[b].lo[k] = static_cast<long>(std::clamp(lo, -1.0, n));
      extents[b].hi[k] = static_cast<long>(std::clamp(hi, -1.0, n));
    }
  }

  // One z-plane per task; each plane sees the balls in canonical order.
  parallel_for(nz, [&](std::size_t k) {
    std::vector<double> plane(nx * ny, 0.0);
    const long kz = static_cast<long>(k);
    bool touched = false;
    for (std::size_t b = 0; b < balls.size(); ++b) {
      const auto &e = extents[b];
      if (kz < e.lo[2] || kz > e.hi[2])
        continue;
      const auto &ball = balls[b];
      const double a = ball.a0;
      const double reach = spec.support_sigma * a;
      const double inv_2a2 = 1.0 / (2.0 * a * a);
      const Vec3 mu(ball.position);
      const double dz = spec.origin.z + static_cast<double>(k) * h - mu.z;
      if (std::abs(dz) > reach)
        continue;
      for (long j = std::max(0L, e.lo[1]); j <= std::min<long>(static_cast<long>(ny) - 1, e.hi[1]); ++j) {
        const double dy = spec.origin.y + static_cast<double>(j) * h - mu.y;
        if (std::abs(dy) > reach)
          continue;
        for (long i = std::max(0L, e.lo[0]); i <= std::min<long>(static_cast<long>(nx) - 1, e.hi[0]); ++i) {
          const double dx = spec.origin.x + static_cast<double>(i) * h - mu.x;
          if (std::abs(dx) > reach)
            continue;
          plane[static_cast<std::size_t>(i) + nx * static_cast<std::size_t>(j)] +=
              ball.p0 * std::exp(-(dx * dx + dy * dy + dz * dz) * inv_2a2);
          touched = true;
        }
      }
    }
    if (!touched)
      return;
    float *out = grid.values.data() + nx * ny * k;
    for (std::size_t q = 0; q < plane.size(); ++q)
      out[q] = static_cast<float>(plane[q]);
  });
  return grid;
}

Image2D max_amplitude_projection(const VoxelGrid &grid, Axis axis) {
  grid.validate();
  const auto [wa, ha] = image_axes(axis);
  Image2D img;
  img.width = grid.dims[wa];
  img.height = grid.dims[ha];
  img.values.assign(img.width * img.height, -std::numeric_limits<float>::infinity());
  std::array<std::size_t, 3> idx{};
  for (idx[2] = 0; idx[2] < grid.dims[2]; ++idx[2])
    for (idx[1] = 0; idx[1] < grid.dims[1]; ++idx[1])
      for (idx[0] = 0; idx[0] < grid.dims[0]; ++idx[0]) {
        float &px = img.values[idx[wa] + img.width * idx[ha]];
        px = std::max(px, grid.at(idx[0], idx[1], idx[2]));
      }
  return img;
}

Image2D slice(const VoxelGrid &grid, Axis axis, std::size_t index) {
  grid.validate();
  const int pa = static_cast<int>(axis);
  if (index >= grid.dims[pa])
    throw ArgumentError("slice: index " + std::to_string(index) + " out of range for axis of size " +
                        std::to_string(grid.dims[pa]));
  const auto [wa, ha] = image_axes(axis);
  Image2D img;
  img.width = grid.dims[wa];
  img.height = grid.dims[ha];
  img.values.resize(img.width * img.height);
  std::array<std::size_t, 3> idx{};
  idx[pa] = index;
  for (std::size_t r = 0; r < img.height; ++r)
    for (std::size_t c = 0; c < img.width; ++c) {
      idx[wa] = c;
      idx[ha] = r;
      img.values[c + img.width * r] = grid.at(idx[0], idx[1], idx[2]);
    }
  return img;
}

} // namespace pacloud
