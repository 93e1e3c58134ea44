#pragma once

// Universal back-projection reference reconstruction and the volume metrics
// used to compare reconstructions against a rendered ground truth.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pacloud/model.hpp"
#include "pacloud/render.hpp"

namespace pacloud {

struct UbpCoverage {
  std::size_t evaluated = 0;
  /// Voxel-sensor pairs whose travel time falls outside the usable grid.
  std::size_t skipped = 0;
};

/// b(x) = sum_j [2 p_j(t) - 2 t p_j'(t)] / n_sensors at t = |x - r_j| / v, with
/// linear interpolation in time and a central-difference derivative. Pairs
/// whose fractional sample index lies outside [1, n - 2] are skipped.
VoxelGrid ubp_reconstruct(const SignalSet &real, const SensorArray &array, const RenderSpec &spec,
                          UbpCoverage *coverage = nullptr);

/// Negative values clipped to zero, then divided by the maximum (an all-zero
/// grid stays zero).
VoxelGrid max_normalized(const VoxelGrid &grid);

double mse(const VoxelGrid &a, const VoxelGrid &b);
/// 10 log10(1 / mse); +infinity when mse is zero.
double psnr_from_mse(double mse);
double psnr(const VoxelGrid &a, const VoxelGrid &b);

/// Mean local SSIM over every fully contained 7x7x7 uniform window,
/// K1 = 0.01, K2 = 0.03, dynamic range 1, population statistics.
double ssim(const VoxelGrid &a, const VoxelGrid &b);

inline constexpr std::size_t kSsimWindow = 7;

/// (mean(roi) - mean(bg)) / std(bg) with the population deviation. A zero
/// contrast gives 0; a nonzero contrast over a constant background gives an
/// infinity carrying the contrast's sign. Masks select voxels with nonzero entries.
double cnr(const VoxelGrid &grid, std::span<const std::uint8_t> roi, std::span<const std::uint8_t> bg);

struct MetricReport {
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<double> cnr;
};

struct MaskPair {
  std::vector<std::uint8_t> roi;
  std::vector<std::uint8_t> bg;
};

/// Max-normalizes both volumes, then computes mse/psnr/ssim, plus cnr on the
/// normalized reconstruction when masks are given.
MetricReport compare_volumes(const VoxelGrid &recon, const VoxelGrid &truth,
                             const std::optional<MaskPair> &masks = std::nullopt);

} // namespace pacloud
