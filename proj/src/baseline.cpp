#include "pacloud/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pacloud/errors.hpp"
#include "pacloud/parallel.hpp"

namespace pacloud {
namespace {

void require_same_dims(const VoxelGrid &a, const VoxelGrid &b, const char *what) {
  a.validate();
  b.validate();
  if (a.dims != b.dims)
    throw ArgumentError(std::string(what) + ": volume dimensions differ");
}

// Sliding sums of length w along one axis, valid mode.
std::vector<double> box_axis(const std::vector<double> &in, std::array<std::size_t, 3> dims, int axis,
                             std::size_t w) {
  std::array<std::size_t, 3> out_dims = dims;
  out_dims[axis] = dims[axis] - w + 1;
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? dims[0] : dims[0] * dims[1];
  std::vector<double> out(out_dims[0] * out_dims[1] * out_dims[2]);
  for (std::size_t k = 0; k < out_dims[2]; ++k)
    for (std::size_t j = 0; j < out_dims[1]; ++j)
      for (std::size_t i = 0; i < out_dims[0]; ++i) {
        const std::size_t base = i + dims[0] * (j + dims[1] * k);
        double s = 0.0;
        for (std::size_t t = 0; t < w; ++t)
          s += in[base + t * stride];
        out[i + out_dims[0] * (j + out_dims[1] * k)] = s;
      }
  return out;
}

std::vector<double> box3(std::vector<double> v, std::array<std::size_t, 3> dims, std::size_t w) {
  for (int axis = 0; axis < 3; ++axis) {
    v = box_axis(v, dims, axis, w);
    dims[axis] -= w - 1;
  }
  return v;
}

} // namespace

VoxelGrid ubp_reconstruct(const SignalSet &real, const SensorArray &array, const RenderSpec &spec,
                          UbpCoverage *coverage) {
  spec.validate();
  array.validate();
  real.validate();
  if (real.n_sensors != array.size())
    throw ArgumentError("ubp_reconstruct: " + std::to_string(real.n_sensors) + " signal rows for " +
                        std::to_string(array.size()) + " sensors");
  const std::size_t n = real.grid.n_samples;
  if (n < 4)
    throw ArgumentError("ubp_reconstruct: at least 4 samples required");

  VoxelGrid grid(spec.dims, spec.spacing, spec.origin);
  const auto [nx, ny, nz] = spec.dims;
  const double inv_v = 1.0 / array.sound_speed;
  const double t0 = real.grid.t0, dt = real.grid.dt;
  const double weight = 1.0 / static_cast<double>(array.size());
  std::vector<std::size_t> skipped(nz, 0);

  parallel_for(nz, [&](std::size_t k) {
    for (std::size_t j = 0; j < ny; ++j)
      for (std::size_t i = 0; i < nx; ++i) {
        const Vec3 x = grid.center(i, j, k);
        double b = 0.0;
        for (std::size_t s = 0; s < array.size(); ++s) {
          const double t = norm(x - array.positions[s]) * inv_v;
          const double tau = (t - t0) / dt;
          if (!(tau >= 1.0 && tau <= static_cast<double>(n - 2))) {
            ++skipped[k];
            continue;
          }
          std::size_t m = static_cast<std::size_t>(tau);
          double frac = tau - static_cast<double>(m);
          if (m == n - 2) {
            m = n - 3;
            frac = 1.0;
          }
          const auto row = real.row(s);
          const double p = (1.0 - frac) * row[m] + frac * row[m + 1];
          const double d0 = (static_cast<double>(row[m + 1]) - row[m - 1]) / (2.0 * dt);
          const double d1 = (static_cast<double>(row[m + 2]) - row[m]) / (2.0 * dt);
          const double dp = (1.0 - frac) * d0 + frac * d1;
          b += 2.0 * p - 2.0 * t * dp;
        }
        grid.at(i, j, k) = static_cast<float>(weight * b);
      }
  });

  if (coverage) {
    coverage->skipped = 0;
    for (auto c : skipped)
      coverage->skipped += c;
    coverage->evaluated = grid.count() * array.size() - coverage->skipped;
  }
  return grid;
}

VoxelGrid max_normalized(const VoxelGrid &grid) {
  grid.validate();
  VoxelGrid out = grid;
  float peak = 0.0f;
  for (float &v : out.values) {
    v = std::max(v, 0.0f);
    peak = std::max(peak, v);
  }
  if (peak > 0.0f)
    for (float &v : out.values)
      v = static_cast<float>(static_cast<double>(v) / peak);
  return out;
}

double mse(const VoxelGrid &a, const VoxelGrid &b) {
  require_same_dims(a, b, "mse");
  double s = 0.0;
  for (std::size_t q = 0; q < a.values.size(); ++q) {
    const double d = static_cast<double>(a.values[q]) - b.values[q];
    s += d * d;
  }
  return s / static_cast<double>(a.values.size());
}

double psnr_from_mse(double m) {
  if (m == 0.0)
    return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / m);
}

double psnr(const VoxelGrid &a, const VoxelGrid &b) { return psnr_from_mse(mse(a, b)); }

double ssim(const VoxelGrid &a, const VoxelGrid &b) {
  require_same_dims(a, b, "ssim");
  const std::size_t w = kSsimWindow;
  for (auto d : a.dims)
    if (d < w)
      throw ArgumentError("ssim: every dimension must be at least " + std::to_string(w));

  const std::size_t n = a.values.size();
  std::vector<double> va(n), vb(n), aa(n), bb(n), ab(n);
  for (std::size_t q = 0; q < n; ++q) {
    va[q] = a.values[q];
    vb[q] = b.values[q];
    aa[q] = va[q] * va[q];
    bb[q] = vb[q] * vb[q];
    ab[q] = va[q] * vb[q];
  }
  const auto sa = box3(va, a.dims, w), sb = box3(vb, a.dims, w);
  const auto saa = box3(aa, a.dims, w), sbb = box3(bb, a.dims, w), sab = box3(ab, a.dims, w);

  const double inv = 1.0 / static_cast<double>(w * w * w);
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (std::size_t q = 0; q < sa.size(); ++q) {
    const double ma = sa[q] * inv, mb = sb[q] * inv;
    const double var_a = saa[q] * inv - ma * ma;
    const double var_b = sbb[q] * inv - mb * mb;
    const double cov = sab[q] * inv - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
  }
  return total / static_cast<double>(sa.size());
}

double cnr(const VoxelGrid &grid, std::span<const std::uint8_t> roi, std::span<const std::uint8_t> bg) {
  grid.validate();
  if (roi.size() != grid.count() || bg.size() != grid.count())
    throw ArgumentError("cnr: mask size does not match the volume");
  double sr = 0.0, sb = 0.0;
  std::size_t nr = 0, nb = 0;
  for (std::size_t q = 0; q < grid.count(); ++q) {
    if (roi[q] && bg[q])
      throw ArgumentError("cnr: masks overlap at voxel " + std::to_string(q));
    if (roi[q]) {
      sr += grid.values[q];
      ++nr;
    } else if (bg[q]) {
      sb += grid.values[q];
      ++nb;
    }
  }
  if (nr == 0 || nb == 0)
    throw ArgumentError(nr == 0 ? "cnr: empty ROI mask" : "cnr: empty background mask");
  const double mr = sr / static_cast<double>(nr), mb = sb / static_cast<double>(nb);
  double var = 0.0;
  for (std::size_t q = 0; q < grid.count(); ++q)
    if (bg[q]) {
      const double d = grid.values[q] - mb;
      var += d * d;
    }
  const double sd = std::sqrt(var / static_cast<double>(nb));
  const double contrast = mr - mb;
  if (contrast == 0.0)
    return 0.0;
  if (sd == 0.0)
    return std::copysign(std::numeric_limits<double>::infinity(), contrast);
  return contrast / sd;
}

MetricReport compare_volumes(const VoxelGrid &recon, const VoxelGrid &truth, const std::optional<MaskPair> &masks) {
  require_same_dims(recon, truth, "compare_volumes");
  const VoxelGrid a = max_normalized(recon), b = max_normalized(truth);
  MetricReport r;
  r.mse = mse(a, b);
  r.psnr = psnr_from_mse(r.mse);
  r.ssim = ssim(a, b);
  if (masks)
    r.cnr = cnr(a, masks->roi, masks->bg);
  return r;
}

} // namespace pacloud
