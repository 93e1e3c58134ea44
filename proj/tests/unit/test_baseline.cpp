#include <doctest.h>

#include <cmath>
#include <limits>

#include "../support/instances.hpp"
#include "../support/oracles.hpp"
#include "pacloud/baseline.hpp"
#include "pacloud/errors.hpp"

using namespace pacloud;

namespace {

VoxelGrid random_grid(std::array<std::size_t, 3> dims, std::uint64_t seed) {
  VoxelGrid g(dims, 1.0, Vec3());
  CounterRng rng(RngSeed{seed}, 9);
  for (auto &v : g.values)
    v = static_cast<float>(rng.uniform());
  return g;
}

RenderSpec centered(std::size_t n, double h) {
  RenderSpec s;
  s.dims = {n, n, n};
  s.spacing = h;
  const double c = -0.5 * static_cast<double>(n - 1) * h;
  s.origin = Vec3(c, c, c);
  return s;
}

struct TableRow {
  double mse;
  double psnr;
};

// Hand-vessel table: three sensor counts by three algorithms.
constexpr TableRow kTable[] = {
    {0.00120, 29.22}, {0.00130, 28.86}, {0.00638, 21.95}, {0.00152, 28.20}, {0.00161, 27.92},
    {0.00884, 20.54}, {0.00227, 26.44}, {0.00230, 26.38}, {0.01334, 18.75},
};

} // namespace

TEST_CASE("psnr from tabulated mse") {
  for (const auto &row : kTable) {
    CAPTURE(row.mse);
    CHECK(std::abs(psnr_from_mse(row.mse) - row.psnr) <= 0.02);
  }
  CHECK(psnr_from_mse(0.00120) == doctest::Approx(29.208).epsilon(1e-4));
  CHECK(psnr_from_mse(0.00638) == doctest::Approx(21.952).epsilon(1e-4));
  CHECK(psnr_from_mse(0.0) == std::numeric_limits<double>::infinity());
}

TEST_CASE("mse and psnr on grids") {
  const auto a = random_grid({8, 8, 8}, 1);
  CHECK(mse(a, a) == 0.0);
  CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());
  VoxelGrid z({8, 8, 8}, 1.0, Vec3());
  VoxelGrid h = z;
  std::fill(h.values.begin(), h.values.end(), 0.5f);
  CHECK(mse(z, h) == 0.25);
  CHECK(psnr(z, h) == doctest::Approx(10 * std::log10(4.0)));
  CHECK_THROWS_AS(mse(a, random_grid({8, 8, 9}, 1)), ArgumentError);
}

TEST_CASE("max_normalized clips then scales") {
  VoxelGrid g({2, 2, 1}, 1.0, Vec3());
  g.values = {-1.0f, 0.5f, 2.0f, 1.0f};
  const auto n = max_normalized(g);
  CHECK(n.values == std::vector<float>{0.0f, 0.25f, 1.0f, 0.5f});
  VoxelGrid neg({2, 1, 1}, 1.0, Vec3());
  neg.values = {-1.0f, -2.0f};
  CHECK(max_normalized(neg).values == std::vector<float>{0.0f, 0.0f});
}

TEST_CASE("ssim") {
  const auto a = random_grid({9, 8, 10}, 2);
  CHECK(ssim(a, a) == 1.0);
  VoxelGrid zero(a.dims, 1.0, Vec3());
  CHECK(ssim(a, zero) < 1.0);
  CHECK_THROWS_AS(ssim(random_grid({6, 9, 9}, 1), random_grid({6, 9, 9}, 2)), ArgumentError);

  const auto x = random_grid({32, 32, 32}, 3), y = random_grid({32, 32, 32}, 4);
  CHECK(std::abs(ssim(x, y) - oracle::ssim(x, y)) <= 1e-10);
  VoxelGrid mix = x;
  for (std::size_t q = 0; q < mix.count(); ++q)
    mix.values[q] = 0.7f * x.values[q] + 0.3f * y.values[q];
  const double s = ssim(x, mix);
  CHECK(std::abs(s - oracle::ssim(x, mix)) <= 1e-10);
  CHECK(s > ssim(x, y));
  CHECK(s <= 1.0);
  CHECK(s >= -1.0);
}

TEST_CASE("cnr") {
  VoxelGrid g({4, 1, 1}, 1.0, Vec3());
  g.values = {1.0f, 1.0f, 0.0f, 0.2f};
  const std::vector<std::uint8_t> roi{1, 1, 0, 0}, bg{0, 0, 1, 1};
  CHECK(cnr(g, roi, bg) == doctest::Approx(9.0).epsilon(1e-6));
  VoxelGrid c({4, 1, 1}, 1.0, Vec3());
  c.values = {0.3f, 0.3f, 0.3f, 0.3f};
  CHECK(cnr(c, roi, bg) == 0.0);
  c.values = {0.5f, 0.5f, 0.3f, 0.3f};
  CHECK(cnr(c, roi, bg) == std::numeric_limits<double>::infinity());
  c.values = {0.1f, 0.1f, 0.3f, 0.3f};
  CHECK(cnr(c, roi, bg) == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(cnr(g, std::vector<std::uint8_t>{1, 1, 1, 0}, bg), ArgumentError);
  CHECK_THROWS_AS(cnr(g, std::vector<std::uint8_t>{0, 0, 0, 0}, bg), ArgumentError);
  CHECK_THROWS_AS(cnr(g, roi, std::vector<std::uint8_t>{0, 0, 1}), ArgumentError);
}

TEST_CASE("compare_volumes normalizes both inputs") {
  const auto a = random_grid({8, 8, 8}, 5);
  VoxelGrid b = a;
  for (auto &v : b.values)
    v *= 4.0f;
  const auto r = compare_volumes(b, a);
  CHECK(r.mse == 0.0);
  CHECK(r.psnr == std::numeric_limits<double>::infinity());
  CHECK(r.ssim == 1.0);
  CHECK_FALSE(r.cnr.has_value());
  MaskPair m;
  m.roi.assign(a.count(), 0);
  m.bg.assign(a.count(), 0);
  m.roi[0] = 1;
  m.bg[1] = m.bg[2] = 1;
  CHECK(compare_volumes(b, a, m).cnr.has_value());
}

TEST_CASE("ubp_reconstruct") {
  const auto ctx = fixture::small_context();
  const auto spec = centered(12, 0.5e-3);
  SUBCASE("zero signals give a zero volume") {
    SignalSet zero(ctx.grid, ctx.array.size());
    const auto v = ubp_reconstruct(zero, ctx.array, spec);
    CHECK(std::all_of(v.values.begin(), v.values.end(), [](float x) { return x == 0.0f; }));
  }
  SUBCASE("linear in the signals") {
    const auto s = simulate_signals(fixture::random_cloud(4, 30, 2e-3), ctx);
    SignalSet s2 = s;
    for (auto &x : s2.data)
      x *= 2.0f;
    const auto v = ubp_reconstruct(s, ctx.array, spec), v2 = ubp_reconstruct(s2, ctx.array, spec);
    for (std::size_t q = 0; q < v.count(); ++q)
      CHECK(v2.values[q] == 2.0f * v.values[q]);
  }
  SUBCASE("coverage counts skipped travel times") {
    const auto s = simulate_signals(fixture::random_cloud(2, 31, 2e-3), ctx);
    UbpCoverage cov;
    ubp_reconstruct(s, ctx.array, spec, &cov);
    CHECK(cov.skipped == 0);
    CHECK(cov.evaluated == spec.dims[0] * spec.dims[1] * spec.dims[2] * ctx.array.size());
    SignalSet shortened(TimeGrid{13e-6, 50e-9, 16}, ctx.array.size());
    ubp_reconstruct(shortened, ctx.array, spec, &cov);
    CHECK(cov.skipped > 0);
    CHECK(cov.evaluated + cov.skipped == spec.dims[0] * spec.dims[1] * spec.dims[2] * ctx.array.size());
  }
  SUBCASE("mismatched rows") {
    SignalSet s(ctx.grid, 3);
    CHECK_THROWS_AS(ubp_reconstruct(s, ctx.array, spec), ArgumentError);
  }
}

TEST_CASE("ubp focuses a point source and sparse arrays add artifacts") {
  const double h = 0.25e-3;
  const auto spec = centered(21, h);
  const TimeGrid grid{5e-6, 20e-9, 1000};
  PointCloud src;
  SourceBall b;
  b.position = Vec3f(Vec3(2 * h, -h, 3 * h));
  b.p0 = 1.0f;
  b.a0 = 0.08e-3f;
  src.balls.push_back(b);
  const Vec3 truth = Vec3(b.position);

  struct Outcome {
    double argmax_dist;
    double background_rms;
  };
  const auto run = [&](std::size_t n) {
    const auto array = fixture::sphere_array(n, 0.02);
    const auto data = simulate_signals(src, ForwardContext{array, grid, 6.0, nullptr});
    const auto v = max_normalized(ubp_reconstruct(data, array, spec));
    std::size_t best = 0;
    for (std::size_t q = 0; q < v.count(); ++q)
      if (v.values[q] > v.values[best])
        best = q;
    const auto [nx, ny, nz] = v.dims;
    const Vec3 at = v.center(best % nx, (best / nx) % ny, best / (nx * ny));
    double ss = 0;
    std::size_t cnt = 0;
    for (std::size_t k = 0; k < nz; ++k)
      for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i)
          if (norm(v.center(i, j, k) - truth) > 3 * h) {
            ss += static_cast<double>(v.at(i, j, k)) * v.at(i, j, k);
            ++cnt;
          }
    return Outcome{norm(at - truth), std::sqrt(ss / static_cast<double>(cnt))};
  };
  const auto dense = run(512), sparse = run(64);
  CHECK(dense.argmax_dist <= h * 1.0001);
  CHECK(sparse.argmax_dist <= h * 1.0001);
  CHECK(sparse.background_rms > dense.background_rms);
}
