#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "../support/instances.hpp"
#include "pacloud/errors.hpp"
#include "pacloud/render.hpp"
#include "pacloud/rng.hpp"

using namespace pacloud;

namespace {

RenderSpec cube_spec(std::size_t n, double h) {
  RenderSpec s;
  s.dims = {n, n, n};
  s.spacing = h;
  const double c = -0.5 * static_cast<double>(n - 1) * h;
  s.origin = Vec3(c, c, c);
  return s;
}

SourceBall ball(Vec3 p, float p0, float a0) {
  SourceBall b;
  b.position = Vec3f(p);
  b.p0 = p0;
  b.a0 = a0;
  return b;
}

VoxelGrid random_grid(std::array<std::size_t, 3> dims, std::uint64_t seed) {
  VoxelGrid g(dims, 1.0, Vec3());
  CounterRng rng(RngSeed{seed}, 9);
  for (auto &v : g.values)
    v = static_cast<float>(rng.uniform());
  return g;
}

} // namespace

TEST_CASE("voxelize closed-form examples") {
  const auto spec = cube_spec(17, 0.25e-3);
  CHECK(std::all_of(voxelize(PointCloud{}, spec).values.begin(), voxelize(PointCloud{}, spec).values.end(),
                    [](float v) { return v == 0.0f; }));
  PointCloud one;
  one.balls.push_back(ball(Vec3(), 1.0f, 0.5e-3f));
  const auto g = voxelize(one, spec);
  CHECK(g.at(8, 8, 8) == 1.0f);
  CHECK(g.at(10, 8, 8) == doctest::Approx(std::exp(-0.5)).epsilon(1e-6));
  CHECK(g.at(8, 6, 8) == doctest::Approx(0.6065).epsilon(1e-4));
  // Per-axis cube support: 3 a0 = 6 voxels along each axis, corner included.
  CHECK(g.at(14, 14, 14) > 0.0f);
  CHECK(g.at(15, 8, 8) == 0.0f);
  PointCloud two = one;
  two.balls.push_back(one.balls[0]);
  const auto g2 = voxelize(two, spec);
  for (std::size_t q = 0; q < g.count(); ++q)
    CHECK(g2.values[q] == 2.0f * g.values[q]);
  PointCloud neg;
  neg.balls.push_back(ball(Vec3(), -1.0f, 0.5e-3f));
  const auto gn = voxelize(neg, spec);
  CHECK(*std::max_element(gn.values.begin(), gn.values.end()) == 0.0f);
}

TEST_CASE("voxelize errors") {
  auto spec = cube_spec(8, 0.25e-3);
  PointCloud c;
  c.balls.push_back(ball(Vec3(), 1.0f, 0.0f));
  CHECK_THROWS_AS(voxelize(c, spec), ArgumentError);
  c.balls[0].a0 = 0.5e-3f;
  spec.support_sigma = 1.5;
  CHECK_THROWS_AS(voxelize(c, spec), ArgumentError);
  spec = cube_spec(8, 0.25e-3);
  spec.spacing = 0;
  CHECK_THROWS_AS(voxelize(c, spec), ArgumentError);
  spec = cube_spec(8, 0.25e-3);
  spec.dims[1] = 0;
  CHECK_THROWS_AS(voxelize(c, spec), ArgumentError);
}

TEST_CASE("mass consistency") {
  for (double a0 : {0.5e-3, 0.8e-3}) {
    for (double frac : {0.5, 0.35}) {
      const double h = a0 * frac;
      auto spec = cube_spec(41, h);
      PointCloud c;
      c.balls.push_back(ball(Vec3(0.3 * h, -0.2 * h, 0.45 * h), 0.8f, static_cast<float>(a0)));
      const auto g = voxelize(c, spec);
      double sum = 0;
      for (float v : g.values)
        sum += v;
      const double a = static_cast<double>(c.balls[0].a0);
      const double expect = 0.8 * std::pow(2 * std::numbers::pi, 1.5) * a * a * a;
      CAPTURE(a0);
      CAPTURE(frac);
      CHECK(std::abs(h * h * h * sum - expect) <= 0.01 * expect);
    }
  }
}

TEST_CASE("translation by one voxel shifts the grid") {
  const double h = 0.25e-3;
  const auto spec = cube_spec(32, h);
  const auto cloud = fixture::random_cloud(6, 21, 1.5e-3, 0.3e-3, 0.5e-3);
  // Snap centers to a multiple of h/4 so shifting by h is exact in float.
  PointCloud a = cloud, b;
  for (auto &bl : a.balls)
    for (int k = 0; k < 3; ++k)
      bl.position[k] = static_cast<float>(std::round(bl.position[k] / (h / 4)) * (h / 4));
  b = a;
  for (auto &bl : b.balls)
    bl.position[0] = static_cast<float>(static_cast<double>(bl.position[0]) + h);
  const auto ga = voxelize(a, spec), gb = voxelize(b, spec);
  double worst = 0;
  for (std::size_t k = 0; k < 32; ++k)
    for (std::size_t j = 0; j < 32; ++j)
      for (std::size_t i = 0; i + 1 < 32; ++i)
        worst = std::max(worst, static_cast<double>(std::abs(gb.at(i + 1, j, k) - ga.at(i, j, k))));
  CHECK(worst <= 1e-6);
}

TEST_CASE("voxelize does not depend on ball order") {
  const auto spec = cube_spec(24, 0.3e-3);
  const auto cloud = fixture::random_cloud(200, 22, 3e-3);
  PointCloud rev = cloud;
  std::reverse(rev.balls.begin(), rev.balls.end());
  PointCloud rot = cloud;
  std::rotate(rot.balls.begin(), rot.balls.begin() + 77, rot.balls.end());
  const auto g = voxelize(cloud, spec);
  CHECK(voxelize(rev, spec).values == g.values);
  CHECK(voxelize(rot, spec).values == g.values);
}

TEST_CASE("max_amplitude_projection") {
  VoxelGrid c({4, 5, 6}, 1.0, Vec3());
  std::fill(c.values.begin(), c.values.end(), 0.25f);
  for (Axis ax : {Axis::x, Axis::y, Axis::z}) {
    const auto img = max_amplitude_projection(c, ax);
    CHECK(std::all_of(img.values.begin(), img.values.end(), [](float v) { return v == 0.25f; }));
  }
  VoxelGrid one({4, 5, 6}, 1.0, Vec3());
  one.at(1, 2, 3) = 2.0f;
  const auto mz = max_amplitude_projection(one, Axis::z);
  CHECK(mz.width == 4);
  CHECK(mz.height == 5);
  CHECK(mz.at(1, 2) == 2.0f);
  CHECK(std::count(mz.values.begin(), mz.values.end(), 0.0f) == 19);
  const auto my = max_amplitude_projection(one, Axis::y);
  CHECK(my.width == 4);
  CHECK(my.height == 6);
  CHECK(my.at(1, 3) == 2.0f);
  CHECK(std::count(my.values.begin(), my.values.end(), 0.0f) == 23);
  const auto mx = max_amplitude_projection(one, Axis::x);
  CHECK(mx.width == 5);
  CHECK(mx.height == 6);
  CHECK(mx.at(2, 3) == 2.0f);
  CHECK(std::count(mx.values.begin(), mx.values.end(), 0.0f) == 29);

  const auto g = random_grid({7, 9, 11}, 5);
  const auto [nx, ny, nz] = g.dims;
  const auto px = max_amplitude_projection(g, Axis::x), py = max_amplitude_projection(g, Axis::y),
             pz = max_amplitude_projection(g, Axis::z);
  for (std::size_t k = 0; k < nz; ++k)
    for (std::size_t j = 0; j < ny; ++j) {
      float m = 0;
      for (std::size_t i = 0; i < nx; ++i)
        m = std::max(m, g.at(i, j, k));
      CHECK(px.at(j, k) == m);
    }
  for (std::size_t k = 0; k < nz; ++k)
    for (std::size_t i = 0; i < nx; ++i) {
      float m = 0;
      for (std::size_t j = 0; j < ny; ++j)
        m = std::max(m, g.at(i, j, k));
      CHECK(py.at(i, k) == m);
    }
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      float m = 0;
      for (std::size_t k = 0; k < nz; ++k)
        m = std::max(m, g.at(i, j, k));
      CHECK(pz.at(i, j) == m);
    }
}

TEST_CASE("slice") {
  VoxelGrid flat({5, 4, 1}, 1.0, Vec3());
  for (std::size_t q = 0; q < flat.count(); ++q)
    flat.values[q] = static_cast<float>(q);
  const auto s0 = slice(flat, Axis::z, 0);
  CHECK(s0.width == 5);
  CHECK(s0.height == 4);
  CHECK(s0.values == flat.values);

  VoxelGrid one({4, 5, 6}, 1.0, Vec3());
  one.at(1, 2, 3) = 3.0f;
  CHECK(slice(one, Axis::z, 3).at(1, 2) == 3.0f);
  const auto adj = slice(one, Axis::z, 4);
  CHECK(std::all_of(adj.values.begin(), adj.values.end(), [](float v) { return v == 0.0f; }));
  CHECK(slice(one, Axis::x, 1).at(2, 3) == 3.0f);
  CHECK(slice(one, Axis::y, 2).at(1, 3) == 3.0f);

  const auto g = random_grid({6, 7, 8}, 6);
  for (std::size_t k = 0; k < 8; ++k) {
    const auto s = slice(g, Axis::z, k);
    for (std::size_t j = 0; j < 7; ++j)
      for (std::size_t i = 0; i < 6; ++i)
        CHECK(s.at(i, j) == g.at(i, j, k));
  }
  for (std::size_t j = 0; j < 7; ++j) {
    const auto s = slice(g, Axis::y, j);
    for (std::size_t k = 0; k < 8; ++k)
      for (std::size_t i = 0; i < 6; ++i)
        CHECK(s.at(i, k) == g.at(i, j, k));
  }
  for (std::size_t i = 0; i < 6; ++i) {
    const auto s = slice(g, Axis::x, i);
    for (std::size_t k = 0; k < 8; ++k)
      for (std::size_t j = 0; j < 7; ++j)
        CHECK(s.at(j, k) == g.at(i, j, k));
  }
  CHECK_THROWS_AS(slice(g, Axis::z, 8), ArgumentError);
  CHECK_THROWS_AS(slice(g, Axis::x, 6), ArgumentError);
}
