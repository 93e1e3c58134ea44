#include <doctest.h>

#include <cmath>
#include <limits>

#include "pacloud/errors.hpp"
#include "pacloud/model.hpp"
#include "pacloud/rng.hpp"

using namespace pacloud;

TEST_CASE("validate_cloud on an empty cloud reports nothing") {
  CHECK(validate_cloud(PointCloud{}).ok());
}

TEST_CASE("validate_cloud lists a ball with a0 = 0") {
  PointCloud c;
  c.balls.resize(3);
  for (auto &b : c.balls)
    b.a0 = 1e-3f;
  c.balls[1].a0 = 0.0f;
  const auto r = validate_cloud(c);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].index == 1);
}

TEST_CASE("validate_cloud flags non-finite fields") {
  PointCloud c;
  c.balls.resize(2);
  for (auto &b : c.balls)
    b.a0 = 1e-3f;
  c.balls[0].position.y = std::numeric_limits<float>::quiet_NaN();
  c.balls[1].p0 = std::numeric_limits<float>::infinity();
  CHECK(validate_cloud(c).violations.size() == 2);
}

TEST_CASE("1000 seeded valid balls have zero violations") {
  CounterRng rng(RngSeed{5});
  PointCloud c;
  for (int i = 0; i < 1000; ++i) {
    SourceBall b;
    b.position = Vec3f(Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
    b.p0 = static_cast<float>(rng.uniform(0, 1));
    b.a0 = static_cast<float>(rng.uniform(1e-4, 1e-3));
    c.balls.push_back(b);
  }
  for (std::size_t i = 0; i < c.size(); ++i)
    REQUIRE((c.balls[i].a0 > 0 && std::isfinite(c.balls[i].p0)));
  CHECK(validate_cloud(c).ok());
}

TEST_CASE("seeded_uniform edge cases") {
  CHECK(seeded_uniform(RngSeed{1}, 0, 1, 0).empty());
  for (double v : seeded_uniform(RngSeed{1}, 3, 3, 100))
    CHECK(v == 3.0);
  CHECK_THROWS_AS(seeded_uniform(RngSeed{1}, 2, 1, 5), ArgumentError);
}

TEST_CASE("seeded_uniform mean and range for seed 42") {
  const auto v = seeded_uniform(RngSeed{42}, 0, 1, 100000);
  double s = 0;
  for (double x : v) {
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
    s += x;
  }
  CHECK(std::abs(s / v.size() - 0.5) < 0.01);
}

TEST_CASE("generator output is frozen") {
  // Values from an independent big-integer reimplementation of the documented mixing.
  CounterRng rng(RngSeed{42});
  CHECK(rng.at(0) == 0x25887c73cb00502dULL);
  CHECK(rng.at(1) == 0x13782feb7c2a67a8ULL);
  CHECK(rng.at(2) == 0xe2bd7489db1701f4ULL);
  const auto v = seeded_uniform(RngSeed{42}, 0, 1, 3);
  CHECK(v[0] == 0.1466138632486047);
  CHECK(v[1] == 0.07605266093393359);
  CHECK(v[2] == 0.8857033573686657);
}

TEST_CASE("same seed gives identical streams, different streams differ") {
  CounterRng a(RngSeed{9}, 1), b(RngSeed{9}, 1), c(RngSeed{9}, 2);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    differs = differs || x != c.normal();
  }
  CHECK(differs);
}

TEST_CASE("normal draws have unit variance") {
  CounterRng rng(RngSeed{3});
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("TimeGrid decimation and validation") {
  const TimeGrid g{1e-6, 5e-8, 1024};
  CHECK(g.time(10) == doctest::Approx(1e-6 + 10 * 5e-8));
  const TimeGrid d = g.decimated(16);
  CHECK(d.n_samples == 64);
  CHECK(d.dt == 16 * 5e-8);
  CHECK(g.decimated(3).n_samples == 342);
  CHECK(g.decimated(1) == g);
  CHECK_THROWS_AS((TimeGrid{0, 0, 10}.validate()), ArgumentError);
  CHECK_THROWS_AS((TimeGrid{0, 1, 1}.validate()), ArgumentError);
}

TEST_CASE("SignalSet and VoxelGrid shape invariants") {
  SignalSet s(TimeGrid{0, 1, 4}, 3);
  CHECK(s.data.size() == 12);
  s.row(2)[3] = 5.0f;
  CHECK(s.data[11] == 5.0f);
  s.data.pop_back();
  CHECK_THROWS_AS(s.validate(), ArgumentError);

  VoxelGrid g({2, 3, 4}, 0.5, Vec3(1, 2, 3));
  CHECK(g.values.size() == 24);
  CHECK(g.index(1, 2, 3) == 1 + 2 * (2 + 3 * 3));
  CHECK(g.center(1, 0, 2).x == 1.5);
  CHECK(g.center(1, 0, 2).z == 4.0);
  CHECK_THROWS_AS(VoxelGrid({0, 1, 1}, 1, Vec3()), ArgumentError);
}

TEST_CASE("SensorArray validation") {
  SensorArray a;
  a.positions = {Vec3(0, 0, 0)};
  a.sound_speed = 0;
  CHECK_THROWS_AS(a.validate(), ArgumentError);
  a.sound_speed = 1500;
  a.normals = {Vec3(1, 0, 0), Vec3(0, 1, 0)};
  CHECK_THROWS_AS(a.validate(), ArgumentError);
}
