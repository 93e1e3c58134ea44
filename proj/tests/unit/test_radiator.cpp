#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "../support/instances.hpp"
#include "../support/oracles.hpp"
#include "pacloud/errors.hpp"
#include "pacloud/parallel.hpp"
#include "pacloud/radiator.hpp"

using namespace pacloud;

namespace {

double max_abs(const std::vector<float> &v) {
  double m = 0;
  for (float x : v)
    m = std::max(m, std::abs(static_cast<double>(x)));
  return m;
}

SensorArray single_sensor(const Vec3 &p) {
  SensorArray a;
  a.positions = {p};
  return a;
}

} // namespace

TEST_CASE("empty cloud simulates to zeros") {
  const auto ctx = fixture::small_context();
  const auto s = simulate_signals(PointCloud{}, ctx);
  CHECK(s.n_sensors == 16);
  CHECK(s.data.size() == 16 * 256);
  CHECK(max_abs(s.data) == 0.0);
}

TEST_CASE("N-shape of a single ball at 30 mm") {
  PointCloud c;
  SourceBall b;
  b.p0 = 1.0f;
  b.a0 = 0.5e-3f;
  c.balls.push_back(b);
  const double d = 0.030, v = 1500.0;
  // Dense grid: 1 ns samples around t = d / v = 20 us, with t = d / v on a sample.
  const TimeGrid grid{d / v - 2000e-9, 1e-9, 4001};
  const ForwardContext ctx{single_sensor(Vec3(d, 0, 0)), grid, 6.0, nullptr};
  const auto s = simulate_signals(c, ctx);
  CHECK(std::abs(s.data[2000]) < 1e-10);
  const auto mx = std::max_element(s.data.begin(), s.data.end()) - s.data.begin();
  const auto mn = std::min_element(s.data.begin(), s.data.end()) - s.data.begin();
  // Positive lobe first (u- > 0 before arrival), extremes at u- = +-a0.
  CHECK(mx < 2000);
  CHECK(mn > 2000);
  CHECK(std::abs((2000 - mx) - (mn - 2000)) <= 1);
  CHECK(std::abs((2000 - mx) * 1e-9 * v - 0.5e-3) <= 1.5e-9 * v);
}

TEST_CASE("simulation matches the double-precision oracle") {
  const auto ctx = fixture::small_context();
  const auto cloud = fixture::random_cloud(10, 1);
  const auto s = simulate_signals(cloud, ctx);
  const auto ref = oracle::simulate(oracle::to_double(cloud), ctx.array.positions, ctx.array.sound_speed, ctx.grid,
                                    ctx.cutoff_sigma);
  const double scale = max_abs(s.data);
  REQUIRE(scale > 0);
  for (std::size_t q = 0; q < ref.size(); ++q)
    REQUIRE(std::abs(s.data[q] - ref[q]) <= 1e-6 * scale);
}

TEST_CASE("linearity in p0 is exact") {
  const auto ctx = fixture::small_context();
  auto cloud = fixture::random_cloud(10, 2);
  const auto s1 = simulate_signals(cloud, ctx);
  for (auto &b : cloud.balls)
    b.p0 *= 2.0f;
  const auto s2 = simulate_signals(cloud, ctx);
  for (std::size_t q = 0; q < s1.data.size(); ++q)
    REQUIRE(s2.data[q] == 2.0f * s1.data[q]);
}

TEST_CASE("superposition") {
  const auto ctx = fixture::small_context();
  const auto a = fixture::random_cloud(6, 3), b = fixture::random_cloud(7, 4);
  PointCloud ab = a;
  ab.balls.insert(ab.balls.end(), b.balls.begin(), b.balls.end());
  const auto sa = simulate_signals(a, ctx), sb = simulate_signals(b, ctx), sab = simulate_signals(ab, ctx);
  const double scale = max_abs(sab.data);
  for (std::size_t q = 0; q < sab.data.size(); ++q)
    REQUIRE(std::abs(static_cast<double>(sab.data[q]) - (static_cast<double>(sa.data[q]) + sb.data[q])) <=
            1e-6 * scale);
}

TEST_CASE("radial translation shifts the N-shape") {
  const double v = 1500.0, dt = 50e-9;
  const ForwardContext ctx{single_sensor(Vec3(0.02, 0, 0)), TimeGrid{0, dt, 1024}, 6.0, nullptr};
  PointCloud c;
  SourceBall b;
  b.p0 = 1.0f;
  b.a0 = 0.6e-3f;
  c.balls.push_back(b);
  const auto s0 = simulate_signals(c, ctx);
  const int shift = 37;
  c.balls[0].position.x = static_cast<float>(-shift * v * dt);
  const auto s1 = simulate_signals(c, ctx);
  int best = 0;
  double best_corr = -1;
  for (int lag = 0; lag < 100; ++lag) {
    double corr = 0;
    for (std::size_t n = 0; n + lag < 1024; ++n)
      corr += static_cast<double>(s0.data[n]) * s1.data[n + lag];
    if (corr > best_corr) {
      best_corr = corr;
      best = lag;
    }
  }
  CHECK(best == shift);
}

TEST_CASE("raising the cutoff from 6 to 12 sigma is invisible") {
  const auto cloud = fixture::random_cloud(10, 5);
  const auto s6 = simulate_signals(cloud, fixture::small_context(6.0));
  const auto s12 = simulate_signals(cloud, fixture::small_context(12.0));
  const double scale = max_abs(s12.data);
  for (std::size_t q = 0; q < s6.data.size(); ++q)
    REQUIRE(std::abs(static_cast<double>(s6.data[q]) - s12.data[q]) <= 1e-7 * scale);
}

TEST_CASE("ball on a sensor and invalid a0 are simulation errors") {
  auto ctx = fixture::small_context();
  PointCloud c;
  SourceBall b;
  b.p0 = 1.0f;
  b.a0 = 1e-3f;
  ctx.array.positions[3] = Vec3(0.015625, 0, 0);
  b.position = Vec3f(ctx.array.positions[3]);
  c.balls.push_back(b);
  CHECK_THROWS_AS(simulate_signals(c, ctx), SimulationError);
  c.balls[0].position = Vec3f();
  c.balls[0].a0 = 0.0f;
  CHECK_THROWS_AS(simulate_signals(c, ctx), SimulationError);
  ctx.cutoff_sigma = 3.0;
  c.balls[0].a0 = 1e-3f;
  CHECK_THROWS_AS(simulate_signals(c, ctx), ArgumentError);
}

TEST_CASE("loss") {
  const auto ctx = fixture::small_context();
  const auto s = simulate_signals(fixture::random_cloud(5, 6), ctx);
  CHECK(loss(s, s) == 0.0);
  SignalSet shifted = s;
  for (auto &x : shifted.data)
    x = 0.25f;
  SignalSet zero = s;
  std::fill(zero.data.begin(), zero.data.end(), 0.0f);
  CHECK(loss(shifted, zero) == 0.0625);

  SUBCASE("matches a two-pass summation oracle") {
    const auto t = simulate_signals(fixture::random_cloud(5, 7), ctx);
    // First pass: per-row sums; second pass: sum of rows, in reverse.
    std::vector<double> rows(s.n_sensors, 0.0);
    for (std::size_t j = 0; j < s.n_sensors; ++j)
      for (std::size_t n = 0; n < s.grid.n_samples; ++n) {
        const double d = static_cast<double>(s.row(j)[n]) - t.row(j)[n];
        rows[j] += d * d;
      }
    double total = 0;
    for (std::size_t j = rows.size(); j-- > 0;)
      total += rows[j];
    const double expect = total / static_cast<double>(s.data.size());
    CHECK(std::abs(loss(s, t) - expect) <= 1e-12 * expect);
  }
  SUBCASE("shape mismatch") {
    SignalSet other(TimeGrid{5e-6, 50e-9, 128}, 16);
    CHECK_THROWS_AS(loss(s, other), ArgumentError);
  }
}

TEST_CASE("backward at a perfect fit") {
  const auto ctx = fixture::small_context();
  const auto cloud = fixture::random_cloud(10, 8);
  const auto real = simulate_signals(cloud, ctx);
  const auto br = backward(cloud, ctx, real, Stage::fine);
  CHECK(br.loss == 0.0);
  for (const auto &g : br.gradients) {
    CHECK(g.d_p0 == 0.0);
    CHECK(g.d_a0 == 0.0);
    CHECK(g.d_position == Vec3());
  }
}

TEST_CASE("coarse stage forces zero position gradients") {
  const auto ctx = fixture::small_context();
  const auto real = simulate_signals(fixture::random_cloud(10, 9), ctx);
  const auto cloud = fixture::random_cloud(10, 10);
  const auto coarse = backward(cloud, ctx, real, Stage::coarse);
  const auto fine = backward(cloud, ctx, real, Stage::fine);
  CHECK(coarse.loss == fine.loss);
  bool any_fine = false;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK(coarse.gradients[i].d_position == Vec3());
    CHECK(coarse.gradients[i].d_p0 == fine.gradients[i].d_p0);
    CHECK(coarse.gradients[i].d_a0 == fine.gradients[i].d_a0);
    any_fine = any_fine || norm(fine.gradients[i].d_position) > 0;
  }
  CHECK(any_fine);
}

TEST_CASE("analytic gradients match central differences of the oracle loss") {
  // A wide cutoff keeps the truncated kernel smooth under perturbation.
  const auto ctx = fixture::small_context(10.0);
  const auto real = simulate_signals(fixture::random_cloud(10, 11), ctx);
  const auto cloud = fixture::random_cloud(10, 12);
  const auto br = backward(cloud, ctx, real, Stage::fine);
  const auto base = oracle::to_double(cloud);
  const auto oracle_loss = [&](const std::vector<oracle::Ball> &balls) {
    return oracle::loss(oracle::simulate(balls, ctx.array.positions, ctx.array.sound_speed, ctx.grid, 10.0), real);
  };
  for (std::size_t i = 0; i < base.size(); ++i) {
    for (int p = 0; p < 5; ++p) {
      const double h = p == 0 ? 1e-3 : 1e-3 * base[i].a0;
      auto plus = base, minus = base;
      const auto bump = [&](std::vector<oracle::Ball> &bs, double s) {
        if (p == 0)
          bs[i].p0 += s;
        else if (p == 1)
          bs[i].a0 += s;
        else
          bs[i].pos[p - 2] += s;
      };
      bump(plus, h);
      bump(minus, -h);
      const double fd = (oracle_loss(plus) - oracle_loss(minus)) / (2 * h);
      const auto &g = br.gradients[i];
      const double an = p == 0 ? g.d_p0 : p == 1 ? g.d_a0 : g.d_position[p - 2];
      CAPTURE(i);
      CAPTURE(p);
      CHECK(std::abs(fd - an) <= 1e-5 * std::max(std::abs(fd), std::abs(an)));
    }
  }
}

TEST_CASE("downsample") {
  const auto ctx = fixture::small_context();
  const auto s = simulate_signals(fixture::random_cloud(4, 13), ctx);
  const auto d1 = downsample(s, 1);
  CHECK(d1.grid == s.grid);
  CHECK(d1.data == s.data);
  CHECK_THROWS_AS(downsample(s, 0), ArgumentError);

  SignalSet full(TimeGrid{0, 25e-9, 4900}, 2);
  CHECK(downsample(full, 4).grid.n_samples == 1225);
  CHECK(downsample(full, 4).grid.dt == 100e-9);

  const auto d16 = downsample(s, 16);
  const auto d16_1 = downsample(d16, 1);
  CHECK(d16_1.data == d16.data);
  for (std::size_t j = 0; j < s.n_sensors; ++j)
    for (std::size_t m = 0; m < d16.grid.n_samples; ++m)
      REQUIRE(d16.row(j)[m] == s.row(j)[m * 16]);
}

TEST_CASE("simulate_at_rate equals decimated full-rate simulation") {
  auto ctx = fixture::small_context();
  const auto cloud = fixture::random_cloud(10, 14);
  const auto full = simulate_signals(cloud, ctx);
  CHECK(simulate_at_rate(cloud, ctx, 1).data == full.data);
  for (std::size_t f : {2u, 3u, 4u, 16u}) {
    const auto direct = simulate_at_rate(cloud, ctx, f);
    const auto decimated = downsample(full, f);
    CHECK(direct.grid == decimated.grid);
    CHECK(direct.data == decimated.data);
  }
}

TEST_CASE("evaluation count scales with 1/f") {
  EvalCounter counter;
  auto ctx = fixture::small_context();
  ctx.counter = &counter;
  const auto cloud = fixture::random_cloud(10, 15);
  simulate_at_rate(cloud, ctx, 1);
  const double full = static_cast<double>(counter.forward.load());
  counter.reset();
  simulate_at_rate(cloud, ctx, 16);
  const double coarse = static_cast<double>(counter.forward.load());
  CHECK(full > 0);
  CHECK(coarse / full == doctest::Approx(1.0 / 16).epsilon(0.25));
}

TEST_CASE("results do not depend on the worker count") {
  const auto ctx = fixture::small_context();
  const auto real = simulate_signals(fixture::random_cloud(10, 16), ctx);
  const auto cloud = fixture::random_cloud(40, 17);
  const std::size_t saved = thread_count();
  set_thread_count(1);
  const auto s1 = simulate_signals(cloud, ctx);
  const auto b1 = backward(cloud, ctx, real, Stage::fine);
  set_thread_count(7);
  const auto s7 = simulate_signals(cloud, ctx);
  const auto b7 = backward(cloud, ctx, real, Stage::fine);
  set_thread_count(saved);
  CHECK(s1.data == s7.data);
  CHECK(b1.loss == b7.loss);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK(b1.gradients[i].d_p0 == b7.gradients[i].d_p0);
    CHECK(b1.gradients[i].d_a0 == b7.gradients[i].d_a0);
    CHECK(b1.gradients[i].d_position == b7.gradients[i].d_position);
  }
}

TEST_CASE("pressure_gradient agrees with backward") {
  const auto ctx = fixture::small_context();
  const auto real = simulate_signals(fixture::random_cloud(10, 18), ctx);
  const auto cloud = fixture::random_cloud(10, 19);
  const auto pg = pressure_gradient(cloud, ctx, downsample(real, 4), 4);
  const auto br = backward(cloud, ctx, downsample(real, 4), Stage::coarse, 4);
  CHECK(pg.loss == br.loss);
  for (std::size_t i = 0; i < cloud.size(); ++i)
    CHECK(pg.d_p0[i] == br.gradients[i].d_p0);
}
