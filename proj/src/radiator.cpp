#include "pacloud/radiator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pacloud/errors.hpp"
#include "pacloud/parallel.hpp"

namespace pacloud {
namespace {

struct KernelBall {
  Vec3 pos;
  double p0;
  double a;
  double inv_2a2;
  double reach; // cutoff_sigma * a
};

std::vector<KernelBall> prepare(const PointCloud &cloud, double cutoff_sigma) {
  std::vector<KernelBall> out(cloud.balls.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto &b = cloud.balls[i];
    const double a = b.a0;
    if (!(a > 0) || !std::isfinite(a))
      throw SimulationError("ball " + std::to_string(i) + ": a0 must be finite and > 0");
    if (!is_finite(b.position) || !std::isfinite(b.p0))
      throw SimulationError("ball " + std::to_string(i) + ": non-finite parameters");
    out[i] = {Vec3(b.position), static_cast<double>(b.p0), a, 1.0 / (2.0 * a * a), cutoff_sigma * a};
  }
  return out;
}

double sensor_distance(const KernelBall &b, const Vec3 &sensor, std::size_t ball_index) {
  const double d = norm(b.pos - sensor);
  if (!(d > 0))
    throw SimulationError("ball " + std::to_string(ball_index) + " coincides with a sensor");
  return d;
}

// Decimated sample indices m (full index m * f) whose time lies within
// half_width of center. The range is padded by one full-rate sample on each
// side; callers apply the exact |u| <= reach predicate per sample.
struct Window {
  std::size_t begin = 0, end = 0; // [begin, end) in decimated indices
};

Window window(const TimeGrid &full, std::size_t f, std::size_t n_out, double center, double half_width) {
  const double lo = (center - half_width - full.t0) / full.dt - 1.0;
  const double hi = (center + half_width - full.t0) / full.dt + 1.0;
  const double last = static_cast<double>(full.n_samples - 1);
  if (hi < 0 || lo > last)
    return {};
  const auto n_lo = static_cast<std::size_t>(std::max(0.0, std::ceil(lo)));
  const auto n_hi = static_cast<std::size_t>(std::min(last, std::floor(hi)));
  if (n_lo > n_hi)
    return {};
  Window w;
  w.begin = (n_lo + f - 1) / f;
  w.end = std::min(n_out, n_hi / f + 1);
  if (w.begin > w.end)
    w.begin = w.end;
  return w;
}

// Shared sample-time expression: every path evaluates the kernel at exactly
// this time for a given full-rate index.
inline double sample_time(const TimeGrid &full, std::size_t full_index) {
  return full.t0 + static_cast<double>(full_index) * full.dt;
}

inline double gaussian(double u, double inv_2a2) { return std::exp(-u * u * inv_2a2); }

void check_decimated(const ForwardContext &ctx, const SignalSet &real, std::size_t f) {
  const TimeGrid expect = ctx.grid.decimated(f);
  if (real.n_sensors != ctx.array.size())
    throw ArgumentError("signal set has " + std::to_string(real.n_sensors) + " sensors, array has " +
                        std::to_string(ctx.array.size()));
  if (!(real.grid == expect))
    throw ArgumentError("signal set time grid does not match the context grid decimated by " +
                        std::to_string(f));
  if (real.data.size() != real.n_sensors * real.grid.n_samples)
    throw ArgumentError("signal set data size does not match its shape");
}

// Accumulates the forward signal of every ball at one sensor into `acc`.
std::uint64_t forward_row(const std::vector<KernelBall> &balls, const Vec3 &sensor, const TimeGrid &full,
                          std::size_t f, double v, std::vector<double> &acc) {
  std::uint64_t evals = 0;
  const std::size_t n_out = acc.size();
  for (std::size_t i = 0; i < balls.size(); ++i) {
    const auto &b = balls[i];
    const double d = sensor_distance(b, sensor, i);
    const double amp = b.p0 / (2.0 * d);
    // u- = d - v t, centered at t = d / v.
    const Window wm = window(full, f, n_out, d / v, b.reach / v);
    for (std::size_t m = wm.begin; m < wm.end; ++m) {
      const double u = d - v * sample_time(full, m * f);
      if (std::abs(u) <= b.reach) {
        acc[m] += amp * u * gaussian(u, b.inv_2a2);
        ++evals;
      }
    }
    // u+ = d + v t, centered at t = -d / v; only reachable in the near field.
    {
      const Window wp = window(full, f, n_out, -d / v, b.reach / v);
      for (std::size_t m = wp.begin; m < wp.end; ++m) {
        const double u = d + v * sample_time(full, m * f);
        if (std::abs(u) <= b.reach) {
          acc[m] += amp * u * gaussian(u, b.inv_2a2);
          ++evals;
        }
      }
    }
  }
  return evals;
}

SignalSet simulate_impl(const PointCloud &cloud, const ForwardContext &ctx, std::size_t f) {
  ctx.validate();
  if (f < 1)
    throw ArgumentError("decimation factor must be >= 1");
  const auto balls = prepare(cloud, ctx.cutoff_sigma);
  SignalSet out(ctx.grid.decimated(f), ctx.array.size());
  const double v = ctx.array.sound_speed;
  std::vector<std::uint64_t> evals(ctx.array.size(), 0);
  parallel_for(ctx.array.size(), [&](std::size_t j) {
    std::vector<double> acc(out.grid.n_samples, 0.0);
    evals[j] = forward_row(balls, ctx.array.positions[j], ctx.grid, f, v, acc);
    auto row = out.row(j);
    for (std::size_t m = 0; m < acc.size(); ++m)
      row[m] = static_cast<float>(acc[m]);
  });
  if (ctx.counter) {
    std::uint64_t total = 0;
    for (auto e : evals)
      total += e;
    ctx.counter->forward += total;
  }
  return out;
}

struct Residual {
  double loss = 0.0;
  std::vector<double> r; // sensor-major, decimated grid
  std::size_t n_out = 0;
};

// Forward pass, rounded to storage precision, minus the measurement.
Residual residual(const PointCloud &cloud, const ForwardContext &ctx, const SignalSet &real, std::size_t f) {
  check_decimated(ctx, real, f);
  const SignalSet sim = simulate_impl(cloud, ctx, f);
  Residual res;
  res.n_out = real.grid.n_samples;
  res.r.resize(sim.data.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < res.r.size(); ++k) {
    res.r[k] = static_cast<double>(sim.data[k]) - static_cast<double>(real.data[k]);
    sum += res.r[k] * res.r[k];
  }
  res.loss = sum / static_cast<double>(res.r.size());
  return res;
}

enum class Want { p0, p0_a0, all };

void gradients_impl(const PointCloud &cloud, const ForwardContext &ctx, const Residual &res, std::size_t f,
                    Want want, ParamGradients &grads) {
  const auto balls = prepare(cloud, ctx.cutoff_sigma);
  const double v = ctx.array.sound_speed;
  const double scale = 2.0 / static_cast<double>(res.r.size());
  const std::size_t n_out = res.n_out;
  grads.assign(balls.size(), {});
  std::vector<std::uint64_t> evals(balls.size(), 0);
  parallel_for(balls.size(), [&](std::size_t i) {
    const auto &b = balls[i];
    const double inv_a2 = 1.0 / (b.a * b.a);
    double g_p0 = 0.0, g_a0 = 0.0;
    Vec3 g_pos;
    std::uint64_t count = 0;
    for (std::size_t j = 0; j < ctx.array.size(); ++j) {
      const Vec3 &sensor = ctx.array.positions[j];
      const double d = sensor_distance(b, sensor, i);
      const double *r = res.r.data() + j * n_out;
      // Sums over samples of r * (unit kernel), r * u^3 G, r * h'(u).
      double sk = 0.0, su3 = 0.0, sdh = 0.0;
      const Window wm = window(ctx.grid, f, n_out, d / v, b.reach / v);
      for (std::size_t m = wm.begin; m < wm.end; ++m) {
        const double u = d - v * sample_time(ctx.grid, m * f);
        if (std::abs(u) > b.reach)
          continue;
        const double g = gaussian(u, b.inv_2a2);
        ++count;
        sk += r[m] * u * g;
        if (want != Want::p0) {
          su3 += r[m] * u * u * u * g;
          sdh += r[m] * g * (1.0 - u * u * inv_a2);
        }
      }
      {
        const Window wp = window(ctx.grid, f, n_out, -d / v, b.reach / v);
        for (std::size_t m = wp.begin; m < wp.end; ++m) {
          const double u = d + v * sample_time(ctx.grid, m * f);
          if (std::abs(u) > b.reach)
            continue;
          const double g = gaussian(u, b.inv_2a2);
          ++count;
          sk += r[m] * u * g;
          if (want != Want::p0) {
            su3 += r[m] * u * u * u * g;
            sdh += r[m] * g * (1.0 - u * u * inv_a2);
          }
        }
      }
      const double inv_2d = 1.0 / (2.0 * d);
      // dL/dp0 uses the unit-pressure kernel k = (h- + h+) / (2d).
      g_p0 += sk * inv_2d;
      if (want != Want::p0)
        g_a0 += b.p0 * inv_2d * su3 * inv_a2 / b.a;
      if (want == Want::all) {
        // ds/dd = -s/d + p0/(2d) (h'- + h'+)
        const double dd = b.p0 * inv_2d * (sdh - sk / d);
        g_pos += (b.pos - sensor) * (dd / d);
      }
    }
    grads[i].d_p0 = scale * g_p0;
    grads[i].d_a0 = scale * g_a0;
    grads[i].d_position = g_pos * scale;
    evals[i] = count;
  });
  if (ctx.counter) {
    std::uint64_t total = 0;
    for (auto e : evals)
      total += e;
    ctx.counter->backward += total;
  }
}

} // namespace

void ForwardContext::validate() const {
  array.validate();
  grid.validate();
  if (!(cutoff_sigma >= 4.0))
    throw ArgumentError("ForwardContext: cutoff_sigma must be >= 4");
}

SignalSet simulate_signals(const PointCloud &cloud, const ForwardContext &ctx) {
  return simulate_impl(cloud, ctx, 1);
}

SignalSet simulate_at_rate(const PointCloud &cloud, const ForwardContext &ctx, std::size_t f) {
  return simulate_impl(cloud, ctx, f);
}

double loss(const SignalSet &sim, const SignalSet &real) {
  if (sim.n_sensors != real.n_sensors || !(sim.grid == real.grid) || sim.data.size() != real.data.size())
    throw ArgumentError("loss: signal sets differ in shape or time grid");
  if (sim.data.empty())
    return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < sim.data.size(); ++k) {
    const double r = static_cast<double>(sim.data[k]) - static_cast<double>(real.data[k]);
    sum += r * r;
  }
  return sum / static_cast<double>(sim.data.size());
}

BackwardResult backward(const PointCloud &cloud, const ForwardContext &ctx, const SignalSet &real, Stage stage,
                        std::size_t f) {
  const Residual res = residual(cloud, ctx, real, f);
  BackwardResult out;
  out.loss = res.loss;
  gradients_impl(cloud, ctx, res, f, stage == Stage::coarse ? Want::p0_a0 : Want::all, out.gradients);
  return out;
}

PressureGradient pressure_gradient(const PointCloud &cloud, const ForwardContext &ctx, const SignalSet &real,
                                   std::size_t f) {
  const Residual res = residual(cloud, ctx, real, f);
  ParamGradients grads;
  gradients_impl(cloud, ctx, res, f, Want::p0, grads);
  PressureGradient out;
  out.loss = res.loss;
  out.d_p0.resize(grads.size());
  for (std::size_t i = 0; i < grads.size(); ++i)
    out.d_p0[i] = grads[i].d_p0;
  return out;
}

SignalSet downsample(const SignalSet &real, std::size_t f) {
  if (f < 1)
    throw ArgumentError("downsample: factor must be >= 1");
  SignalSet out(real.grid.decimated(f), real.n_sensors);
  for (std::size_t j = 0; j < real.n_sensors; ++j) {
    const auto src = real.row(j);
    auto dst = out.row(j);
    for (std::size_t m = 0; m < dst.size(); ++m)
      dst[m] = src[m * f];
  }
  return out;
}

} // namespace pacloud
