#include "pacloud/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pacloud/errors.hpp"

namespace pacloud {
namespace {

constexpr int kP0 = 0, kA0 = 1, kX = 2;

Vec3 random_unit(CounterRng &rng) {
  for (;;) {
    const Vec3 v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double n2 = dot(v, v);
    if (n2 > 1e-6 && n2 <= 1.0)
      return v / std::sqrt(n2);
  }
}

double median(std::vector<double> v) {
  if (v.empty())
    return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1)
    return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

[[noreturn]] void fail_non_finite(const OptimState &state, std::size_t ball, const char *what, double loss,
                                  const BallGradient &g) {
  std::ostringstream os;
  os << "non-finite " << what << " at step " << state.steps << ", ball " << ball << " of " << state.cloud.size()
     << ": loss=" << loss << " d_p0=" << g.d_p0 << " d_a0=" << g.d_a0 << " d_pos=(" << g.d_position.x << ","
     << g.d_position.y << "," << g.d_position.z << ")";
  if (ball < state.cloud.size()) {
    const auto &b = state.cloud.balls[ball];
    os << " p0=" << b.p0 << " a0=" << b.a0 << " pos=(" << b.position.x << "," << b.position.y << ","
       << b.position.z << ")";
  }
  throw OptimizationError(os.str());
}

struct AdamStep {
  const AdamConfig &cfg;
  double c1, c2; // bias corrections

  AdamStep(const AdamConfig &c, std::uint32_t age)
      : cfg(c), c1(1.0 - std::pow(c.beta1, age)), c2(1.0 - std::pow(c.beta2, age)) {}

  double operator()(double &m, double &v, double g, double lr) const {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    return lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps);
  }
};

void check_gradients(const OptimState &state, double loss, const ParamGradients &grads) {
  if (!std::isfinite(loss))
    fail_non_finite(state, state.cloud.size(), "loss", loss, {});
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto &g = grads[i];
    if (!std::isfinite(g.d_p0) || !std::isfinite(g.d_a0) || !is_finite(g.d_position))
      fail_non_finite(state, i, "gradient", loss, g);
  }
}

} // namespace

void Schedule::validate() const {
  if (levels.empty())
    throw ArgumentError("schedule: at least one level required");
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (levels[k].factor < 1)
      throw ArgumentError("schedule: level factor must be >= 1");
    if (k > 0 && levels[k].factor > levels[k - 1].factor)
      throw ArgumentError("schedule: factors must be non-increasing");
  }
  if (levels.back().factor != 1)
    throw ArgumentError("schedule: final level must run at full rate (factor 1)");
  if (duplication_period < 1 || coarse_period < 1)
    throw ArgumentError("schedule: density-control periods must be >= 1");
}

Schedule Schedule::preset(std::string_view name, std::array<std::size_t, 3> iters) {
  std::array<std::size_t, 3> f;
  if (name == "sim-16-4-1")
    f = {16, 4, 1};
  else if (name == "invivo-4-2-1")
    f = {4, 2, 1};
  else
    throw ArgumentError("unknown schedule preset '" + std::string(name) + "'");
  Schedule s;
  s.levels = {{f[0], iters[0], Stage::coarse}, {f[1], iters[1], Stage::fine}, {f[2], iters[2], Stage::fine}};
  return s;
}

DensityThresholds DensityThresholds::for_voxel(double spacing) {
  DensityThresholds t;
  t.split_a0 = 2.0 * spacing;
  t.a0_min = 0.25 * spacing;
  t.a0_max = 10.0 * spacing;
  return t;
}

void DensityThresholds::validate() const {
  if (!(destroy_p0_frac > 0) || !(split_a0 > 0) || !(duplicate_grad_quantile > 0) || !(a0_min > 0) ||
      !(a0_max > 0))
    throw ArgumentError("density thresholds must all be positive");
  if (!(duplicate_grad_quantile < 1))
    throw ArgumentError("duplicate_grad_quantile must be < 1");
  if (!(a0_min < split_a0 && split_a0 < a0_max))
    throw ArgumentError("density thresholds require a0_min < split_a0 < a0_max");
}

LearningRates LearningRates::for_voxel(double spacing) {
  LearningRates lr;
  lr.a0 = 0.1 * spacing;
  lr.position = 0.05 * spacing;
  return lr;
}

OptimState::OptimState(PointCloud c, LearningRates rates, AdamConfig cfg, RngSeed s)
    : cloud(std::move(c)), lr(rates), adam(cfg), seed(s) {
  reset_moments();
}

void OptimState::reset_moments() {
  const std::size_t n = cloud.size();
  m1.assign(n, {});
  m2.assign(n, {});
  age.assign(n, 0);
  position_grad_norm.assign(n, 0.0);
}

FilterResult zero_gradient_filter(const PointCloud &cloud, const ForwardContext &ctx, const SignalSet &real,
                                  std::size_t f, FilterPredicate predicate) {
  if (cloud.empty())
    throw ArgumentError("zero_gradient_filter: empty cloud");
  if (f < 1)
    throw ArgumentError("zero_gradient_filter: factor must be >= 1");
  PointCloud zeroed = cloud;
  for (auto &b : zeroed.balls)
    b.p0 = 0.0f;
  const SignalSet real_k = downsample(real, f);
  PressureGradient pg = pressure_gradient(zeroed, ctx, real_k, f);

  FilterResult out;
  out.cloud.generation = cloud.generation;
  out.report.n_input = cloud.size();
  bool any_nonzero = false;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double g = pg.d_p0[i];
    any_nonzero = any_nonzero || g != 0.0;
    const bool keep = predicate == FilterPredicate::strict ? g < 0.0 : g <= 0.0;
    if (keep)
      out.cloud.balls.push_back(cloud.balls[i]); // original p0 restored
  }
  out.report.n_retained = out.cloud.size();
  out.report.no_evidence = out.report.n_retained == 0 || !any_nonzero;
  out.report.gradients = std::move(pg.d_p0);
  return out;
}

double step(OptimState &state, const ForwardContext &ctx, const SignalSet &real_k, std::size_t f, Stage stage) {
  const std::size_t n = state.cloud.size();
  if (state.m1.size() != n || state.m2.size() != n || state.age.size() != n)
    throw ArgumentError("step: optimizer state does not track the cloud size");
  const BackwardResult br = backward(state.cloud, ctx, real_k, stage, f);
  check_gradients(state, br.loss, br.gradients);
  ++state.steps;
  for (std::size_t i = 0; i < n; ++i) {
    auto &ball = state.cloud.balls[i];
    const auto &g = br.gradients[i];
    auto &m = state.m1[i];
    auto &v = state.m2[i];
    const AdamStep adam(state.adam, ++state.age[i]);
    ball.p0 = static_cast<float>(ball.p0 - adam(m[kP0], v[kP0], g.d_p0, state.lr.p0));
    const double a0 = ball.a0 - adam(m[kA0], v[kA0], g.d_a0, state.lr.a0);
    ball.a0 = static_cast<float>(std::max(a0, state.a0_floor));
    if (stage == Stage::fine) {
      for (int k = 0; k < 3; ++k)
        ball.position[k] =
            static_cast<float>(ball.position[k] - adam(m[kX + k], v[kX + k], g.d_position[k], state.lr.position));
      state.position_grad_norm[i] = norm(g.d_position);
    }
  }
  return br.loss;
}

DensityEvent density_control(OptimState &state, const DensityThresholds &thresholds, Stage stage, bool duplicate) {
  thresholds.validate();
  DensityEvent ev;
  ev.step = state.steps;
  const std::size_t n = state.cloud.size();
  CounterRng rng(state.seed, 0x5eed0000ULL + state.cloud.generation);

  OptimState next;
  next.cloud.generation = state.cloud.generation + 1;
  auto keep = [&](std::size_t i, const SourceBall &b, bool fresh) {
    next.cloud.balls.push_back(b);
    next.m1.push_back(fresh ? std::array<double, 5>{} : state.m1[i]);
    next.m2.push_back(fresh ? std::array<double, 5>{} : state.m2[i]);
    next.age.push_back(fresh ? 0 : state.age[i]);
    next.position_grad_norm.push_back(fresh ? 0.0 : state.position_grad_norm[i]);
  };

  std::vector<double> p0s(n);
  for (std::size_t i = 0; i < n; ++i)
    p0s[i] = state.cloud.balls[i].p0;
  const double p0_cut = thresholds.destroy_p0_frac * median(std::move(p0s));

  for (std::size_t i = 0; i < n; ++i) {
    const auto &b = state.cloud.balls[i];
    if (b.p0 < p0_cut || b.a0 < thresholds.a0_min || b.a0 > thresholds.a0_max) {
      ++ev.destroyed;
      continue;
    }
    if (b.a0 > thresholds.split_a0) {
      const Vec3 u = random_unit(rng);
      const float a_child = static_cast<float>(b.a0 / std::sqrt(2.0));
      const Vec3 offset = u * (0.5 * b.a0);
      for (double sign : {1.0, -1.0}) {
        SourceBall c = b;
        c.a0 = a_child;
        c.p0 = 0.5f * b.p0;
        c.position = Vec3f(Vec3(b.position) + offset * sign);
        keep(i, c, true);
      }
      ++ev.split;
      continue;
    }
    keep(i, b, false);
  }

  if (duplicate && stage == Stage::fine && !next.cloud.empty()) {
    const std::size_t m = next.cloud.size();
    const auto n_dup = static_cast<std::size_t>(
        std::ceil((1.0 - thresholds.duplicate_grad_quantile) * static_cast<double>(m) - 1e-9));
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return next.position_grad_norm[a] > next.position_grad_norm[b];
    });
    for (std::size_t r = 0; r < std::min(n_dup, m); ++r) {
      const std::size_t src = order[r];
      // Original and copy share the pressure so the simulated signal barely moves.
      next.cloud.balls[src].p0 *= 0.5f;
      SourceBall c = next.cloud.balls[src];
      const Vec3 jitter = random_unit(rng) * (0.25 * c.a0);
      c.position = Vec3f(Vec3(c.position) + jitter);
      next.cloud.balls.push_back(c);
      next.m1.push_back({});
      next.m2.push_back({});
      next.age.push_back(0);
      next.position_grad_norm.push_back(0.0);
      ++ev.duplicated;
    }
  }

  state.cloud = std::move(next.cloud);
  state.m1 = std::move(next.m1);
  state.m2 = std::move(next.m2);
  state.age = std::move(next.age);
  state.position_grad_norm = std::move(next.position_grad_norm);
  return ev;
}

RunResult run_hierarchical(const PointCloud &init, const ForwardContext &ctx, const SignalSet &real,
                           const Schedule &schedule, const DensityThresholds &thresholds,
                           const RunOptions &options) {
  schedule.validate();
  thresholds.validate();
  RunResult result;
  result.state = OptimState(init, options.lr, options.adam, options.seed);
  result.state.a0_floor = options.a0_floor;
  auto &state = result.state;
  const auto t_start = std::chrono::steady_clock::now();

  for (std::size_t k = 0; k < schedule.levels.size() && !result.stopped_by_monitor; ++k) {
    const Level &level = schedule.levels[k];
    if (level.max_iters == 0)
      continue;
    const SignalSet real_k = downsample(real, level.factor);
    if (options.reset_moments_per_level && k > 0)
      state.reset_moments();
    const std::size_t period = level.stage == Stage::coarse ? schedule.coarse_period : schedule.duplication_period;
    std::vector<double> history;
    for (std::size_t it = 0; it < level.max_iters; ++it) {
      if (state.cloud.empty())
        throw OptimizationError("all points destroyed (level " + std::to_string(k) + ", step " +
                                std::to_string(state.steps) + ")");
      const double loss = step(state, ctx, real_k, level.factor, level.stage);
      const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
      result.trace.rows.push_back({state.steps, elapsed, loss, state.cloud.size(), k});
      if ((it + 1) % period == 0 && it + 1 < level.max_iters) {
        auto ev = density_control(state, thresholds, level.stage, level.stage == Stage::fine);
        result.trace.events.push_back(ev);
      }
      if (options.monitor && options.monitor(Progress{state.steps, k, loss, state})) {
        result.stopped_by_monitor = true;
        break;
      }
      history.push_back(loss);
      const std::size_t w = options.converge_window;
      if (w > 0 && history.size() > w) {
        const double old = history[history.size() - 1 - w];
        if (old > 0 && std::abs(old - loss) / old < options.converge_tol)
          break;
        if (old == 0 && loss == 0)
          break;
      }
    }
  }
  if (state.cloud.empty())
    throw OptimizationError("all points destroyed");
  result.cloud = state.cloud;
  return result;
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double inverse_softplus(double y) {
  if (!(y > 0))
    throw ArgumentError("inverse_softplus: argument must be > 0");
  // log(e^y - 1) = y + log(1 - e^-y)
  return y + std::log(-std::expm1(-y));
}

double sigmoid(double x) {
  if (x >= 0)
    return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

PointCloud positivity_refine(OptimState &state, const ForwardContext &ctx, const SignalSet &real,
                             std::size_t iters) {
  for (std::size_t i = 0; i < state.cloud.size(); ++i)
    if (!(state.cloud.balls[i].a0 > 0))
      throw ArgumentError("positivity_refine: ball " + std::to_string(i) + " has a0 <= 0");
  // Keeps softplus(a0_free) a normal single-precision number.
  constexpr double kFreeMin = -80.0;
  for (auto &b : state.cloud.balls)
    b.a0_free = static_cast<float>(inverse_softplus(b.a0));
  // The parameterization changes, so moments and bias-correction ages restart.
  state.reset_moments();
  // a0 is a function of a0_free from here on.
  for (auto &b : state.cloud.balls)
    b.a0 = static_cast<float>(softplus(b.a0_free));

  for (std::size_t it = 0; it < iters; ++it) {
    if (state.cloud.empty())
      break;
    const BackwardResult br = backward(state.cloud, ctx, real, Stage::fine, 1);
    check_gradients(state, br.loss, br.gradients);
    ++state.steps;
    for (std::size_t i = 0; i < state.cloud.size(); ++i) {
      auto &ball = state.cloud.balls[i];
      const auto &g = br.gradients[i];
      auto &m = state.m1[i];
      auto &v = state.m2[i];
      const AdamStep adam(state.adam, ++state.age[i]);
      ball.p0 = static_cast<float>(ball.p0 - adam(m[kP0], v[kP0], g.d_p0, state.lr.p0));
      const double g_free = g.d_a0 * sigmoid(ball.a0_free);
      const double free = std::max(kFreeMin, ball.a0_free - adam(m[kA0], v[kA0], g_free, state.lr.a0_free));
      ball.a0_free = static_cast<float>(free);
      ball.a0 = static_cast<float>(softplus(ball.a0_free));
      for (int k = 0; k < 3; ++k)
        ball.position[k] =
            static_cast<float>(ball.position[k] - adam(m[kX + k], v[kX + k], g.d_position[k], state.lr.position));
    }
  }
  return state.cloud;
}

} // namespace pacloud
