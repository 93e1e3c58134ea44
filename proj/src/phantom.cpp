#include "pacloud/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "pacloud/errors.hpp"
#include "pacloud/radiator.hpp"

namespace pacloud {
namespace {

constexpr std::uint64_t kBallStream = 3;
constexpr std::uint64_t kTubeStream = 4;
constexpr std::uint64_t kNoiseStream = 5;

SourceBall make_ball(const Vec3 &p, double p0, double a0) {
  SourceBall b;
  b.position = Vec3f(p);
  b.p0 = static_cast<float>(p0);
  b.a0 = static_cast<float>(a0);
  return b;
}

PointCloud place_balls(const PhantomSpec &spec) {
  PointCloud cloud;
  if (!spec.fixed.empty()) {
    cloud.balls = spec.fixed;
    return cloud;
  }
  std::unique_ptr<InsideTester> tester;
  Box box = spec.box;
  if (spec.mesh) {
    tester = std::make_unique<InsideTester>(*spec.mesh);
    const auto bounds = spec.mesh->bounds();
    box = {bounds[0], bounds[1]};
  }
  CounterRng rng(spec.seed, kBallStream);
  const std::size_t max_trials = 10000 * std::max<std::size_t>(spec.count, 1);
  const double sep2 = spec.min_separation * spec.min_separation;
  std::size_t trials = 0;
  while (cloud.size() < spec.count) {
    if (++trials > max_trials)
      throw ArgumentError("generate_phantom: region too small for " + std::to_string(spec.count) +
                          " balls at separation " + std::to_string(spec.min_separation) + " m");
    const Vec3 p(rng.uniform(box.lo.x, box.hi.x), rng.uniform(box.lo.y, box.hi.y),
                 rng.uniform(box.lo.z, box.hi.z));
    if (tester && !tester->contains(p))
      continue;
    bool clear = true;
    for (const auto &b : cloud.balls) {
      const Vec3 d = Vec3(b.position) - p;
      if (dot(d, d) < sep2) {
        clear = false;
        break;
      }
    }
    if (!clear)
      continue;
    const double p0 = rng.uniform(spec.p0_lo, spec.p0_hi);
    const double a0 = rng.uniform(spec.a0_lo, spec.a0_hi);
    cloud.balls.push_back(make_ball(p, p0, a0));
  }
  return cloud;
}

void lay_polyline(PointCloud &cloud, const std::vector<Vec3> &vertices, double p0, double a0, double spacing) {
  const double step = spacing * a0;
  for (std::size_t s = 0; s + 1 < vertices.size(); ++s) {
    const Vec3 a = vertices[s], b = vertices[s + 1];
    const double len = norm(b - a);
    const auto n = static_cast<std::size_t>(std::ceil(len / step));
    // The last vertex of each segment is the first of the next one.
    const bool last = s + 2 == vertices.size();
    for (std::size_t q = 0; q < n + (last ? 1 : 0); ++q)
      cloud.balls.push_back(make_ball(a + (b - a) * (static_cast<double>(q) / n), p0, a0));
  }
}

PointCloud tube_tree(const PhantomSpec &spec) {
  const Box &box = spec.box;
  const double width = (box.hi.x - box.lo.x) / static_cast<double>(spec.branches);
  const double margin = 3.0 * spec.a0_hi;
  // Branch cores occupy the middle half of each x-slab, so neighbouring
  // vessels are at least half a slab apart.
  if (width / 2.0 < 8.0 * spec.a0_hi || box.hi.y - box.lo.y <= 4.0 * margin ||
      box.hi.z - box.lo.z <= 4.0 * margin)
    throw ArgumentError("generate_phantom: region too small for " + std::to_string(spec.branches) +
                        " tube branches of radius up to " + std::to_string(spec.a0_hi) + " m");

  CounterRng rng(spec.seed, kTubeStream);
  PointCloud cloud;
  for (std::size_t b = 0; b < spec.branches; ++b) {
    const double cx = box.lo.x + (static_cast<double>(b) + 0.5) * width;
    const double xl = cx - width / 4.0, xh = cx + width / 4.0;
    const double zl = box.lo.z + margin, zh = box.hi.z - margin;
    const double yl = box.lo.y + margin, yh = box.hi.y - margin;
    const double p0 = rng.uniform(spec.p0_lo, spec.p0_hi);
    const double a0 = rng.uniform(spec.a0_lo, spec.a0_hi);

    std::vector<Vec3> trunk;
    for (std::size_t v = 0; v <= spec.segments; ++v) {
      const double y = yl + (yh - yl) * static_cast<double>(v) / static_cast<double>(spec.segments);
      trunk.emplace_back(rng.uniform(xl, xh), y, rng.uniform(zl, zh));
    }
    lay_polyline(cloud, trunk, p0, a0, spec.tube_spacing);

    for (std::size_t s = 0; s < spec.side_branches && spec.segments >= 2; ++s) {
      const Vec3 root = trunk[1 + rng.below(spec.segments - 1)];
      const double reach = (yh - yl) / static_cast<double>(spec.segments);
      const Vec3 mid(rng.uniform(xl, xh), std::clamp(root.y + rng.uniform(-reach, reach), yl, yh),
                     rng.uniform(zl, zh));
      const Vec3 tip(rng.uniform(xl, xh), std::clamp(mid.y + rng.uniform(-reach, reach), yl, yh),
                     rng.uniform(zl, zh));
      lay_polyline(cloud, {root, mid, tip}, p0, 0.75 * a0, spec.tube_spacing);
    }
  }
  return cloud;
}

} // namespace

void PhantomSpec::validate() const {
  if (!(p0_lo > 0 && p0_hi >= p0_lo))
    throw ArgumentError("PhantomSpec: p0 range must be positive and ordered");
  if (!(a0_lo > 0 && a0_hi >= a0_lo))
    throw ArgumentError("PhantomSpec: a0 range must be positive and ordered");
  if (!(min_separation >= 0))
    throw ArgumentError("PhantomSpec: min_separation must be >= 0");
  if (!mesh)
    for (int k = 0; k < 3; ++k)
      if (!(box.hi[k] > box.lo[k]))
        throw ArgumentError("PhantomSpec: box is degenerate along axis " + std::to_string(k));
  if (kind == PhantomKind::tube_tree) {
    if (mesh)
      throw ArgumentError("PhantomSpec: tube_tree needs a box region");
    if (branches == 0 || segments == 0)
      throw ArgumentError("PhantomSpec: tube_tree needs branches >= 1 and segments >= 1");
    if (!(tube_spacing > 0))
      throw ArgumentError("PhantomSpec: tube_spacing must be positive");
  }
  for (std::size_t i = 0; i < fixed.size(); ++i)
    if (!(fixed[i].a0 > 0) || !is_finite(Vec3(fixed[i].position)) || !std::isfinite(fixed[i].p0))
      throw ArgumentError("PhantomSpec: fixed ball " + std::to_string(i) + " is invalid");
  render.validate();
}

Phantom generate_phantom(const PhantomSpec &spec) {
  spec.validate();
  Phantom out;
  out.truth = spec.kind == PhantomKind::balls ? place_balls(spec) : tube_tree(spec);
  out.rendered = voxelize(out.truth, spec.render);
  return out;
}

SignalSet make_dataset(const PointCloud &truth, const SensorArray &array, const TimeGrid &grid,
                       double noise_sigma, RngSeed seed, double cutoff_sigma) {
  if (!(noise_sigma >= 0))
    throw ArgumentError("make_dataset: noise_sigma must be >= 0");
  ForwardContext ctx{array, grid, cutoff_sigma, nullptr};
  SignalSet s = simulate_signals(truth, ctx);
  if (noise_sigma == 0.0 || s.data.empty())
    return s;
  double sum2 = 0.0;
  for (float v : s.data)
    sum2 += static_cast<double>(v) * v;
  const double sigma = noise_sigma * std::sqrt(sum2 / static_cast<double>(s.data.size()));
  CounterRng rng(seed, kNoiseStream);
  for (float &v : s.data)
    v = static_cast<float>(v + sigma * rng.normal());
  return s;
}

AcquisitionPreset standard_acquisition() { return {TimeGrid{0.0, 1.0 / 40e6, 4900}, 1500.0}; }
AcquisitionPreset desk_acquisition() { return {TimeGrid{0.0, 1.0 / 20e6, 1024}, 1500.0}; }

} // namespace pacloud
