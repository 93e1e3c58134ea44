#include "pacloud/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "pacloud/errors.hpp"

namespace pacloud {
namespace {

using Tri = std::array<std::uint32_t, 3>;

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

// Ray directions tried in order. The first is the nominal direction; the rest
// are used only after an exactly degenerate hit (edge, vertex or in-plane).
constexpr double kRayEps = 3.14159265358979e-3;
constexpr std::array<std::array<double, 2>, 8> kRayPerturb{{
    {0.25 * kRayEps, 0.0625 * kRayEps},
    {-0.6180339887 * kRayEps, 0.3819660113 * kRayEps},
    {0.4142135624 * kRayEps, -0.7320508076 * kRayEps},
    {-0.2360679775 * kRayEps, -0.5857864376 * kRayEps},
    {0.8284271247 * kRayEps, 0.1715728753 * kRayEps},
    {-0.9142135624 * kRayEps, 0.6457513111 * kRayEps},
    {0.3166247904 * kRayEps, 0.9486832981 * kRayEps},
    {-0.4472135955 * kRayEps, -0.8944271910 * kRayEps},
}};
constexpr double kMaxPerturb = 0.9486832981 * kRayEps;

enum class Crossing { miss, hit, degenerate };

// Watertight ray/triangle test (Woop, Benthin, Wald 2013) for a ray along
// (1, sy, sz). Any zero edge function or zero distance is reported as
// degenerate so the caller can re-cast.
Crossing cross_triangle(const Vec3 &org, double sy, double sz, const Vec3 &v0, const Vec3 &v1,
                        const Vec3 &v2) {
  const Vec3 a = v0 - org, b = v1 - org, c = v2 - org;
  const double ax = a.y - sy * a.x, ay = a.z - sz * a.x;
  const double bx = b.y - sy * b.x, by = b.z - sz * b.x;
  const double cx = c.y - sy * c.x, cy = c.z - sz * c.x;
  const double u = cx * by - cy * bx;
  const double v = ax * cy - ay * cx;
  const double w = bx * ay - by * ax;
  if ((u < 0 || v < 0 || w < 0) && (u > 0 || v > 0 || w > 0))
    return Crossing::miss;
  if (u == 0 || v == 0 || w == 0)
    return Crossing::degenerate;
  const double det = u + v + w;
  const double t = u * a.x + v * b.x + w * c.x;
  if (t == 0)
    return Crossing::degenerate;
  return ((t > 0) == (det > 0)) ? Crossing::hit : Crossing::miss;
}

template <typename Range>
bool parity_inside(const EnvelopeMesh &mesh, const Vec3 &p, const Range &triangles) {
  for (const auto &dir : kRayPerturb) {
    bool inside = false;
    bool degenerate = false;
    for (std::uint32_t t : triangles) {
      const auto &tri = mesh.triangles[t];
      const auto c = cross_triangle(p, dir[0], dir[1], mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                                    mesh.vertices[tri[2]]);
      if (c == Crossing::degenerate) {
        degenerate = true;
        break;
      }
      if (c == Crossing::hit)
        inside = !inside;
    }
    if (!degenerate)
      return inside;
  }
  // Every direction grazed geometry: the point sits on the surface.
  return false;
}

struct HullFace {
  std::uint32_t a, b, c;
  Vec3 n;
  double off;
  bool alive = true;
};

HullFace make_face(const std::vector<Vec3> &pts, std::uint32_t a, std::uint32_t b, std::uint32_t c) {
  Vec3 n = cross(pts[b] - pts[a], pts[c] - pts[a]);
  const double len = norm(n);
  if (len > 0)
    n = n / len;
  return {a, b, c, n, dot(n, pts[a])};
}

} // namespace

double EnvelopeMesh::signed_volume() const {
  double v = 0;
  for (const auto &t : triangles)
    v += dot(vertices[t[0]], cross(vertices[t[1]], vertices[t[2]]));
  return v / 6.0;
}

double EnvelopeMesh::triangle_area(std::size_t t) const {
  const auto &tri = triangles[t];
  return 0.5 * norm(cross(vertices[tri[1]] - vertices[tri[0]], vertices[tri[2]] - vertices[tri[0]]));
}

double EnvelopeMesh::surface_area() const {
  double a = 0;
  for (std::size_t t = 0; t < triangles.size(); ++t)
    a += triangle_area(t);
  return a;
}

Vec3 EnvelopeMesh::triangle_normal(std::size_t t) const {
  const auto &tri = triangles[t];
  return normalized(cross(vertices[tri[1]] - vertices[tri[0]], vertices[tri[2]] - vertices[tri[0]]));
}

std::array<Vec3, 2> EnvelopeMesh::bounds() const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Vec3 lo{inf, inf, inf}, hi{-inf, -inf, -inf};
  for (const auto &v : vertices)
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], v[k]);
      hi[k] = std::max(hi[k], v[k]);
    }
  return {lo, hi};
}

bool is_watertight(const EnvelopeMesh &mesh) {
  if (mesh.triangles.empty())
    return false;
  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(mesh.triangles.size() * 3);
  const auto nv = static_cast<std::uint32_t>(mesh.vertices.size());
  for (const auto &t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      const auto a = t[e], b = t[(e + 1) % 3];
      if (a >= nv || b >= nv || a == b)
        return false;
      if (++directed[edge_key(a, b)] > 1)
        return false;
    }
  }
  for (const auto &[key, count] : directed) {
    const auto a = static_cast<std::uint32_t>(key >> 32);
    const auto b = static_cast<std::uint32_t>(key & 0xffffffffu);
    if (!directed.contains(edge_key(b, a)))
      return false;
  }
  return true;
}

EnvelopeMesh build_envelope(const SensorArray &array) { return build_envelope(array.positions); }

EnvelopeMesh build_envelope(std::span<const Vec3> input) {
  const std::size_t n = input.size();
  if (n < 4)
    throw GeometryError("build_envelope: need at least 4 sensor positions, got " + std::to_string(n));
  std::vector<Vec3> pts(input.begin(), input.end());
  for (const auto &p : pts)
    if (!is_finite(p))
      throw GeometryError("build_envelope: non-finite sensor position");

  Vec3 lo = pts[0], hi = pts[0];
  for (const auto &p : pts)
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  const double scale = norm(hi - lo);
  if (!(scale > 0))
    throw GeometryError("build_envelope: all sensor positions coincide");
  const double eps = 1e-10 * scale;

  // Initial simplex from extreme points.
  std::uint32_t i0 = 0;
  for (std::uint32_t i = 1; i < n; ++i)
    if (pts[i].x < pts[i0].x)
      i0 = i;
  std::uint32_t i1 = i0;
  double best = -1;
  for (std::uint32_t i = 0; i < n; ++i) {
    const double d = norm(pts[i] - pts[i0]);
    if (d > best) {
      best = d;
      i1 = i;
    }
  }
  const Vec3 axis = normalized(pts[i1] - pts[i0]);
  std::uint32_t i2 = i0;
  best = -1;
  for (std::uint32_t i = 0; i < n; ++i) {
    const double d = norm(cross(pts[i] - pts[i0], axis));
    if (d > best) {
      best = d;
      i2 = i;
    }
  }
  if (best <= eps)
    throw GeometryError("build_envelope: sensor positions are collinear");
  const Vec3 pn = normalized(cross(pts[i1] - pts[i0], pts[i2] - pts[i0]));
  std::uint32_t i3 = i0;
  best = -1;
  for (std::uint32_t i = 0; i < n; ++i) {
    const double d = std::abs(dot(pts[i] - pts[i0], pn));
    if (d > best) {
      best = d;
      i3 = i;
    }
  }
  if (best <= eps)
    throw GeometryError("build_envelope: sensor positions are coplanar");

  std::vector<HullFace> faces;
  if (dot(pts[i3] - pts[i0], pn) < 0) {
    faces.push_back(make_face(pts, i0, i1, i2));
    faces.push_back(make_face(pts, i0, i3, i1));
    faces.push_back(make_face(pts, i1, i3, i2));
    faces.push_back(make_face(pts, i2, i3, i0));
  } else {
    faces.push_back(make_face(pts, i0, i2, i1));
    faces.push_back(make_face(pts, i0, i1, i3));
    faces.push_back(make_face(pts, i1, i2, i3));
    faces.push_back(make_face(pts, i2, i0, i3));
  }

  std::size_t alive = faces.size();
  std::vector<std::size_t> visible;
  std::unordered_set<std::uint64_t> visible_edges;
  for (std::uint32_t p = 0; p < n; ++p) {
    if (p == i0 || p == i1 || p == i2 || p == i3)
      continue;
    visible.clear();
    for (std::size_t f = 0; f < faces.size(); ++f)
      if (faces[f].alive && dot(faces[f].n, pts[p]) - faces[f].off > eps)
        visible.push_back(f);
    if (visible.empty())
      continue;
    visible_edges.clear();
    for (auto f : visible) {
      const auto &F = faces[f];
      visible_edges.insert(edge_key(F.a, F.b));
      visible_edges.insert(edge_key(F.b, F.c));
      visible_edges.insert(edge_key(F.c, F.a));
    }
    const std::size_t first_new = faces.size();
    for (auto f : visible) {
      faces[f].alive = false;
      const std::array<std::uint32_t, 3> v{faces[f].a, faces[f].b, faces[f].c};
      for (int e = 0; e < 3; ++e) {
        const auto a = v[e], b = v[(e + 1) % 3];
        if (!visible_edges.contains(edge_key(b, a)))
          faces.push_back(make_face(pts, a, b, p));
      }
    }
    alive += faces.size() - first_new;
    alive -= visible.size();
    // Compact so the visibility scan stays proportional to the live hull.
    if (faces.size() > 256 && faces.size() > 2 * alive)
      std::erase_if(faces, [](const HullFace &f) { return !f.alive; });
  }

  EnvelopeMesh mesh;
  std::vector<std::uint32_t> remap(n, std::numeric_limits<std::uint32_t>::max());
  for (const auto &f : faces) {
    if (!f.alive)
      continue;
    Tri t{f.a, f.b, f.c};
    for (auto &idx : t) {
      if (remap[idx] == std::numeric_limits<std::uint32_t>::max()) {
        remap[idx] = static_cast<std::uint32_t>(mesh.vertices.size());
        mesh.vertices.push_back(pts[idx]);
      }
      idx = remap[idx];
    }
    mesh.triangles.push_back(t);
  }
  mesh.watertight = is_watertight(mesh);
  if (!mesh.watertight || !(mesh.signed_volume() > 0))
    throw GeometryError("build_envelope: hull construction produced a non-manifold surface "
                        "(input is numerically degenerate)");
  return mesh;
}

double inradius(const EnvelopeMesh &mesh) {
  if (mesh.vertices.empty() || mesh.triangles.empty())
    return 0.0;
  Vec3 c;
  for (const auto &v : mesh.vertices)
    c += v;
  c = c / static_cast<double>(mesh.vertices.size());
  double r = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const Vec3 nrm = mesh.triangle_normal(t);
    r = std::min(r, dot(nrm, mesh.vertices[mesh.triangles[t][0]] - c));
  }
  return std::max(0.0, r);
}

EnvelopeMesh offset_inward(const EnvelopeMesh &mesh, InwardOffset off) {
  if (!(off.distance >= 0))
    throw GeometryError("offset_inward: distance must be >= 0");
  if (!mesh.watertight)
    throw GeometryError("offset_inward: mesh is not watertight");
  if (off.distance == 0)
    return mesh;
  const double r = inradius(mesh);
  if (off.distance >= r)
    throw GeometryError("offset_inward: distance " + std::to_string(off.distance) +
                        " is not below the mesh inradius " + std::to_string(r) +
                        " (mesh would invert)");
  std::vector<Vec3> normals(mesh.vertices.size());
  for (const auto &t : mesh.triangles) {
    // Unnormalized cross product = 2 * area * unit normal.
    const Vec3 w = cross(mesh.vertices[t[1]] - mesh.vertices[t[0]], mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    for (auto i : t)
      normals[i] += w;
  }
  EnvelopeMesh out = mesh;
  for (std::size_t i = 0; i < out.vertices.size(); ++i)
    out.vertices[i] -= normalized(normals[i]) * off.distance;
  out.watertight = is_watertight(out);
  if (!out.watertight || !(out.signed_volume() > 0))
    throw GeometryError("offset_inward: offset surface inverted");
  return out;
}

bool point_in_mesh(const EnvelopeMesh &mesh, const Vec3 &p) {
  if (!mesh.watertight)
    throw GeometryError("point_in_mesh: mesh is not watertight");
  const auto [lo, hi] = mesh.bounds();
  for (int k = 0; k < 3; ++k)
    if (p[k] <= lo[k] || p[k] >= hi[k])
      return false;
  std::vector<std::uint32_t> all(mesh.triangles.size());
  for (std::uint32_t t = 0; t < all.size(); ++t)
    all[t] = t;
  return parity_inside(mesh, p, all);
}

InsideTester::InsideTester(const EnvelopeMesh &mesh) : mesh_(&mesh), box_(mesh.bounds()) {
  if (!mesh.watertight)
    throw GeometryError("InsideTester: mesh is not watertight");
  const std::size_t nt = mesh.triangles.size();
  cells_ = std::clamp<std::size_t>(static_cast<std::size_t>(std::sqrt(static_cast<double>(nt))), 1, 256);
  const double ext_y = box_[1].y - box_[0].y, ext_z = box_[1].z - box_[0].z;
  cell_y_ = std::max(ext_y, 1e-300) / static_cast<double>(cells_);
  cell_z_ = std::max(ext_z, 1e-300) / static_cast<double>(cells_);
  // A ray starting anywhere in the box drifts at most this far in y and z.
  const double drift = kMaxPerturb * (box_[1].x - box_[0].x) * 1.01 + 1e-12 * (ext_y + ext_z);
  bins_.assign(cells_ * cells_, {});
  auto cell = [&](double v, double lo, double size) {
    const auto c = static_cast<long>(std::floor((v - lo) / size));
    return static_cast<std::size_t>(std::clamp<long>(c, 0, static_cast<long>(cells_) - 1));
  };
  for (std::uint32_t t = 0; t < nt; ++t) {
    const auto &tri = mesh.triangles[t];
    double y0 = mesh.vertices[tri[0]].y, y1 = y0, z0 = mesh.vertices[tri[0]].z, z1 = z0;
    for (int k = 1; k < 3; ++k) {
      y0 = std::min(y0, mesh.vertices[tri[k]].y);
      y1 = std::max(y1, mesh.vertices[tri[k]].y);
      z0 = std::min(z0, mesh.vertices[tri[k]].z);
      z1 = std::max(z1, mesh.vertices[tri[k]].z);
    }
    const auto cy0 = cell(y0 - drift, box_[0].y, cell_y_), cy1 = cell(y1 + drift, box_[0].y, cell_y_);
    const auto cz0 = cell(z0 - drift, box_[0].z, cell_z_), cz1 = cell(z1 + drift, box_[0].z, cell_z_);
    for (auto cz = cz0; cz <= cz1; ++cz)
      for (auto cy = cy0; cy <= cy1; ++cy)
        bins_[cy + cells_ * cz].push_back(t);
  }
}

bool InsideTester::contains(const Vec3 &p) const {
  for (int k = 0; k < 3; ++k)
    if (p[k] <= box_[0][k] || p[k] >= box_[1][k])
      return false;
  auto cell = [&](double v, double lo, double size) {
    const auto c = static_cast<long>(std::floor((v - lo) / size));
    return static_cast<std::size_t>(std::clamp<long>(c, 0, static_cast<long>(cells_) - 1));
  };
  const auto cy = cell(p.y, box_[0].y, cell_y_), cz = cell(p.z, box_[0].z, cell_z_);
  return parity_inside(*mesh_, p, bins_[cy + cells_ * cz]);
}

PointCloud initialize_cloud(const EnvelopeMesh &mesh, std::size_t n, RngSeed seed, float p0_init,
                            float a0_init) {
  if (n < 1)
    throw ArgumentError("initialize_cloud: n must be >= 1");
  if (!(a0_init > 0))
    throw ArgumentError("initialize_cloud: a0_init must be > 0");
  const InsideTester inside(mesh);
  const auto [lo, hi] = mesh.bounds();
  CounterRng rng(seed, 1);
  PointCloud cloud;
  cloud.balls.reserve(n);
  constexpr std::size_t kWarmup = 10000;
  std::size_t trials = 0;
  while (cloud.balls.size() < n) {
    const Vec3 p{rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y), rng.uniform(lo.z, hi.z)};
    ++trials;
    // Positions are stored in single precision; test the rounded point.
    const Vec3f pf(p);
    if (inside.contains(Vec3(pf)))
      cloud.balls.push_back({pf, p0_init, a0_init, 0.0f});
    if (trials % kWarmup == 0 &&
        static_cast<double>(cloud.balls.size()) < 1e-3 * static_cast<double>(trials))
      throw GeometryError("initialize_cloud: rejection acceptance rate below 1e-3 "
                          "(mesh is nearly degenerate)");
  }
  return cloud;
}

SensorArray generate_array(ArrayKind kind, const ArrayParams &params) {
  SensorArray array;
  array.sound_speed = params.sound_speed;
  if (params.count < 4)
    throw ArgumentError("generate_array: count must be >= 4");
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  switch (kind) {
  case ArrayKind::sphere:
  case ArrayKind::hemisphere: {
    if (!(params.radius > 0))
      throw ArgumentError("generate_array: radius must be > 0");
    const std::size_t n = params.count;
    if (kind == ArrayKind::sphere && n == 4) {
      const double s = 1.0 / std::sqrt(3.0);
      for (const Vec3 &u : {Vec3{s, s, s}, Vec3{s, -s, -s}, Vec3{-s, s, -s}, Vec3{-s, -s, s}}) {
        array.positions.push_back(params.center + u * params.radius);
        array.normals.push_back(u);
      }
      break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double fi = static_cast<double>(i) + 0.5;
      const double z = kind == ArrayKind::sphere ? 1.0 - 2.0 * fi / static_cast<double>(n)
                                                 : -fi / static_cast<double>(n);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden_angle * static_cast<double>(i);
      const Vec3 u = normalized(Vec3{r * std::cos(phi), r * std::sin(phi), z});
      array.positions.push_back(params.center + u * params.radius);
      array.normals.push_back(u);
    }
    break;
  }
  case ArrayKind::envelope_random: {
    if (params.mesh == nullptr || params.mesh->triangles.empty())
      throw ArgumentError("generate_array: envelope_random requires a mesh");
    const auto &mesh = *params.mesh;
    std::vector<double> cdf(mesh.triangles.size());
    double acc = 0;
    for (std::size_t t = 0; t < cdf.size(); ++t) {
      acc += mesh.triangle_area(t);
      cdf[t] = acc;
    }
    if (!(acc > 0))
      throw ArgumentError("generate_array: mesh has zero surface area");
    CounterRng rng(params.seed, 2);
    for (std::size_t i = 0; i < params.count; ++i) {
      const double pick = rng.uniform() * acc;
      auto t = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), pick) - cdf.begin());
      t = std::min(t, cdf.size() - 1);
      const double r1 = std::sqrt(rng.uniform()), r2 = rng.uniform();
      const auto &tri = mesh.triangles[t];
      const Vec3 &a = mesh.vertices[tri[0]], &b = mesh.vertices[tri[1]], &c = mesh.vertices[tri[2]];
      array.positions.push_back(a * (1 - r1) + b * (r1 * (1 - r2)) + c * (r1 * r2));
      array.normals.push_back(mesh.triangle_normal(t));
    }
    break;
  }
  }
  return array;
}

EnvelopeMesh icosphere(int subdivisions, double radius, Vec3 center) {
  const double g = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v{{-1, g, 0}, {1, g, 0}, {-1, -g, 0}, {1, -g, 0}, {0, -1, g}, {0, 1, g},
                      {0, -1, -g}, {0, 1, -g}, {g, 0, -1}, {g, 0, 1}, {-g, 0, -1}, {-g, 0, 1}};
  for (auto &p : v)
    p = normalized(p);
  std::vector<Tri> f{{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                     {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                     {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end())
        return it->second;
      v.push_back(normalized(v[a] + v[b]));
      const auto idx = static_cast<std::uint32_t>(v.size() - 1);
      mid.emplace(key, idx);
      return idx;
    };
    std::vector<Tri> next;
    for (const auto &t : f) {
      const auto ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    f = std::move(next);
  }
  EnvelopeMesh mesh;
  for (const auto &p : v)
    mesh.vertices.push_back(center + p * radius);
  mesh.triangles = std::move(f);
  mesh.watertight = is_watertight(mesh);
  return mesh;
}

} // namespace pacloud
