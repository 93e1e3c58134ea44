#pragma once

// Reconstruction-region geometry: the closed envelope around an arbitrary
// sensor array, ray-cast membership, and uniform cloud initialization.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "pacloud/model.hpp"

namespace pacloud {

struct EnvelopeMesh {
  std::vector<Vec3> vertices;
  /// Counter-clockwise seen from outside.
  std::vector<std::array<std::uint32_t, 3>> triangles;
  /// Set only by constructors that verified edge manifoldness.
  bool watertight = false;

  double signed_volume() const;
  double surface_area() const;
  double triangle_area(std::size_t t) const;
  /// Unit outward normal of triangle t.
  Vec3 triangle_normal(std::size_t t) const;
  std::array<Vec3, 2> bounds() const;
};

struct InwardOffset {
  double distance = 0.0;
};

/// True iff every undirected edge is used by exactly two triangles with
/// opposite orientations and every index is in range.
bool is_watertight(const EnvelopeMesh &mesh);

/// Convex hull of the sensor positions (incremental algorithm). The vertex set
/// is the subset of input points that are extreme.
EnvelopeMesh build_envelope(const SensorArray &array);
EnvelopeMesh build_envelope(std::span<const Vec3> points);

/// Radius of the largest sphere centered at the vertex centroid that stays
/// inside every face plane. Equals the true inradius for centrally symmetric
/// convex meshes and bounds it from below otherwise.
double inradius(const EnvelopeMesh &mesh);

/// Moves every vertex by -distance along its area-weighted vertex normal.
EnvelopeMesh offset_inward(const EnvelopeMesh &mesh, InwardOffset off);

/// Strict interior test by ray-crossing parity.
bool point_in_mesh(const EnvelopeMesh &mesh, const Vec3 &p);

/// Same test as point_in_mesh, with triangles binned on a yz grid so that
/// repeated queries only touch the triangles a ray can reach.
class InsideTester {
public:
  explicit InsideTester(const EnvelopeMesh &mesh);
  bool contains(const Vec3 &p) const;

private:
  bool contains_along(const Vec3 &p, const std::vector<std::uint32_t> &candidates) const;

  const EnvelopeMesh *mesh_;
  std::array<Vec3, 2> box_;
  std::size_t cells_ = 1;
  double cell_y_ = 1.0, cell_z_ = 1.0;
  std::vector<std::vector<std::uint32_t>> bins_;
};

/// n balls uniformly inside the mesh (rejection sampling in its bounding box).
PointCloud initialize_cloud(const EnvelopeMesh &mesh, std::size_t n, RngSeed seed, float p0_init,
                            float a0_init);

enum class ArrayKind { sphere, hemisphere, envelope_random };

struct ArrayParams {
  std::size_t count = 0;
  double radius = 0.0;
  Vec3 center;
  double sound_speed = 1500.0;
  RngSeed seed{};
  /// Required for envelope_random.
  const EnvelopeMesh *mesh = nullptr;
};

/// sphere: Fibonacci lattice (a regular tetrahedron for count 4).
/// hemisphere: Fibonacci lattice on the z <= 0 half.
/// envelope_random: area-uniform samples on the mesh surface.
SensorArray generate_array(ArrayKind kind, const ArrayParams &params);

/// Subdivided icosahedron projected onto a sphere.
EnvelopeMesh icosphere(int subdivisions, double radius, Vec3 center = {});

} // namespace pacloud
