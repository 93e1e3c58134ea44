#include "pacloud/model.hpp"

#include <cmath>

#include "pacloud/errors.hpp"

namespace pacloud {

void SensorArray::validate() const {
  if (!(sound_speed > 0.0) || !std::isfinite(sound_speed))
    throw ArgumentError("SensorArray: sound_speed must be positive");
  if (!normals.empty() && normals.size() != positions.size())
    throw ArgumentError("SensorArray: normals count differs from positions count");
  for (const auto &p : positions)
    if (!is_finite(p))
      throw ArgumentError("SensorArray: non-finite sensor position");
}

TimeGrid TimeGrid::decimated(std::size_t f) const {
  if (f < 1)
    throw ArgumentError("TimeGrid::decimated: factor must be >= 1");
  return TimeGrid{t0, dt * static_cast<double>(f), (n_samples + f - 1) / f};
}

void TimeGrid::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw ArgumentError("TimeGrid: dt must be positive");
  if (n_samples < 2)
    throw ArgumentError("TimeGrid: n_samples must be >= 2");
  if (!std::isfinite(t0))
    throw ArgumentError("TimeGrid: t0 must be finite");
}

SignalSet::SignalSet(TimeGrid g, std::size_t sensors)
    : grid(g), n_sensors(sensors), data(sensors * g.n_samples, 0.0f) {}

void SignalSet::validate() const {
  if (data.size() != n_sensors * grid.n_samples)
    throw ArgumentError("SignalSet: data size does not match n_sensors x n_samples");
  for (float v : data)
    if (!std::isfinite(v))
      throw ArgumentError("SignalSet: non-finite sample");
}

VoxelGrid::VoxelGrid(std::array<std::size_t, 3> d, double spacing_, Vec3 origin_)
    : dims(d), spacing(spacing_), origin(origin_) {
  if (d[0] == 0 || d[1] == 0 || d[2] == 0)
    throw ArgumentError("VoxelGrid: dims must be strictly positive");
  if (!(spacing_ > 0.0))
    throw ArgumentError("VoxelGrid: spacing must be positive");
  values.assign(count(), 0.0f);
}

void VoxelGrid::validate() const {
  if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0)
    throw ArgumentError("VoxelGrid: dims must be strictly positive");
  if (values.size() != count())
    throw ArgumentError("VoxelGrid: value count differs from product of dims");
}

ValidationReport validate_cloud(const PointCloud &cloud) {
  ValidationReport report;
  for (std::size_t i = 0; i < cloud.balls.size(); ++i) {
    const auto &b = cloud.balls[i];
    if (!is_finite(b.position))
      report.violations.push_back({i, "non-finite position"});
    else if (!std::isfinite(b.p0))
      report.violations.push_back({i, "non-finite p0"});
    else if (!std::isfinite(b.a0) || !(b.a0 > 0.0f))
      report.violations.push_back({i, "a0 must be finite and > 0"});
  }
  return report;
}

} // namespace pacloud
