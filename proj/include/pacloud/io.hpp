#pragma once

// File formats. Binary files are little-endian with a 4-byte magic and a u32
// version, followed by:
//
//   PASG v1  u32 n_sensors, u32 n_samples, f64 t0, f64 dt, f32 samples (sensor-major)
//   PCBG v1  u32 count, then f32 x, y, z, p0, a0 per ball
//   PAVX v1  u32 dx, dy, dz, f64 spacing, f64 origin x, y, z, f32 values (x-fastest)
//
// Readers reject unknown magic or versions and report the byte offset of the
// first malformed field.

#include <filesystem>
#include <string>
#include <string_view>

#include "pacloud/baseline.hpp"
#include "pacloud/model.hpp"
#include "pacloud/optimizer.hpp"
#include "pacloud/render.hpp"

namespace pacloud {

std::string encode_signals(const SignalSet &s);
SignalSet decode_signals(std::string_view bytes, const std::string &source = "signals");
std::string encode_cloud(const PointCloud &c);
PointCloud decode_cloud(std::string_view bytes, const std::string &source = "cloud");
std::string encode_volume(const VoxelGrid &g);
VoxelGrid decode_volume(std::string_view bytes, const std::string &source = "volume");

std::string read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, std::string_view bytes);

void write_signals(const std::filesystem::path &path, const SignalSet &s);
SignalSet read_signals(const std::filesystem::path &path);
void write_cloud(const std::filesystem::path &path, const PointCloud &c);
PointCloud read_cloud(const std::filesystem::path &path);
void write_volume(const std::filesystem::path &path, const VoxelGrid &g);
VoxelGrid read_volume(const std::filesystem::path &path);

/// Header `x,y,z` or `x,y,z,nx,ny,nz`; one row per sensor, meters.
std::string format_sensor_csv(const SensorArray &array);
SensorArray parse_sensor_csv(std::string_view text, double sound_speed, const std::string &source = "sensors");
void write_sensor_csv(const std::filesystem::path &path, const SensorArray &array);
SensorArray read_sensor_csv(const std::filesystem::path &path, double sound_speed);

/// `step,time_s,loss,ball_count,level`.
std::string format_trace_csv(const IterationTrace &trace);

/// 16-bit binary PGM, negatives clipped and the maximum mapped to 65535.
std::string encode_pgm(const Image2D &img);
/// Writes `<path>` as PGM and `<path>.f32` with the raw little-endian values.
void write_image(const std::filesystem::path &path, const Image2D &img);

std::string format_metrics_text(const MetricReport &m);
std::string format_metrics_json(const MetricReport &m);

} // namespace pacloud
