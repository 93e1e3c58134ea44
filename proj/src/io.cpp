#include "pacloud/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "pacloud/errors.hpp"

namespace pacloud {
namespace {

constexpr std::uint32_t kVersion = 1;

class ByteWriter {
public:
  void magic(const char (&m)[5]) { out_.append(m, 4); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
      out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
      out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::string take() { return std::move(out_); }

private:
  std::string out_;
};

class ByteReader {
public:
  ByteReader(std::string_view bytes, std::string source) : in_(bytes), source_(std::move(source)) {}

  std::size_t offset() const { return pos_; }

  [[noreturn]] void fail(std::size_t at, const std::string &what) const {
    throw IoError(source_ + ": " + what + " at byte " + std::to_string(at));
  }

  void header(const char (&m)[5]) {
    need(4, "magic");
    if (in_.substr(0, 4) != std::string_view(m, 4))
      fail(0, std::string("bad magic (expected ") + m + ")");
    pos_ = 4;
    const std::uint32_t v = u32();
    if (v != kVersion)
      fail(4, "unsupported version " + std::to_string(v));
  }
  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8, "u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  void expect_remaining(std::uint64_t n, const std::string &what) const {
    const std::uint64_t left = in_.size() - pos_;
    if (left < n)
      fail(in_.size(), "truncated " + what + " (expected " + std::to_string(n) + " bytes from byte " +
                           std::to_string(pos_) + ")");
    if (left > n)
      fail(pos_ + n, "trailing data after " + what);
  }

private:
  void need(std::size_t n, const char *what) const {
    if (in_.size() - pos_ < n)
      fail(pos_, std::string("truncated ") + what);
  }

  std::string_view in_;
  std::size_t pos_ = 0;
  std::string source_;
};

std::uint32_t to_u32(std::size_t v, const char *what) {
  if (v > std::numeric_limits<std::uint32_t>::max())
    throw IoError(std::string(what) + " does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

} // namespace

std::string encode_signals(const SignalSet &s) {
  s.validate();
  ByteWriter w;
  w.magic("PASG");
  w.u32(kVersion);
  w.u32(to_u32(s.n_sensors, "n_sensors"));
  w.u32(to_u32(s.grid.n_samples, "n_samples"));
  w.f64(s.grid.t0);
  w.f64(s.grid.dt);
  for (float v : s.data)
    w.f32(v);
  return w.take();
}

SignalSet decode_signals(std::string_view bytes, const std::string &source) {
  ByteReader r(bytes, source);
  r.header("PASG");
  const std::size_t at_sensors = r.offset();
  const std::uint32_t n_sensors = r.u32();
  const std::size_t at_samples = r.offset();
  const std::uint32_t n_samples = r.u32();
  const std::size_t at_t0 = r.offset();
  const double t0 = r.f64();
  const std::size_t at_dt = r.offset();
  const double dt = r.f64();
  if (n_sensors == 0)
    r.fail(at_sensors, "n_sensors must be positive");
  if (n_samples < 2)
    r.fail(at_samples, "n_samples must be at least 2");
  if (!std::isfinite(t0))
    r.fail(at_t0, "t0 is not finite");
  if (!(dt > 0) || !std::isfinite(dt))
    r.fail(at_dt, "dt must be positive");
  r.expect_remaining(std::uint64_t{4} * n_sensors * n_samples, "sample block");
  SignalSet s(TimeGrid{t0, dt, n_samples}, n_sensors);
  for (auto &v : s.data) {
    const std::size_t at = r.offset();
    v = r.f32();
    if (!std::isfinite(v))
      r.fail(at, "non-finite sample");
  }
  return s;
}

std::string encode_cloud(const PointCloud &c) {
  ByteWriter w;
  w.magic("PCBG");
  w.u32(kVersion);
  w.u32(to_u32(c.size(), "ball count"));
  for (const auto &b : c.balls) {
    w.f32(b.position.x);
    w.f32(b.position.y);
    w.f32(b.position.z);
    w.f32(b.p0);
    w.f32(b.a0);
  }
  return w.take();
}

PointCloud decode_cloud(std::string_view bytes, const std::string &source) {
  ByteReader r(bytes, source);
  r.header("PCBG");
  const std::uint32_t n = r.u32();
  r.expect_remaining(std::uint64_t{20} * n, "ball block");
  PointCloud c;
  c.balls.resize(n);
  for (auto &b : c.balls) {
    const std::size_t at = r.offset();
    b.position.x = r.f32();
    b.position.y = r.f32();
    b.position.z = r.f32();
    b.p0 = r.f32();
    b.a0 = r.f32();
    if (!is_finite(Vec3(b.position)) || !std::isfinite(b.p0) || !std::isfinite(b.a0))
      r.fail(at, "non-finite ball field");
  }
  return c;
}

std::string encode_volume(const VoxelGrid &g) {
  g.validate();
  ByteWriter w;
  w.magic("PAVX");
  w.u32(kVersion);
  for (auto d : g.dims)
    w.u32(to_u32(d, "volume dimension"));
  w.f64(g.spacing);
  w.f64(g.origin.x);
  w.f64(g.origin.y);
  w.f64(g.origin.z);
  for (float v : g.values)
    w.f32(v);
  return w.take();
}

VoxelGrid decode_volume(std::string_view bytes, const std::string &source) {
  ByteReader r(bytes, source);
  r.header("PAVX");
  std::array<std::size_t, 3> dims{};
  for (auto &d : dims) {
    const std::size_t at = r.offset();
    d = r.u32();
    if (d == 0)
      r.fail(at, "zero volume dimension");
  }
  const std::size_t at_spacing = r.offset();
  const double spacing = r.f64();
  if (!(spacing > 0) || !std::isfinite(spacing))
    r.fail(at_spacing, "spacing must be positive");
  Vec3 origin;
  for (int k = 0; k < 3; ++k) {
    const std::size_t at = r.offset();
    origin[k] = r.f64();
    if (!std::isfinite(origin[k]))
      r.fail(at, "origin is not finite");
  }
  r.expect_remaining(std::uint64_t{4} * dims[0] * dims[1] * dims[2], "value block");
  VoxelGrid g(dims, spacing, origin);
  for (auto &v : g.values)
    v = r.f32();
  return g;
}

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError(path.string() + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad())
    throw IoError(path.string() + ": read failed");
  return ss.str();
}

void write_file(const std::filesystem::path &path, std::string_view bytes) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw IoError(path.string() + ": write failed");
}

void write_signals(const std::filesystem::path &p, const SignalSet &s) { write_file(p, encode_signals(s)); }
SignalSet read_signals(const std::filesystem::path &p) { return decode_signals(read_file(p), p.string()); }
void write_cloud(const std::filesystem::path &p, const PointCloud &c) { write_file(p, encode_cloud(c)); }
PointCloud read_cloud(const std::filesystem::path &p) { return decode_cloud(read_file(p), p.string()); }
void write_volume(const std::filesystem::path &p, const VoxelGrid &g) { write_file(p, encode_volume(g)); }
VoxelGrid read_volume(const std::filesystem::path &p) { return decode_volume(read_file(p), p.string()); }

std::string format_sensor_csv(const SensorArray &array) {
  array.validate();
  std::ostringstream out;
  out << std::setprecision(17);
  const bool with_normals = !array.normals.empty();
  out << (with_normals ? "x,y,z,nx,ny,nz\n" : "x,y,z\n");
  for (std::size_t i = 0; i < array.size(); ++i) {
    const Vec3 &p = array.positions[i];
    out << p.x << ',' << p.y << ',' << p.z;
    if (with_normals) {
      const Vec3 &n = array.normals[i];
      out << ',' << n.x << ',' << n.y << ',' << n.z;
    }
    out << '\n';
  }
  return out.str();
}

SensorArray parse_sensor_csv(std::string_view text, double sound_speed, const std::string &source) {
  SensorArray array;
  array.sound_speed = sound_speed;
  std::size_t pos = 0, line_no = 0;
  std::size_t columns = 0;
  while (pos < text.size()) {
    const std::size_t start = pos;
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos)
      end = text.size();
    pos = end + 1;
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    ++line_no;
    if (line.empty())
      continue;
    const auto where = [&](std::size_t col) {
      return source + ": line " + std::to_string(line_no) + ", byte " + std::to_string(start + col) + ": ";
    };
    if (columns == 0) {
      if (line == "x,y,z")
        columns = 3;
      else if (line == "x,y,z,nx,ny,nz")
        columns = 6;
      else
        throw IoError(where(0) + "expected header x,y,z or x,y,z,nx,ny,nz");
      continue;
    }
    double v[6];
    std::size_t col = 0;
    for (std::size_t f = 0; f < columns; ++f) {
      const std::size_t comma = f + 1 < columns ? line.find(',', col) : line.size();
      if (comma == std::string_view::npos)
        throw IoError(where(col) + "expected " + std::to_string(columns) + " fields");
      const char *first = line.data() + col;
      const char *last = line.data() + comma;
      auto [ptr, ec] = std::from_chars(first, last, v[f]);
      if (ec != std::errc() || ptr != last || !std::isfinite(v[f]))
        throw IoError(where(col) + "malformed number");
      col = comma + 1;
    }
    array.positions.emplace_back(v[0], v[1], v[2]);
    if (columns == 6)
      array.normals.emplace_back(v[3], v[4], v[5]);
  }
  if (columns == 0)
    throw IoError(source + ": missing header");
  try {
    array.validate();
  } catch (const ArgumentError &e) {
    throw IoError(source + ": " + e.what());
  }
  return array;
}

void write_sensor_csv(const std::filesystem::path &p, const SensorArray &array) {
  write_file(p, format_sensor_csv(array));
}

SensorArray read_sensor_csv(const std::filesystem::path &p, double sound_speed) {
  return parse_sensor_csv(read_file(p), sound_speed, p.string());
}

std::string format_trace_csv(const IterationTrace &trace) {
  std::ostringstream out;
  out << std::setprecision(17) << "step,time_s,loss,ball_count,level\n";
  for (const auto &r : trace.rows)
    out << r.step << ',' << r.time_s << ',' << r.loss << ',' << r.ball_count << ',' << r.level << '\n';
  return out.str();
}

std::string encode_pgm(const Image2D &img) {
  if (img.width == 0 || img.height == 0 || img.values.size() != img.width * img.height)
    throw ArgumentError("encode_pgm: image shape does not match its values");
  float peak = 0.0f;
  for (float v : img.values)
    peak = std::max(peak, v);
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n65535\n";
  for (float v : img.values) {
    const double n = peak > 0.0f ? std::max(0.0f, v) / static_cast<double>(peak) : 0.0;
    const auto q = static_cast<std::uint16_t>(std::lround(n * 65535.0));
    out.push_back(static_cast<char>(q >> 8));
    out.push_back(static_cast<char>(q & 0xFFu));
  }
  return out;
}

void write_image(const std::filesystem::path &path, const Image2D &img) {
  write_file(path, encode_pgm(img));
  ByteWriter w;
  for (float v : img.values)
    w.f32(v);
  auto sidecar = path;
  sidecar += ".f32";
  write_file(sidecar, w.take());
}

namespace {

std::string number(double v) {
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

nlohmann::json json_number(double v) {
  // JSON has no infinity; the sentinel is carried as a string.
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  return v;
}

} // namespace

std::string format_metrics_text(const MetricReport &m) {
  std::string out = "mse=" + number(m.mse) + "\npsnr=" + number(m.psnr) + "\nssim=" + number(m.ssim) + "\n";
  if (m.cnr)
    out += "cnr=" + number(*m.cnr) + "\n";
  return out;
}

std::string format_metrics_json(const MetricReport &m) {
  nlohmann::json j;
  j["mse"] = json_number(m.mse);
  j["psnr"] = json_number(m.psnr);
  j["ssim"] = json_number(m.ssim);
  if (m.cnr)
    j["cnr"] = json_number(*m.cnr);
  return j.dump(2) + "\n";
}

} // namespace pacloud
