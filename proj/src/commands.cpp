#include "pacloud/commands.hpp"

#include <chrono>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "pacloud/baseline.hpp"
#include "pacloud/errors.hpp"
#include "pacloud/geometry.hpp"
#include "pacloud/io.hpp"
#include "pacloud/parallel.hpp"
#include "pacloud/phantom.hpp"
#include "pacloud/radiator.hpp"
#include "pacloud/render.hpp"

namespace pacloud {
namespace fs = std::filesystem;
namespace {

constexpr const char *kVersion = "pacloud 1.0.0";

class Run {
public:
  Run(const ReconConfig &cfg, std::string command, std::ostream &log)
      : cfg_(cfg), command_(std::move(command)), log_(log), dir_(cfg.paths.output_dir),
        start_(std::chrono::steady_clock::now()), mark_(start_) {}

  fs::path out(const std::string &name) {
    result.outputs.push_back(name);
    return dir_ / name;
  }

  void lap(const std::string &stage) {
    const auto now = std::chrono::steady_clock::now();
    timings_[stage] = std::chrono::duration<double>(now - mark_).count();
    mark_ = now;
  }

  nlohmann::json extra = nlohmann::json::object();
  CommandResult result;

  CommandResult finish() {
    const std::string dump = dump_config(cfg_);
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(dump);
    nlohmann::json m;
    m["command"] = command_;
    m["version"] = kVersion;
    m["config_hash"] = hash.str();
    m["config"] = nlohmann::json::parse(dump);
    m["seed"] = cfg_.seed;
    m["threads"] = thread_count();
    m["deterministic_reduction"] = cfg_.deterministic_reduction;
    m["timings_s"] = timings_;
    m["total_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    m["outputs"] = result.outputs;
    m["status"] = result.status;
    m["details"] = extra;
    write_file(dir_ / (command_ + ".manifest.json"), m.dump(2) + "\n");
    return result;
  }

  std::ostream &log() { return log_; }

private:
  const ReconConfig &cfg_;
  std::string command_;
  std::ostream &log_;
  fs::path dir_;
  std::chrono::steady_clock::time_point start_, mark_;
  std::map<std::string, double> timings_;
};

const std::string &require_path(const std::string &value, const char *key) {
  if (value.empty())
    throw ConfigError(key, "path required by this command");
  return value;
}

SignalSet load_signals(const ReconConfig &cfg) { return read_signals(require_path(cfg.paths.signals, "paths.signals")); }

ForwardContext forward_context(const ReconConfig &cfg, const SensorArray &array, const SignalSet &real) {
  if (real.n_sensors != array.size())
    throw ArgumentError("signal file has " + std::to_string(real.n_sensors) + " sensors, array has " +
                        std::to_string(array.size()));
  return ForwardContext{array, real.grid, cfg.physics.cutoff_sigma, nullptr};
}

PhantomSpec phantom_spec(const ReconConfig &cfg) {
  const auto &p = cfg.phantom;
  PhantomSpec s;
  s.kind = p.kind;
  s.count = p.balls.empty() ? p.count : p.balls.size();
  s.branches = p.branches;
  s.segments = p.segments;
  s.side_branches = p.side_branches;
  s.tube_spacing = p.tube_spacing;
  s.box = p.box;
  s.seed = RngSeed{cfg.seed};
  s.p0_lo = p.p0_range[0];
  s.p0_hi = p.p0_range[1];
  s.a0_lo = p.a0_range[0];
  s.a0_hi = p.a0_range[1];
  s.min_separation = p.min_separation;
  s.fixed = p.balls;
  s.render = cfg.render;
  return s;
}

void write_maps(Run &run, const std::string &stem, const VoxelGrid &grid) {
  write_image(run.out(stem + "_map_x.pgm"), max_amplitude_projection(grid, Axis::x));
  write_image(run.out(stem + "_map_y.pgm"), max_amplitude_projection(grid, Axis::y));
  write_image(run.out(stem + "_map_z.pgm"), max_amplitude_projection(grid, Axis::z));
}

std::vector<std::uint8_t> load_mask(const std::string &path, const VoxelGrid &like) {
  const VoxelGrid m = read_volume(path);
  if (m.dims != like.dims)
    throw ArgumentError(path + ": mask dimensions differ from the volume");
  std::vector<std::uint8_t> out(m.count());
  for (std::size_t q = 0; q < m.count(); ++q)
    out[q] = m.values[q] != 0.0f;
  return out;
}

FilterResult filter_initial(const ReconConfig &cfg, const ForwardContext &ctx, const SignalSet &real,
                            const PointCloud &init) {
  return zero_gradient_filter(init, ctx, real, cfg.filter.factor, cfg.filter.predicate);
}

nlohmann::json filter_json(const FilterReport &r) {
  return {{"input", r.n_input}, {"retained", r.n_retained}, {"no_evidence", r.no_evidence}};
}

} // namespace

SensorArray config_array(const ReconConfig &cfg) {
  if (!cfg.paths.sensors.empty())
    return read_sensor_csv(cfg.paths.sensors, cfg.physics.sound_speed);
  ArrayParams p;
  p.count = cfg.array.count;
  p.radius = cfg.array.radius;
  p.center = cfg.array.center;
  p.sound_speed = cfg.physics.sound_speed;
  p.seed = RngSeed{cfg.seed};
  EnvelopeMesh shell;
  if (cfg.array.kind == ArrayKind::envelope_random) {
    shell = icosphere(3, cfg.array.radius, cfg.array.center);
    p.mesh = &shell;
  }
  return generate_array(cfg.array.kind, p);
}

PointCloud config_initial_cloud(const ReconConfig &cfg, const SensorArray &array) {
  const auto &in = cfg.initialization;
  const EnvelopeMesh envelope = build_envelope(array);
  const double offset = in.inward_offset.value_or(2.0 * in.a0_init);
  const EnvelopeMesh inner = offset_inward(envelope, InwardOffset{offset});
  const auto p0 = static_cast<float>(in.p0_init), a0 = static_cast<float>(in.a0_init);
  if (!in.box)
    return initialize_cloud(inner, in.n_points, RngSeed{cfg.seed}, p0, a0);

  const Box &b = *in.box;
  std::vector<Vec3> corners;
  InsideTester inside(inner);
  for (int q = 0; q < 8; ++q) {
    const Vec3 c(q & 1 ? b.hi.x : b.lo.x, q & 2 ? b.hi.y : b.lo.y, q & 4 ? b.hi.z : b.lo.z);
    if (!inside.contains(c))
      throw ConfigError("initialization.box", "corner outside the offset envelope");
    corners.push_back(c);
  }
  return initialize_cloud(build_envelope(corners), in.n_points, RngSeed{cfg.seed}, p0, a0);
}

CommandResult cmd_phantom(const ReconConfig &cfg, std::ostream &log) {
  Run run(cfg, "phantom", log);
  const SensorArray array = config_array(cfg);
  write_sensor_csv(run.out("sensors.csv"), array);
  const Phantom ph = generate_phantom(phantom_spec(cfg));
  run.lap("generate");
  write_cloud(run.out("truth.pcbg"), ph.truth);
  write_volume(run.out("truth.pavx"), ph.rendered);
  write_maps(run, "truth", ph.rendered);
  run.extra["balls"] = ph.truth.size();
  run.extra["sensors"] = array.size();
  log << "phantom: " << ph.truth.size() << " balls, " << array.size() << " sensors\n";
  return run.finish();
}

CommandResult cmd_simulate(const ReconConfig &cfg, std::ostream &log) {
  Run run(cfg, "simulate", log);
  const SensorArray array = config_array(cfg);
  const PointCloud truth =
      cfg.paths.cloud.empty() ? generate_phantom(phantom_spec(cfg)).truth : read_cloud(cfg.paths.cloud);
  const TimeGrid grid = cfg.time_grid();
  const SignalSet s =
      make_dataset(truth, array, grid, cfg.acquisition.noise_sigma, RngSeed{cfg.seed}, cfg.physics.cutoff_sigma);
  run.lap("simulate");
  write_signals(run.out("signals.pasg"), s);
  log << "simulate: " << s.n_sensors << " x " << s.grid.n_samples << " samples\n";
  return run.finish();
}

CommandResult cmd_filter(const ReconConfig &cfg, std::ostream &log) {
  Run run(cfg, "filter", log);
  const SensorArray array = config_array(cfg);
  const SignalSet real = load_signals(cfg);
  const ForwardContext ctx = forward_context(cfg, array, real);
  const PointCloud init = cfg.paths.cloud.empty() ? config_initial_cloud(cfg, array) : read_cloud(cfg.paths.cloud);
  run.lap("initialize");
  const FilterResult fr = filter_initial(cfg, ctx, real, init);
  run.lap("filter");
  write_cloud(run.out("filtered.pcbg"), fr.cloud);
  run.extra["filter"] = filter_json(fr.report);
  log << "filter: retained " << fr.report.n_retained << " of " << fr.report.n_input << "\n";
  if (fr.report.no_evidence) {
    run.result.status = "no evidence";
    log << "filter: no evidence\n";
  }
  return run.finish();
}

CommandResult cmd_reconstruct(const ReconConfig &cfg, std::ostream &log) {
  Run run(cfg, "reconstruct", log);
  const SensorArray array = config_array(cfg);
  const SignalSet real = load_signals(cfg);
  const ForwardContext ctx = forward_context(cfg, array, real);

  PointCloud init;
  if (!cfg.paths.cloud.empty()) {
    init = read_cloud(cfg.paths.cloud);
  } else {
    init = config_initial_cloud(cfg, array);
    run.lap("initialize");
    if (cfg.filter.enabled) {
      FilterResult fr = filter_initial(cfg, ctx, real, init);
      run.extra["filter"] = filter_json(fr.report);
      log << "filter: retained " << fr.report.n_retained << " of " << fr.report.n_input << "\n";
      if (fr.report.no_evidence)
        throw OptimizationError("no evidence: the filter retained nothing to optimize");
      init = std::move(fr.cloud);
      run.lap("filter");
    }
  }
  if (init.empty())
    throw OptimizationError("initial cloud is empty");

  RunOptions opt;
  opt.lr = cfg.optimizer.lr;
  opt.adam = cfg.optimizer.adam;
  opt.seed = RngSeed{cfg.seed};
  opt.a0_floor = cfg.optimizer.a0_floor;
  opt.converge_tol = cfg.optimizer.converge_tol;
  opt.converge_window = cfg.optimizer.converge_window;
  const Schedule schedule = cfg.schedule.resolve();
  RunResult rr = run_hierarchical(init, ctx, real, schedule, cfg.thresholds, opt);
  run.lap("optimize");
  const PointCloud cloud = positivity_refine(rr.state, ctx, real, cfg.refine.iters);
  run.lap("refine");
  const double final_loss = loss(simulate_signals(cloud, ctx), real);
  const VoxelGrid volume = voxelize(cloud, cfg.render);
  run.lap("render");

  write_cloud(run.out("recon.pcbg"), cloud);
  write_volume(run.out("recon.pavx"), volume);
  write_maps(run, "recon", volume);
  write_file(run.out("trace.csv"), format_trace_csv(rr.trace));
  run.extra["steps"] = rr.state.steps;
  run.extra["balls"] = cloud.size();
  run.extra["final_loss"] = final_loss;
  if (!rr.trace.rows.empty())
    run.extra["first_loss"] = rr.trace.rows.front().loss;
  log << "reconstruct: " << cloud.size() << " balls after " << rr.state.steps << " steps, loss "
      << final_loss << "\n";
  return run.finish();
}

CommandResult cmd_ubp(const ReconConfig &cfg, std::ostream &log) {
  Run run(cfg, "ubp", log);
  const SensorArray array = config_array(cfg);
  const SignalSet real = load_signals(cfg);
  UbpCoverage cov;
  const VoxelGrid volume = ubp_reconstruct(real, array, cfg.render, &cov);
  run.lap("backproject");
  write_volume(run.out("ubp.pavx"), volume);
  write_maps(run, "ubp", volume);
  run.extra["coverage"] = {{"evaluated", cov.evaluated}, {"skipped", cov.skipped}};
  log << "ubp: " << cov.skipped << " voxel-sensor pairs outside the time grid\n";
  return run.finish();
}

CommandResult cmd_voxelize(const ReconConfig &cfg, std::ostream &log) {
  Run run(cfg, "voxelize", log);
  const PointCloud cloud = read_cloud(require_path(cfg.paths.cloud, "paths.cloud"));
  const VoxelGrid volume = voxelize(cloud, cfg.render);
  run.lap("render");
  write_volume(run.out("volume.pavx"), volume);
  write_maps(run, "volume", volume);
  log << "voxelize: " << cloud.size() << " balls\n";
  return run.finish();
}

CommandResult cmd_metrics(const ReconConfig &cfg, std::ostream &log) {
  Run run(cfg, "metrics", log);
  const VoxelGrid volume = read_volume(require_path(cfg.paths.volume, "paths.volume"));
  const VoxelGrid reference = read_volume(require_path(cfg.paths.reference, "paths.reference"));
  std::optional<MaskPair> masks;
  if (!cfg.paths.roi_mask.empty() || !cfg.paths.bg_mask.empty())
    masks = MaskPair{load_mask(require_path(cfg.paths.roi_mask, "paths.roi_mask"), volume),
                     load_mask(require_path(cfg.paths.bg_mask, "paths.bg_mask"), volume)};
  const MetricReport m = compare_volumes(volume, reference, masks);
  run.lap("metrics");
  write_file(run.out("metrics.txt"), format_metrics_text(m));
  write_file(run.out("metrics.json"), format_metrics_json(m));
  log << format_metrics_text(m);
  return run.finish();
}

} // namespace pacloud
