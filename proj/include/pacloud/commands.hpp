#pragma once

// Pipeline subcommands. Each reads its inputs from the paths in the config,
// writes its outputs into paths.output_dir together with a manifest
// `<command>.manifest.json`, and reports progress on `log`.

#include <filesystem>
#include <map>
#include <ostream>
#include <string>

#include "pacloud/config.hpp"
#include "pacloud/optimizer.hpp"

namespace pacloud {

struct CommandResult {
  /// Files written, relative to output_dir.
  std::vector<std::string> outputs;
  /// Human-readable status line, e.g. "no evidence" from an empty filter.
  std::string status;
};

CommandResult cmd_phantom(const ReconConfig &cfg, std::ostream &log);
CommandResult cmd_simulate(const ReconConfig &cfg, std::ostream &log);
CommandResult cmd_filter(const ReconConfig &cfg, std::ostream &log);
CommandResult cmd_reconstruct(const ReconConfig &cfg, std::ostream &log);
CommandResult cmd_ubp(const ReconConfig &cfg, std::ostream &log);
CommandResult cmd_voxelize(const ReconConfig &cfg, std::ostream &log);
CommandResult cmd_metrics(const ReconConfig &cfg, std::ostream &log);

/// Sensors from paths.sensors when set, otherwise generated from `array`.
SensorArray config_array(const ReconConfig &cfg);

/// The offset envelope around the array (or the configured box inside it)
/// filled with initialization.n_points balls.
PointCloud config_initial_cloud(const ReconConfig &cfg, const SensorArray &array);

} // namespace pacloud
