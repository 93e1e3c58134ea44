// Command-line front end: pacloud <command> --config FILE [options].

#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "pacloud/commands.hpp"
#include "pacloud/errors.hpp"
#include "pacloud/parallel.hpp"

using namespace pacloud;

namespace {

enum ExitCode {
  kOk = 0,
  kInternal = 1,
  kConfig = 3,
  kIo = 4,
  kGeometry = 5,
  kSimulation = 6,
  kOptimization = 7,
  kArgument = 8,
};

int report(const char *category, const std::string &what, int code) {
  std::cerr << "error [" << category << "] " << what << "\n";
  return code;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Gaussian-ball point-cloud photoacoustic reconstruction"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  bool deterministic = false;
  std::string preset;

  using Command = CommandResult (*)(const ReconConfig &, std::ostream &);
  const std::map<std::string, std::pair<Command, const char *>> commands = {
      {"phantom", {cmd_phantom, "generate sensors, ground-truth cloud and rendered truth"}},
      {"simulate", {cmd_simulate, "simulate sensor signals for a cloud"}},
      {"filter", {cmd_filter, "initialize and apply zero-gradient filtering"}},
      {"reconstruct", {cmd_reconstruct, "run the full point-cloud reconstruction"}},
      {"ubp", {cmd_ubp, "universal back-projection baseline"}},
      {"voxelize", {cmd_voxelize, "render a cloud to a voxel grid"}},
      {"metrics", {cmd_metrics, "compare a volume against a reference"}},
  };
  for (const auto &[name, entry] : commands) {
    auto *sub = app.add_subcommand(name, entry.second);
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--threads", threads, "worker thread cap (default: PACLOUD_THREADS or hardware)")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--deterministic", deterministic, "force deterministic reductions");
    sub->add_option("--preset", preset, "schedule preset")->check(CLI::IsMember({"sim-16-4-1", "invivo-4-2-1"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e);
  }

  try {
    ReconConfig cfg = load_config(config_path);
    if (seed)
      cfg.seed = *seed;
    if (deterministic)
      cfg.deterministic_reduction = true;
    if (!preset.empty()) {
      cfg.schedule.preset = preset;
      cfg.validate();
    }
    if (threads)
      set_thread_count(*threads);

    const auto &name = app.get_subcommands().front()->get_name();
    const CommandResult r = commands.at(name).first(cfg, std::cout);
    if (!r.status.empty())
      std::cout << name << ": " << r.status << "\n";
    return kOk;
  } catch (const ConfigError &e) {
    return report("config", e.what(), kConfig);
  } catch (const IoError &e) {
    return report("io", e.what(), kIo);
  } catch (const GeometryError &e) {
    return report("geometry", e.what(), kGeometry);
  } catch (const SimulationError &e) {
    return report("simulation", e.what(), kSimulation);
  } catch (const OptimizationError &e) {
    return report("optimization", e.what(), kOptimization);
  } catch (const ArgumentError &e) {
    return report("argument", e.what(), kArgument);
  } catch (const std::exception &e) {
    return report("internal", e.what(), kInternal);
  }
}
