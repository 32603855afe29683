#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "aps/app.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void add_common(CLI::App* cmd, aps::app::Flags& flags, bool seed_dt, bool port, bool pace) {
  if (seed_dt) {
    cmd->add_option("--seed", flags.seed, "RNG seed (env APS_SEED)");
    cmd->add_option("--dt", flags.dt, "plant step in seconds (env APS_DT)");
  }
  cmd->add_option("--out", flags.out, "output directory (env APS_OUT, default 'out')");
  if (port) cmd->add_option("--port", flags.port, "telemetry port, 0 for any (env APS_PORT, default 8765)");
  if (pace) cmd->add_option("--pace", flags.pace, "fast, realtime or a speed factor like 10x (env APS_PACE)");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace aps::app;
  CLI::App cli{"Autonomous probing system twin"};
  cli.require_subcommand(1);

  Flags flags;
  std::string scenario_path;
  std::string log_path;
  std::string static_dir;
  bool auto_start = false;
  double bin_width = 0.5;

  auto* check = cli.add_subcommand("check", "print flotation, structure and probe compatibility");
  check->add_option("scenario", scenario_path, "scenario file (default: built-in Lake Hertel)");

  auto* run = cli.add_subcommand("run", "run a scenario headless and write data products");
  run->add_option("scenario", scenario_path, "scenario file (default: built-in Lake Hertel)");
  add_common(run, flags, true, false, false);

  auto* serve = cli.add_subcommand("serve", "run a live session behind the telemetry endpoint");
  serve->add_option("scenario", scenario_path, "scenario file (default: built-in Lake Hertel)");
  add_common(serve, flags, true, true, true);
  serve->add_option("--static", static_dir, "directory with the console bundle");
  serve->add_flag("--auto-start", auto_start, "start the mission without waiting for start_mission");

  auto* rep = cli.add_subcommand("replay", "stream a recorded transcript or sample log");
  rep->add_option("log", log_path, "transcript (_telemetry.ndjson) or sample log")->required();
  add_common(rep, flags, false, true, true);
  rep->add_option("--static", static_dir, "directory with the console bundle");

  auto* summarize = cli.add_subcommand("summarize", "profiles and depth summaries from a sample log");
  summarize->add_option("log", log_path, "sample log (.ndjson)")->required();
  add_common(summarize, flags, false, false, false);
  summarize->add_option("--bin-width", bin_width, "depth bin width in m")->check(CLI::PositiveNumber);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    cli.exit(e);
    return kUsage;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const EnvLookup env = process_env;

  if (*check) return cmd_check(scenario_path, std::cout, std::cerr);
  if (*run) return cmd_run(scenario_path, flags, env, std::cout, std::cerr);
  if (*serve) {
    ServeOptions o;
    o.static_dir = static_dir;
    o.auto_start = auto_start;
    return cmd_serve(scenario_path, flags, env, o, g_stop, std::cout, std::cerr);
  }
  if (*rep) {
    ReplayOptions o;
    o.static_dir = static_dir;
    return cmd_replay(log_path, flags, env, o, g_stop, std::cout, std::cerr);
  }
  if (*summarize) return cmd_summarize(log_path, flags, env, bin_width, std::cout, std::cerr);
  return kUsage;
}
