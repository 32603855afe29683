#pragma once

// Subcommand implementations behind the `aps` executable. Each returns a
// process exit code and writes human output to the given streams, so tests
// drive them without spawning processes.

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aps/datalog.hpp"
#include "aps/runner.hpp"
#include "aps/scenario_yaml.hpp"
#include "aps/session.hpp"
#include "aps/telemetry_server.hpp"

namespace aps::app {

enum ExitCode : int { kOk = 0, kUsage = 1, kCompatibility = 2, kFaultTerminated = 3 };

inline constexpr std::uint16_t kDefaultPort = 8765;
inline constexpr const char* kDefaultOut = "out";

/// Reads an environment variable; replaceable in tests.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raw flag values as typed on the command line.
struct Flags {
  std::optional<std::string> seed, dt, out, port, pace;
};

template <class T>
struct Resolved {
  T value{};
  std::string source;  // flag, env, file or default
};

/// flag > env > file > default. Flag and env strings go through `parse`.
template <class T, class Parse>
Resolved<T> resolve(const std::string& what, const std::optional<std::string>& flag, const EnvLookup& env,
                    const std::string& env_name, const std::optional<T>& file, const T& fallback, Parse parse) {
  auto parsed = [&](const std::string& text, const std::string& origin) {
    try {
      return parse(text);
    } catch (const std::exception& e) {
      throw UsageError("invalid " + what + " '" + text + "' from " + origin + ": " + e.what());
    }
  };
  if (flag) return {parsed(*flag, "--" + what), "flag"};
  if (auto v = env(env_name)) return {parsed(*v, env_name), "env"};
  if (file) return {*file, "file"};
  return {fallback, "default"};
}

inline std::uint64_t parse_seed(const std::string& s) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("expected a non-negative integer");
  }
  return std::stoull(s);
}

inline double parse_dt(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size() || !(v > 0) || !std::isfinite(v)) throw std::invalid_argument("expected a positive number");
  return v;
}

inline std::uint16_t parse_port(const std::string& s) {
  const auto v = parse_seed(s);
  if (v > 65535) throw std::invalid_argument("port out of range");
  return static_cast<std::uint16_t>(v);
}

struct Settings {
  std::uint64_t seed = 0;
  double dt = 0.01;
  std::string out = kDefaultOut;
  std::uint16_t port = kDefaultPort;
  Pace pace{};
  std::map<std::string, std::string> sources;
};

/// `scenario` supplies the file layer; null when the command has none.
inline Settings resolve_settings(const Flags& flags, const EnvLookup& env, const Scenario* scenario,
                                 Pace default_pace) {
  Settings s;
  auto file_or = [&](auto member) -> std::optional<std::decay_t<decltype(scenario->*member)>> {
    if (!scenario) return std::nullopt;
    return scenario->*member;
  };
  const Scenario defaults;
  auto seed = resolve<std::uint64_t>("seed", flags.seed, env, "APS_SEED", file_or(&Scenario::seed), defaults.seed,
                                     parse_seed);
  auto dt = resolve<double>("dt", flags.dt, env, "APS_DT", file_or(&Scenario::dt), defaults.dt, parse_dt);
  auto out = resolve<std::string>("out", flags.out, env, "APS_OUT", std::nullopt, kDefaultOut,
                                  [](const std::string& v) {
                                    if (v.empty()) throw std::invalid_argument("empty path");
                                    return v;
                                  });
  auto port = resolve<std::uint16_t>("port", flags.port, env, "APS_PORT", std::nullopt, kDefaultPort, parse_port);
  std::optional<Pace> file_pace;
  if (scenario) file_pace = Pace{scenario->pacing == Pacing::Fast, 1.0};
  auto pace = resolve<Pace>("pace", flags.pace, env, "APS_PACE", file_pace, default_pace, parse_pace);
  s.seed = seed.value;
  s.dt = dt.value;
  s.out = out.value;
  s.port = port.value;
  s.pace = pace.value;
  s.sources = {{"seed", seed.source}, {"dt", dt.source}, {"out", out.source}, {"port", port.source},
               {"pace", pace.source}};
  return s;
}

/// Empty path selects the built-in Lake Hertel scenario.
inline Scenario load_scenario_or_default(const std::string& path) {
  return path.empty() ? lake_hertel_scenario() : load_scenario(path);
}

inline Scenario apply_settings(Scenario s, const Settings& settings) {
  s.seed = settings.seed;
  s.dt = settings.dt;
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("scenario invalid after overrides: ") + e.what());
  }
  return s;
}

// --- check ----------------------------------------------------------------------------

inline int cmd_check(const std::string& path, std::ostream& out, std::ostream& err) {
  Scenario s;
  try {
    s = load_scenario_or_default(path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  const auto fb = buoyant_force(s.platform);
  const auto w = max_total_weight(s.platform);
  const double sf = structural_safety_factor(s.structure);
  const auto report = check_probe_compatibility(s.probe, s.winch, s.platform);

  out << "scenario " << s.name << " (config " << config_hash(s) << ")\n";
  out << std::fixed << std::setprecision(3);
  out << "  buoyant force          " << std::setw(10) << fb.value() << " N\n";
  out << "  max total weight       " << std::setw(10) << w.value() << " kg\n";
  out << "  structural S.F.        " << std::setw(10) << sf << '\n';
  for (const auto& r : report.rules) {
    out << "  [" << (r.passed ? "PASS" : "FAIL") << "] (" << r.id << ") " << r.description << ": "
        << r.measured << ' ' << symbol(r.unit) << " vs limit " << r.limit << ' ' << symbol(r.unit) << '\n';
  }
  out << (report.all_passed() ? "compatible\n" : "INCOMPATIBLE\n");
  out.unsetf(std::ios::floatfield);
  return report.all_passed() ? kOk : kCompatibility;
}

// --- run --------------------------------------------------------------------------------

namespace detail {

/// Stages files under a temporary name and renames them into place together.
class StagedOutputs {
 public:
  explicit StagedOutputs(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::filesystem::path stage(const std::string& name) {
    const auto tmp = dir_ / (name + ".partial");
    staged_.push_back({tmp, dir_ / name});
    return tmp;
  }

  void write(const std::string& name, const std::function<void(std::ostream&)>& fill) {
    std::ofstream f(stage(name), std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
    fill(f);
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + (dir_ / name).string());
  }

  /// Renames everything; the manifest, staged last, lands last.
  std::vector<std::string> commit() {
    std::vector<std::string> names;
    for (const auto& [tmp, final_path] : staged_) {
      std::filesystem::rename(tmp, final_path);
      names.push_back(final_path.filename().string());
    }
    staged_.clear();
    return names;
  }

  ~StagedOutputs() {
    std::error_code ec;
    for (const auto& [tmp, final_path] : staged_) std::filesystem::remove(tmp, ec);
  }

  [[nodiscard]] std::vector<std::string> names() const {
    std::vector<std::string> n;
    for (const auto& [tmp, final_path] : staged_) n.push_back(final_path.filename().string());
    return n;
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> staged_;
};

inline std::string sanitize(std::string s) {
  for (auto& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return s;
}

inline void write_products(StagedOutputs& staged, const std::string& base, const std::vector<SampleRecord>& records,
                           double bin_width, std::ostream& out) {
  staged.write(base + ".csv", [&](std::ostream& f) { write_csv(f, records); });
  const auto profiles = assemble_profiles(records);
  staged.write(base + "_profiles.csv", [&](std::ostream& f) { write_profiles_csv(f, profiles); });
  out << "  profiles: " << profiles.size() << '\n';
  if (records.size() < 2) return;
  for (const auto& [param, v] : records.front().values) {
    const auto summary = depth_normalized_summary(records, param, bin_width);
    staged.write(base + "_summary_" + sanitize(param) + ".csv",
                 [&](std::ostream& f) { write_summary_csv(f, summary); });
  }
}

}  // namespace detail

struct RunReport {
  int exit_code = kOk;
  std::string base;  // output file stem
  nlohmann::json manifest;
};

inline RunReport run_headless(const std::string& path, const Flags& flags, const EnvLookup& env, std::ostream& out,
                              std::ostream& err) {
  RunReport report;
  Scenario scenario;
  Settings settings;
  try {
    scenario = load_scenario_or_default(path);
    settings = resolve_settings(flags, env, &scenario, Pace{true, 1.0});
    scenario = apply_settings(std::move(scenario), settings);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    report.exit_code = kUsage;
    return report;
  }

  const auto hash = config_hash(scenario);
  const std::string base =
      detail::sanitize(scenario.name) + "_" + std::to_string(scenario.seed) + "_" + hash.substr(0, 8);
  report.base = base;
  const std::filesystem::path dir(settings.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    err << "error: cannot create output directory " << dir << ": " << ec.message() << '\n';
    report.exit_code = kUsage;
    return report;
  }

  detail::StagedOutputs staged(dir);
  const auto log_tmp = staged.stage(base + ".ndjson");
  const auto transcript_tmp = staged.stage(base + "_telemetry.ndjson");
  MissionStatus status;
  std::vector<SampleRecord> records;
  std::vector<nlohmann::json> faults;
  double end_time = 0.0;
  try {
    SessionOptions opts;
    opts.pace = Pace{true, 1.0};
    opts.log_path = log_tmp.string();
    opts.transcript_path = transcript_tmp.string();
    LiveSession session(scenario, opts);
    session.set_broadcast([&](const Outbound& m) {
      if (m.kind == protocol::MessageKind::Fault) faults.push_back(m.payload);
    });
    const std::atomic<bool> never{false};
    session.run(never);
    session.close();
    status = session.runner().status();
    records = session.runner().log().records();
    end_time = session.runner().time();
  } catch (const CompatibilityError& e) {
    err << "error: " << e.what() << '\n';
    for (const auto& r : e.report().rules) {
      if (!r.passed) err << "  rule (" << r.id << ") failed: " << r.description << '\n';
    }
    report.exit_code = kCompatibility;
    return report;
  }

  out << "run " << base << ": " << to_string(status) << " at t=" << format_number(end_time) << " s, "
      << records.size() << " samples\n";
  for (const auto& f : faults) {
    out << "  fault at t=" << f["t"].get<double>() << " s: " << f["reason"].get<std::string>()
        << " (depth " << f["depth"].get<double>() << " m)\n";
  }
  detail::write_products(staged, base, records, 0.5, out);

  report.exit_code = status == MissionStatus::Completed ? kOk : kFaultTerminated;
  nlohmann::json sources = settings.sources;
  sources.erase("port");
  sources.erase("pace");
  auto outputs = staged.names();
  outputs.push_back(base + "_manifest.json");
  report.manifest = {
      {"scenario", scenario.name},
      {"inputs", {{"scenario_file", path.empty() ? "<built-in lake_hertel>" : path}}},
      {"config_hash", hash},
      {"seed", scenario.seed},
      {"dt", scenario.dt},
      {"settings_source", sources},
      {"status", to_string(status)},
      {"exit_code", report.exit_code},
      {"end_time", end_time},
      {"samples", records.size()},
      {"profiles", assemble_profiles(records).size()},
      {"faults", faults},
      {"outputs", outputs},
      {"scenario_config", to_json(scenario)},
  };
  staged.write(base + "_manifest.json", [&](std::ostream& f) { f << report.manifest.dump(2) << '\n'; });
  staged.commit();
  out << "  wrote " << outputs.size() << " files to " << dir.string() << '\n';
  return report;
}

inline int cmd_run(const std::string& path, const Flags& flags, const EnvLookup& env, std::ostream& out,
                   std::ostream& err) {
  return run_headless(path, flags, env, out, err).exit_code;
}

// --- serve / replay -----------------------------------------------------------------

struct ServeOptions {
  std::string static_dir;
  bool auto_start = false;
  std::size_t client_queue_capacity = 1024;
  // Called with the bound port once the endpoint is up.
  std::function<void(std::uint16_t)> on_ready;
};

inline int cmd_serve(const std::string& path, const Flags& flags, const EnvLookup& env, const ServeOptions& options,
                     const std::atomic<bool>& stop, std::ostream& out, std::ostream& err) {
  Scenario scenario;
  Settings settings;
  try {
    scenario = load_scenario_or_default(path);
    settings = resolve_settings(flags, env, &scenario, Pace{false, 1.0});
    scenario = apply_settings(std::move(scenario), settings);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  const std::string base = detail::sanitize(scenario.name) + "_" + std::to_string(scenario.seed) + "_" +
                           config_hash(scenario).substr(0, 8) + "_session";
  std::error_code ec;
  std::filesystem::create_directories(settings.out, ec);
  SessionOptions opts;
  opts.pace = settings.pace;
  opts.auto_start = options.auto_start;
  opts.stop_when_finished = false;
  opts.log_path = (std::filesystem::path(settings.out) / (base + ".ndjson")).string();
  opts.transcript_path = (std::filesystem::path(settings.out) / (base + "_telemetry.ndjson")).string();

  try {
    LiveSession session(scenario, opts);
    net::ServerOptions so;
    so.port = settings.port;
    so.static_dir = options.static_dir;
    so.client_queue_capacity = options.client_queue_capacity;
    net::TelemetryServer server(
        so, [&] { return session.snapshot(); },
        [&](net::ClientId id, const std::string& line) { session.submit(id, line); });
    session.set_broadcast([&](const Outbound& m) { server.broadcast(m.kind, m.payload); });
    session.set_reply([&](ClientId id, const protocol::TelemetryMessage& m) { server.send_to(id, m.kind, m.payload); });
    out << "serving " << scenario.name << " on port " << server.port() << " (pace " << to_string(settings.pace)
        << (options.auto_start ? "" : ", waiting for start_mission") << ")\n"
        << "  transcript " << opts.transcript_path << '\n'
        << std::flush;
    if (options.on_ready) options.on_ready(server.port());
    session.run(stop);
    server.drain(std::chrono::milliseconds(500));
    server.stop();
    session.close();
    const auto t = session.timing();
    out << "session ended at t=" << format_number(session.runner().time()) << " s ("
        << to_string(session.runner().status()) << "), max step lateness " << t.max_late * 1e3 << " ms\n";
  } catch (const CompatibilityError& e) {
    err << "error: " << e.what() << '\n';
    return kCompatibility;
  } catch (const std::system_error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kOk;
}

struct ReplayOptions {
  std::string static_dir;
  bool wait_for_client = true;  // start streaming when the first client connects
  std::size_t client_queue_capacity = 1 << 16;
  std::function<void(std::uint16_t)> on_ready;
};

inline int cmd_replay(const std::string& path, const Flags& flags, const EnvLookup& env, const ReplayOptions& options,
                      const std::atomic<bool>& stop, std::ostream& out, std::ostream& err) {
  std::vector<Outbound> messages;
  Settings settings;
  try {
    settings = resolve_settings(flags, env, nullptr, Pace{false, 1.0});
    messages = read_transcript_file(path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  std::mutex snap_mutex;
  nlohmann::json snap = {{"replay", true}, {"t", messages.empty() ? 0.0 : messages.front().t}};
  try {
    net::ServerOptions so;
    so.port = settings.port;
    so.static_dir = options.static_dir;
    so.client_queue_capacity = options.client_queue_capacity;
    net::TelemetryServer server(
        so,
        [&] {
          std::lock_guard lock(snap_mutex);
          return snap;
        },
        [&](net::ClientId id, const std::string& line) {
          auto parsed = protocol::parse_command(line);
          const auto ack = protocol::make_ack(parsed.command_id, false,
                                              parsed.command ? "replay is read-only" : parsed.error);
          server.send_to(id, ack.kind, ack.payload);
        });
    out << "replaying " << messages.size() << " messages from " << path << " on port " << server.port()
        << " (pace " << to_string(settings.pace) << ")\n"
        << std::flush;
    if (options.on_ready) options.on_ready(server.port());
    while (options.wait_for_client && !stop && server.stats().connected == 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    replay(messages, settings.pace,
           [&](const Outbound& m) {
             if (m.kind == protocol::MessageKind::State) {
               std::lock_guard lock(snap_mutex);
               snap = m.payload;
               snap["replay"] = true;
             }
             server.broadcast(m.kind, m.payload);
           },
           stop);
    server.drain(std::chrono::seconds(2));
    server.stop();
  } catch (const std::system_error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  out << "replay finished\n";
  return kOk;
}

// --- summarize ----------------------------------------------------------------------

inline int cmd_summarize(const std::string& log_path, const Flags& flags, const EnvLookup& env, double bin_width,
                         std::ostream& out, std::ostream& err) {
  std::vector<SampleRecord> records;
  Settings settings;
  try {
    settings = resolve_settings(flags, env, nullptr, Pace{true, 1.0});
    records = read_log_file(log_path);
    if (!(bin_width > 0)) throw UsageError("bin width must be > 0");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  const std::filesystem::path dir(settings.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const std::string base = std::filesystem::path(log_path).stem().string();
  try {
    detail::StagedOutputs staged(dir);
    out << "summary of " << log_path << " (" << records.size() << " samples)\n";
    detail::write_products(staged, base, records, bin_width, out);
    staged.commit();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  if (records.size() >= 2) {
    for (const auto& [param, v] : records.front().values) {
      const auto s = depth_normalized_summary(records, param, bin_width);
      out << "  " << param << " (raw " << format_number(s.raw_min) << " .. " << format_number(s.raw_max)
          << (s.degenerate ? ", constant" : "") << ")\n";
      for (const auto& b : s.bins) {
        out << "    " << std::fixed << std::setprecision(2) << std::setw(6) << b.depth_lo << "-" << std::setw(6)
            << std::left << b.depth_hi << std::right << " m  n=" << std::setw(4) << b.count
            << "  mean " << std::setprecision(3) << b.mean << '\n';
        out.unsetf(std::ios::floatfield);
      }
    }
  }
  return kOk;
}

}  // namespace aps::app
