#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>

#include "aps/app.hpp"
#include "net_client.hpp"

using namespace aps;
using namespace aps::app;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

namespace {

const std::string kScenarioDir = APS_SOURCE_DIR "/scenarios/";

EnvLookup fake_env(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](const std::string& k) -> std::optional<std::string> {
    auto it = vars.find(k);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

const EnvLookup kNoEnv = fake_env({});

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

fs::path write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

std::string replace_line(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  if (at == std::string::npos) throw std::runtime_error("pattern not found: " + from);
  return text.replace(at, from.size(), to);
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(APS_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

// --- precedence --------------------------------------------------------------------

TEST(Precedence, DefaultsWhenNothingGiven) {
  const auto s = resolve_settings({}, kNoEnv, nullptr, Pace{true, 1.0});
  EXPECT_EQ(s.seed, Scenario{}.seed);
  EXPECT_EQ(s.dt, Scenario{}.dt);
  EXPECT_EQ(s.out, "out");
  EXPECT_EQ(s.port, kDefaultPort);
  EXPECT_EQ(s.pace, (Pace{true, 1.0}));
  for (const auto& [k, v] : s.sources) EXPECT_EQ(v, "default") << k;
}

TEST(Precedence, FileBeatsDefault) {
  auto scenario = lake_hertel_scenario();
  scenario.dt = 0.005;
  const auto s = resolve_settings({}, kNoEnv, &scenario, Pace{true, 1.0});
  EXPECT_EQ(s.seed, 7u);
  EXPECT_EQ(s.dt, 0.005);
  EXPECT_EQ(s.pace, (Pace{false, 1.0}));
  EXPECT_EQ(s.sources.at("seed"), "file");
  EXPECT_EQ(s.sources.at("pace"), "file");
  EXPECT_EQ(s.sources.at("port"), "default");
}

TEST(Precedence, EnvBeatsFile) {
  const auto scenario = lake_hertel_scenario();
  const auto env = fake_env({{"APS_SEED", "11"},
                             {"APS_DT", "0.02"},
                             {"APS_OUT", "/tmp/envout"},
                             {"APS_PORT", "9100"},
                             {"APS_PACE", "fast"}});
  const auto s = resolve_settings({}, env, &scenario, Pace{false, 1.0});
  EXPECT_EQ(s.seed, 11u);
  EXPECT_EQ(s.dt, 0.02);
  EXPECT_EQ(s.out, "/tmp/envout");
  EXPECT_EQ(s.port, 9100);
  EXPECT_EQ(s.pace, (Pace{true, 1.0}));
  for (const auto& [k, v] : s.sources) EXPECT_EQ(v, "env") << k;
}

TEST(Precedence, FlagBeatsEnv) {
  const auto scenario = lake_hertel_scenario();
  const auto env = fake_env({{"APS_SEED", "11"},
                             {"APS_DT", "0.02"},
                             {"APS_OUT", "/tmp/envout"},
                             {"APS_PORT", "9100"},
                             {"APS_PACE", "fast"}});
  Flags f;
  f.seed = "12";
  f.dt = "0.001";
  f.out = "/tmp/flagout";
  f.port = "0";
  f.pace = "10x";
  const auto s = resolve_settings(f, env, &scenario, Pace{true, 1.0});
  EXPECT_EQ(s.seed, 12u);
  EXPECT_EQ(s.dt, 0.001);
  EXPECT_EQ(s.out, "/tmp/flagout");
  EXPECT_EQ(s.port, 0);
  EXPECT_EQ(s.pace, (Pace{false, 10.0}));
  for (const auto& [k, v] : s.sources) EXPECT_EQ(v, "flag") << k;
}

TEST(Precedence, BadValuesAreUsageErrorsNamingTheSource) {
  try {
    resolve_settings({}, fake_env({{"APS_SEED", "-4"}}), nullptr, Pace{});
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("APS_SEED"), std::string::npos) << e.what();
  }
  Flags f;
  f.port = "70000";
  EXPECT_THROW(resolve_settings(f, kNoEnv, nullptr, Pace{}), UsageError);
  f = {};
  f.dt = "0";
  EXPECT_THROW(resolve_settings(f, kNoEnv, nullptr, Pace{}), UsageError);
  f = {};
  f.pace = "warp";
  EXPECT_THROW(resolve_settings(f, kNoEnv, nullptr, Pace{}), UsageError);
}

// --- check ---------------------------------------------------------------------------

TEST(Check, DefaultScenarioPrintsFlotationAndPasses) {
  std::ostringstream out, err;
  EXPECT_EQ(cmd_check("", out, err), kOk);
  const auto text = out.str();
  EXPECT_NE(text.find("1255.825 N"), std::string::npos) << text;
  EXPECT_NE(text.find("106.679 kg"), std::string::npos) << text;
  EXPECT_NE(text.find("8.163"), std::string::npos) << text;
  EXPECT_NE(text.find("compatible"), std::string::npos);
  std::ostringstream out2;
  EXPECT_EQ(cmd_check(kScenarioDir + "lake_hertel.yaml", out2, err), kOk);
}

TEST(Check, OverweightProbeIsCompatibilityFailure) {
  const auto dir = fresh_dir("aps_check_heavy");
  const auto text = replace_line(slurp(kScenarioDir + "lake_hertel.yaml"), "mass_air: 1.5", "mass_air: 12");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_check(write_file(dir / "heavy.yaml", text).string(), out, err), kCompatibility);
  EXPECT_NE(out.str().find("[FAIL] (b)"), std::string::npos) << out.str();
}

TEST(Check, ParseErrorsAreUsageFailures) {
  const auto dir = fresh_dir("aps_check_bad");
  const auto text = replace_line(slurp(kScenarioDir + "lake_hertel.yaml"), "pontoon_count: 2", "pontoon_count: 0");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_check(write_file(dir / "zero.yaml", text).string(), out, err), kUsage);
  EXPECT_NE(err.str().find("pontoon"), std::string::npos) << err.str();
  EXPECT_TRUE(out.str().empty());
  EXPECT_EQ(cmd_check("/nonexistent/scenario.yaml", out, err), kUsage);
}

// --- run -----------------------------------------------------------------------------

TEST(Run, WritesProductsAndManifest) {
  const auto dir = fresh_dir("aps_run_products");
  Flags f;
  f.out = dir.string();
  std::ostringstream out, err;
  const auto report = run_headless(kScenarioDir + "lake_hertel.yaml", f, kNoEnv, out, err);
  ASSERT_EQ(report.exit_code, kOk) << err.str();
  EXPECT_EQ(report.base.rfind("lake_hertel_7_", 0), 0u);
  const auto& m = report.manifest;
  EXPECT_EQ(m["status"], "completed");
  EXPECT_EQ(m["profiles"], 4);
  EXPECT_EQ(m["config_hash"], config_hash(lake_hertel_scenario()));
  EXPECT_EQ(m["settings_source"]["seed"], "file");
  for (const auto& name : m["outputs"]) EXPECT_TRUE(fs::exists(dir / name.get<std::string>())) << name;
  for (const auto& e : fs::directory_iterator(dir)) {
    EXPECT_NE(e.path().extension(), ".partial") << e.path();
  }
  const auto on_disk = nlohmann::json::parse(slurp(dir / (report.base + "_manifest.json")));
  EXPECT_EQ(on_disk, m);
  EXPECT_EQ(read_log_file((dir / (report.base + ".ndjson")).string()).size(), m["samples"].get<std::size_t>());
}

TEST(Run, SameSeedTwiceGivesByteIdenticalLogs) {
  const auto a = fresh_dir("aps_run_det_a");
  const auto b = fresh_dir("aps_run_det_b");
  std::ostringstream out, err;
  Flags fa, fb;
  fa.out = a.string();
  const auto ra = run_headless(kScenarioDir + "lake_hertel.yaml", fa, kNoEnv, out, err);
  const auto rb = run_headless(kScenarioDir + "lake_hertel.yaml", {}, fake_env({{"APS_OUT", b.string()}}), out, err);
  ASSERT_EQ(ra.base, rb.base);
  for (const char* suffix : {".ndjson", ".csv", "_profiles.csv", "_telemetry.ndjson"}) {
    const auto bytes = slurp(a / (ra.base + suffix));
    EXPECT_FALSE(bytes.empty()) << suffix;
    EXPECT_EQ(bytes, slurp(b / (rb.base + suffix))) << suffix;
  }
}

TEST(Run, SeedOverrideRenamesAndChangesSamples) {
  const auto dir = fresh_dir("aps_run_seed");
  Flags f;
  f.out = dir.string();
  f.seed = "99";
  std::ostringstream out, err;
  const auto r = run_headless("", f, kNoEnv, out, err);
  ASSERT_EQ(r.exit_code, kOk);
  EXPECT_EQ(r.base.rfind("lake_hertel_99_", 0), 0u);
  EXPECT_EQ(r.manifest["seed"], 99);
  EXPECT_EQ(r.manifest["settings_source"]["seed"], "flag");
}

TEST(Run, VegetationIsFaultTerminatedWithArtifacts) {
  const auto dir = fresh_dir("aps_run_veg");
  Flags f;
  f.out = dir.string();
  std::ostringstream out, err;
  const auto r = run_headless(kScenarioDir + "vegetation.yaml", f, kNoEnv, out, err);
  EXPECT_EQ(r.exit_code, kFaultTerminated);
  EXPECT_EQ(r.manifest["status"], "paused_fault");
  ASSERT_EQ(r.manifest["faults"].size(), 1u);
  EXPECT_NEAR(r.manifest["faults"][0]["depth"].get<double>(), 4.0, 0.02);
  EXPECT_TRUE(fs::exists(dir / (r.base + "_manifest.json")));
  EXPECT_TRUE(fs::exists(dir / (r.base + "_profiles.csv")));
}

TEST(Run, IncompatibleProbeExitsTwoAndWritesNothing) {
  const auto dir = fresh_dir("aps_run_heavy");
  const auto text = replace_line(slurp(kScenarioDir + "lake_hertel.yaml"), "mass_air: 1.5", "mass_air: 12");
  const auto path = write_file(fs::temp_directory_path() / "aps_heavy.yaml", text);
  Flags f;
  f.out = dir.string();
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(path.string(), f, kNoEnv, out, err), kCompatibility);
  EXPECT_TRUE(fs::is_empty(dir));
}

TEST(Run, DtThatBreaksControlPeriodIsUsageError) {
  Flags f;
  f.dt = "0.03";
  f.out = fresh_dir("aps_run_dt").string();
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run("", f, kNoEnv, out, err), kUsage);
  EXPECT_NE(err.str().find("multiple of dt"), std::string::npos) << err.str();
}

// --- summarize ---------------------------------------------------------------------

TEST(Summarize, RebuildsProductsFromLog) {
  const auto dir = fresh_dir("aps_summarize");
  Flags f;
  f.out = dir.string();
  std::ostringstream out, err;
  const auto r = run_headless("", f, kNoEnv, out, err);
  ASSERT_EQ(r.exit_code, kOk);
  const auto sum_dir = dir / "summary";
  Flags g;
  g.out = sum_dir.string();
  std::ostringstream sout;
  EXPECT_EQ(cmd_summarize((dir / (r.base + ".ndjson")).string(), g, kNoEnv, 0.5, sout, err), kOk);
  EXPECT_NE(sout.str().find("profiles: 4"), std::string::npos) << sout.str();
  EXPECT_EQ(slurp(sum_dir / (r.base + "_profiles.csv")), slurp(dir / (r.base + "_profiles.csv")));
  EXPECT_EQ(slurp(sum_dir / (r.base + "_summary_temperature.csv")),
            slurp(dir / (r.base + "_summary_temperature.csv")));
}

TEST(Summarize, UnreadableLogIsUsageError) {
  const auto bad = write_file(fs::temp_directory_path() / "aps_bad_log.ndjson", "{\"t\": 1}\n");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_summarize(bad.string(), {}, kNoEnv, 0.5, out, err), kUsage);
  EXPECT_NE(err.str().find("log line 1"), std::string::npos) << err.str();
  EXPECT_EQ(cmd_summarize("/nonexistent.ndjson", {}, kNoEnv, 0.5, out, err), kUsage);
}

// --- serve / replay ------------------------------------------------------------------

TEST(Serve, EndpointUpWaitsForStartThenStops) {
  std::atomic<bool> stop{false};
  std::atomic<std::uint16_t> port{0};
  Flags f;
  f.port = "0";
  f.pace = "20x";
  f.out = fresh_dir("aps_serve").string();
  ServeOptions o;
  o.on_ready = [&](std::uint16_t p) { port = p; };
  std::ostringstream out, err;
  int code = -1;
  std::thread t([&] { code = cmd_serve("", f, kNoEnv, o, stop, out, err); });
  while (port == 0) std::this_thread::sleep_for(2ms);
  {
    aps::testing::RawClient client(port);
    auto snap = client.read_message();
    ASSERT_TRUE(snap);
    EXPECT_EQ(snap->payload["mission_status"], "not_started");
    client.send(R"({"kind":"start_mission","command_id":"s"})" "\n");
    auto ack = client.read_until([](const auto& m) { return m.kind == protocol::MessageKind::Ack; });
    ASSERT_TRUE(ack);
    EXPECT_EQ(ack->payload["accepted"], true);
  }
  stop = true;
  t.join();
  EXPECT_EQ(code, kOk) << err.str();
}

TEST(Serve, PortBusyIsStartupError) {
  net::TelemetryServer holder(net::ServerOptions{}, nullptr, nullptr);
  Flags f;
  f.port = std::to_string(holder.port());
  f.out = fresh_dir("aps_serve_busy").string();
  std::atomic<bool> stop{false};
  std::ostringstream out, err;
  EXPECT_EQ(cmd_serve("", f, kNoEnv, {}, stop, out, err), kUsage);
  EXPECT_NE(err.str().find("busy"), std::string::npos) << err.str();
}

TEST(Replay, StreamsTranscriptToFirstClient) {
  const auto dir = fresh_dir("aps_replay_cmd");
  Flags rf;
  rf.out = dir.string();
  std::ostringstream out, err;
  const auto r = run_headless(kScenarioDir + "vegetation.yaml", rf, kNoEnv, out, err);
  const auto transcript = dir / (r.base + "_telemetry.ndjson");
  const auto recorded = read_transcript_file(transcript.string());

  std::atomic<bool> stop{false};
  std::atomic<std::uint16_t> port{0};
  Flags f;
  f.port = "0";
  f.pace = "fast";
  ReplayOptions o;
  o.on_ready = [&](std::uint16_t p) { port = p; };
  int code = -1;
  std::thread t([&] { code = cmd_replay(transcript.string(), f, kNoEnv, o, stop, out, err); });
  while (port == 0) std::this_thread::sleep_for(2ms);
  aps::testing::RawClient client(port);
  std::size_t count = 0;
  int faults = 0;
  while (auto m = client.read_message(2s)) {
    if (m->payload.contains("snapshot")) continue;
    ++count;
    faults += m->kind == protocol::MessageKind::Fault;
  }
  t.join();
  EXPECT_EQ(code, kOk);
  EXPECT_EQ(count, recorded.size());
  EXPECT_EQ(faults, 1);
}

// --- executable -------------------------------------------------------------------

TEST(Executable, ExitCodes) {
  const auto dir = fresh_dir("aps_exe");
  EXPECT_EQ(run_cli("check"), 0);
  EXPECT_EQ(run_cli("check /nonexistent.yaml"), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("run --bogus-flag"), 1);
  EXPECT_EQ(run_cli("run --out " + dir.string()), 0);
  EXPECT_EQ(run_cli("run " + kScenarioDir + "vegetation.yaml --out " + dir.string()), 3);
  const auto text = replace_line(slurp(kScenarioDir + "lake_hertel.yaml"), "mass_air: 1.5", "mass_air: 12");
  EXPECT_EQ(run_cli("check " + write_file(dir / "heavy.yaml", text).string()), 2);
  EXPECT_EQ(run_cli("run --seed abc"), 1);
  EXPECT_EQ(run_cli("--help"), 0);
}

TEST(Executable, EnvironmentVariablesReachTheBinary) {
  const auto dir = fresh_dir("aps_exe_env");
  const std::string cmd = "APS_OUT=" + dir.string() + " APS_SEED=5 " + APS_CLI_PATH + " run >/dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  bool found = false;
  for (const auto& e : fs::directory_iterator(dir)) {
    found |= e.path().filename().string().rfind("lake_hertel_5_", 0) == 0;
  }
  EXPECT_TRUE(found);
}
