#pragma once

// Live sessions: the single owner of a MissionRunner, fed by a bounded command
// queue and publishing telemetry payloads. Pacing (fast or wall-clock times a
// speed factor) is a session option; the loop body is identical either way.
// Also the transcript format that makes sessions replayable.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "aps/protocol.hpp"
#include "aps/runner.hpp"

namespace aps {

using ClientId = std::uint64_t;

struct Pace {
  bool fast = true;
  double factor = 1.0;  // sim seconds per wall second when not fast

  friend bool operator==(const Pace&, const Pace&) = default;
};

/// "fast", "realtime", or a positive speed factor such as "10" or "10x".
inline Pace parse_pace(std::string s) {
  if (s == "fast") return {true, 1.0};
  if (s == "realtime") return {false, 1.0};
  if (!s.empty() && (s.back() == 'x' || s.back() == 'X')) s.pop_back();
  std::size_t used = 0;
  double f = 0.0;
  try {
    f = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !(f > 0) || !std::isfinite(f)) {
    throw std::invalid_argument("pace must be 'fast', 'realtime' or a positive speed factor, got '" + s + "'");
  }
  return {false, f};
}

inline std::string to_string(const Pace& p) {
  if (p.fast) return "fast";
  if (p.factor == 1.0) return "realtime";
  return format_number(p.factor) + "x";
}

/// A broadcast message stamped with simulated time.
struct Outbound {
  double t = 0.0;
  protocol::MessageKind kind = protocol::MessageKind::State;
  nlohmann::json payload;

  friend bool operator==(const Outbound&, const Outbound&) = default;
};

// --- payloads -----------------------------------------------------------------------

inline nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json state_payload(const MissionRunner& r) {
  const auto& p = r.plant();
  const auto& c = r.controller();
  return {
      {"protocol_version", protocol::kProtocolVersion},
      {"t", r.time()},
      {"mission_status", to_string(r.status())},
      {"leg", r.leg_index()},
      {"line_out", p.line_out},
      {"probe_depth", p.probe_depth},
      {"probe_velocity", p.probe_velocity},
      {"tether_taut", p.tether_taut},
      {"measured_depth", r.last_measured_depth()},
      {"relay", to_string(c.relay_out)},
      {"mode", to_string(c.mode)},
      {"target_depth", optional_number(c.target_depth)},
      {"fault_reason", c.fault_reason ? nlohmann::json(*c.fault_reason) : nlohmann::json(nullptr)},
      {"deadband", c.deadband},
      {"spool_capacity", c.spool_capacity},
      {"asv", {{"lat", p.asv_position.lat},
               {"lon", p.asv_position.lon},
               {"speed", p.asv_speed},
               {"heading", p.asv_heading}}},
  };
}

inline Outbound to_outbound(const RunnerEvent& e) {
  if (const auto* s = std::get_if<SampleRecord>(&e)) {
    return {s->timestamp, protocol::MessageKind::Sample, to_json(*s)};
  }
  if (const auto* f = std::get_if<FaultEvent>(&e)) {
    return {f->time, protocol::MessageKind::Fault,
            {{"t", f->time}, {"reason", f->reason}, {"depth", f->depth}, {"line_out", f->line_out}}};
  }
  const auto& m = std::get<MissionEvent>(e);
  return {m.time, protocol::MessageKind::MissionEvent, {{"t", m.time}, {"event", m.event}, {"detail", m.detail}}};
}

// --- transcripts --------------------------------------------------------------------

inline std::string transcript_line(const Outbound& m) {
  nlohmann::json j = {{"t", m.t}, {"kind", protocol::to_string(m.kind)}, {"payload", m.payload}};
  return j.dump() + "\n";
}

/// Reads a session transcript. Plain sample logs are accepted too and become
/// a stream of sample messages.
inline std::vector<Outbound> read_transcript(std::istream& in) {
  std::vector<Outbound> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains("kind")) {
        const auto kind = protocol::message_kind_from(j.at("kind").get<std::string>());
        if (!kind) throw std::runtime_error("unknown kind '" + j.at("kind").get<std::string>() + "'");
        out.push_back({j.at("t").get<double>(), *kind, j.at("payload")});
      } else {
        const auto r = record_from_json(j);
        out.push_back({r.timestamp, protocol::MessageKind::Sample, to_json(r)});
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("transcript line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<Outbound> read_transcript_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_transcript(in);
}

// --- pacing -------------------------------------------------------------------------

/// Lateness of each paced wake-up relative to its schedule.
struct TimingStats {
  std::size_t steps = 0;
  double max_late = 0.0;  // s
  double p99_late = 0.0;  // s
};

class Pacer {
 public:
  explicit Pacer(Pace pace) : pace_(pace), start_(std::chrono::steady_clock::now()) {}

  /// Blocks until simulated time `t` is due.
  void wait_until(double t) {
    if (pace_.fast) return;
    const auto due = start_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                  std::chrono::duration<double>(t / pace_.factor));
    std::this_thread::sleep_until(due);
    const double late = std::chrono::duration<double>(std::chrono::steady_clock::now() - due).count();
    if (late_.size() < kMaxRecorded) late_.push_back(std::max(0.0, late));
  }

  [[nodiscard]] TimingStats stats() const {
    TimingStats s;
    s.steps = late_.size();
    if (late_.empty()) return s;
    auto sorted = late_;
    std::sort(sorted.begin(), sorted.end());
    s.max_late = sorted.back();
    s.p99_late = sorted[std::min(sorted.size() - 1, static_cast<std::size_t>(0.99 * static_cast<double>(sorted.size())))];
    return s;
  }

 private:
  static constexpr std::size_t kMaxRecorded = 1u << 22;
  Pace pace_;
  std::chrono::steady_clock::time_point start_;
  std::vector<double> late_;
};

// --- live session -------------------------------------------------------------------

struct SessionOptions {
  Pace pace{};
  bool auto_start = true;          // false: wait for a start_mission command
  bool stop_when_finished = true;  // false keeps the plant running (serve)
  std::size_t command_queue_capacity = 256;
  std::string log_path;         // sample log; empty for none
  std::string transcript_path;  // broadcast transcript; empty for none
};

class LiveSession {
 public:
  using Broadcast = std::function<void(const Outbound&)>;
  using Reply = std::function<void(ClientId, const protocol::TelemetryMessage&)>;

  LiveSession(Scenario scenario, SessionOptions options)
      : options_(std::move(options)), runner_(std::move(scenario), options_.log_path) {
    if (!options_.transcript_path.empty()) {
      transcript_.open(options_.transcript_path, std::ios::binary | std::ios::trunc);
      if (!transcript_) throw std::runtime_error("cannot open transcript " + options_.transcript_path);
    }
    snapshot_ = state_payload(runner_);
  }

  void set_broadcast(Broadcast b) { broadcast_ = std::move(b); }
  void set_reply(Reply r) { reply_ = std::move(r); }

  /// Thread-safe. Malformed commands and a full queue are rejected here; valid
  /// commands are applied in arrival order at the next control tick.
  void submit(ClientId client, const std::string& line) {
    auto parsed = protocol::parse_command(line);
    if (!parsed.command) {
      reply(client, protocol::make_ack(parsed.command_id, false, parsed.error));
      return;
    }
    {
      std::lock_guard lock(queue_mutex_);
      if (queue_.size() < options_.command_queue_capacity) {
        queue_.push_back({client, std::move(*parsed.command)});
        return;
      }
    }
    reply(client, protocol::make_ack(parsed.command_id, false, "command queue full"));
  }

  /// Latest state payload; safe from any thread.
  [[nodiscard]] nlohmann::json snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
  }

  /// Runs the loop on the calling thread until `stop` is set or, with
  /// stop_when_finished, the mission leaves the running state.
  void run(const std::atomic<bool>& stop) {
    Pacer pacer(options_.pace);
    const long control = runner_.scenario().control_ticks();
    const long broadcast_every = runner_.scenario().broadcast_ticks();
    if (options_.auto_start && runner_.status() == MissionStatus::NotStarted) runner_.start_mission();
    publish_events();
    publish_state();
    while (!stop) {
      if (options_.stop_when_finished && runner_.status() != MissionStatus::Running &&
          runner_.status() != MissionStatus::Paused && runner_.status() != MissionStatus::NotStarted) {
        break;
      }
      if (runner_.tick_index() % control == 0) apply_commands();
      runner_.tick();
      publish_events();
      if (runner_.tick_index() % broadcast_every == 0) publish_state();
      pacer.wait_until(runner_.time());
    }
    publish_state();
    runner_.log().flush();
    if (transcript_.is_open()) transcript_.flush();
    timing_ = pacer.stats();
  }

  void close() {
    runner_.log().close();
    if (transcript_.is_open()) transcript_.close();
  }

  [[nodiscard]] const MissionRunner& runner() const { return runner_; }
  [[nodiscard]] MissionRunner& runner() { return runner_; }
  [[nodiscard]] TimingStats timing() const { return timing_; }

 private:
  struct Pending {
    ClientId client;
    protocol::CommandMessage command;
  };

  void reply(ClientId client, protocol::TelemetryMessage m) {
    if (reply_) reply_(client, m);
  }

  void publish(Outbound m) {
    if (transcript_.is_open()) transcript_ << transcript_line(m);
    if (broadcast_) broadcast_(m);
  }

  void publish_state() {
    auto s = state_payload(runner_);
    {
      std::lock_guard lock(snapshot_mutex_);
      snapshot_ = s;
    }
    publish({runner_.time(), protocol::MessageKind::State, std::move(s)});
  }

  void publish_events() {
    for (auto& e : runner_.take_events()) publish(to_outbound(e));
  }

  void apply_commands() {
    std::deque<Pending> batch;
    {
      std::lock_guard lock(queue_mutex_);
      batch.swap(queue_);
    }
    for (auto& p : batch) {
      std::string reason;
      std::string warning;
      try {
        warning = apply(p.command);
      } catch (const std::exception& e) {
        reason = e.what();
      }
      const bool accepted = reason.empty();
      reply(p.client, protocol::make_ack(p.command.command_id, accepted, reason, warning));
      publish_events();
      // Audit trail: every command, in the order applied.
      publish({runner_.time(), protocol::MessageKind::MissionEvent,
               {{"t", runner_.time()},
                {"event", "operator_command"},
                {"detail", std::string(protocol::to_string(p.command.kind)) + " " + p.command.command_id +
                               " from client " + std::to_string(p.client) +
                               (accepted ? ": accepted" : ": rejected: " + reason)},
                {"client", p.client},
                {"command_id", p.command.command_id},
                {"command", protocol::to_string(p.command.kind)},
                {"args", p.command.arguments},
                {"accepted", accepted}}});
    }
  }

  std::string apply(const protocol::CommandMessage& c) {
    using protocol::CommandKind;
    switch (c.kind) {
      case CommandKind::SetTargetDepth:
        runner_.command_target_depth(c.arguments.at("depth").get<double>());
        return {};
      case CommandKind::ManualStep: {
        const auto dir = c.arguments.at("direction").get<std::string>() == "up" ? StepDirection::Up
                                                                                 : StepDirection::Down;
        std::optional<double> step;
        if (c.arguments.contains("step")) step = c.arguments["step"].get<double>();
        return runner_.manual_step(dir, step);
      }
      case CommandKind::SetUnderway: runner_.set_underway(); return {};
      case CommandKind::StartMission: runner_.start_mission(); return {};
      case CommandKind::Pause: runner_.pause(); return {};
      case CommandKind::Resume: runner_.resume(); return {};
      case CommandKind::AckFault: return runner_.acknowledge_fault();
    }
    throw std::logic_error("unhandled command");
  }

  SessionOptions options_;
  MissionRunner runner_;
  std::ofstream transcript_;
  Broadcast broadcast_;
  Reply reply_;

  std::mutex queue_mutex_;
  std::deque<Pending> queue_;
  mutable std::mutex snapshot_mutex_;
  nlohmann::json snapshot_;
  TimingStats timing_;
};

/// Streams recorded messages, paced by their timestamps.
inline void replay(const std::vector<Outbound>& messages, Pace pace, const std::function<void(const Outbound&)>& emit,
                   const std::atomic<bool>& stop) {
  if (messages.empty()) return;
  Pacer pacer(pace);
  const double t0 = messages.front().t;
  for (const auto& m : messages) {
    if (stop) return;
    pacer.wait_until(m.t - t0);
    emit(m);
  }
}

}  // namespace aps
