#pragma once

// Telemetry wire protocol: newline-delimited UTF-8 JSON documents, one
// message per line. See docs/protocol.md for the field-by-field schema.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace aps::protocol {

inline constexpr int kProtocolVersion = 1;

enum class MessageKind { State, Sample, Fault, Ack, MissionEvent };
enum class CommandKind { SetTargetDepth, ManualStep, SetUnderway, StartMission, Pause, Resume, AckFault };

constexpr std::string_view to_string(MessageKind k) {
  switch (k) {
    case MessageKind::State: return "state";
    case MessageKind::Sample: return "sample";
    case MessageKind::Fault: return "fault";
    case MessageKind::Ack: return "ack";
    case MessageKind::MissionEvent: return "mission_event";
  }
  return "?";
}

constexpr std::string_view to_string(CommandKind k) {
  switch (k) {
    case CommandKind::SetTargetDepth: return "set_target_depth";
    case CommandKind::ManualStep: return "manual_step";
    case CommandKind::SetUnderway: return "set_underway";
    case CommandKind::StartMission: return "start_mission";
    case CommandKind::Pause: return "pause";
    case CommandKind::Resume: return "resume";
    case CommandKind::AckFault: return "ack_fault";
  }
  return "?";
}

inline std::optional<MessageKind> message_kind_from(std::string_view s) {
  for (auto k : {MessageKind::State, MessageKind::Sample, MessageKind::Fault, MessageKind::Ack,
                 MessageKind::MissionEvent}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

inline std::optional<CommandKind> command_kind_from(std::string_view s) {
  for (auto k : {CommandKind::SetTargetDepth, CommandKind::ManualStep, CommandKind::SetUnderway,
                 CommandKind::StartMission, CommandKind::Pause, CommandKind::Resume,
                 CommandKind::AckFault}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

/// Server → client.
struct TelemetryMessage {
  MessageKind kind = MessageKind::State;
  std::uint64_t sequence = 0;
  nlohmann::json payload = nlohmann::json::object();

  friend bool operator==(const TelemetryMessage&, const TelemetryMessage&) = default;
};

/// Client → server.
struct CommandMessage {
  CommandKind kind = CommandKind::Pause;
  std::string command_id;
  nlohmann::json arguments = nlohmann::json::object();

  friend bool operator==(const CommandMessage&, const CommandMessage&) = default;
};

class DecodeError : public std::runtime_error {
 public:
  DecodeError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}
  [[nodiscard]] std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Offset of the first invalid UTF-8 byte, or nullopt when valid.
inline std::optional<std::size_t> find_invalid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return i;
    }
    if (i + len > s.size()) return i;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return i + k;
      cp = (cp << 6) | (cc & 0x3F);
    }
    const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
                          (len == 4 && cp < 0x10000);
    if (overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return i;
    i += len;
  }
  return std::nullopt;
}

/// One line, newline-terminated.
inline std::string encode(const TelemetryMessage& m) {
  nlohmann::json j = {{"kind", to_string(m.kind)}, {"seq", m.sequence}, {"payload", m.payload}};
  return j.dump() + "\n";
}

inline std::string encode(const CommandMessage& m) {
  nlohmann::json j = {{"kind", to_string(m.kind)}, {"command_id", m.command_id}, {"args", m.arguments}};
  return j.dump() + "\n";
}

namespace detail {

inline nlohmann::json parse_line(std::string_view line, std::size_t base_offset) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (auto bad = find_invalid_utf8(line)) throw DecodeError("invalid UTF-8", base_offset + *bad);
  try {
    auto j = nlohmann::json::parse(line);
    if (!j.is_object()) throw DecodeError("message is not a JSON object", base_offset);
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw DecodeError(std::string("malformed message: ") + e.what(), base_offset + e.byte - 1);
  }
}

}  // namespace detail

inline TelemetryMessage decode_telemetry(std::string_view line, std::size_t base_offset = 0) {
  const auto j = detail::parse_line(line, base_offset);
  TelemetryMessage m;
  const auto kind = message_kind_from(j.value("kind", ""));
  if (!kind) throw DecodeError("unknown telemetry kind '" + j.value("kind", "") + "'", base_offset);
  m.kind = *kind;
  if (!j.contains("seq") || !j["seq"].is_number_unsigned()) {
    throw DecodeError("missing or invalid 'seq'", base_offset);
  }
  m.sequence = j["seq"].get<std::uint64_t>();
  m.payload = j.value("payload", nlohmann::json::object());
  return m;
}

/// Command decoding keeps whatever command_id it could recover so a rejected
/// command can still be acknowledged.
struct CommandParse {
  std::optional<CommandMessage> command;
  std::string command_id;
  std::string error;
};

inline CommandParse parse_command(std::string_view line, std::size_t base_offset = 0) {
  CommandParse out;
  nlohmann::json j;
  try {
    j = detail::parse_line(line, base_offset);
  } catch (const DecodeError& e) {
    out.error = e.what();
    return out;
  }
  if (j.contains("command_id") && j["command_id"].is_string()) {
    out.command_id = j["command_id"].get<std::string>();
  }
  const auto kind_name = j.contains("kind") && j["kind"].is_string() ? j["kind"].get<std::string>() : "";
  const auto kind = command_kind_from(kind_name);
  if (!kind) {
    out.error = "unknown command kind '" + kind_name + "'";
    return out;
  }
  if (out.command_id.empty()) {
    out.error = "missing command_id";
    return out;
  }
  nlohmann::json args = j.value("args", nlohmann::json::object());
  if (!args.is_object()) {
    out.error = "'args' must be an object";
    return out;
  }
  if (*kind == CommandKind::SetTargetDepth && !(args.contains("depth") && args["depth"].is_number())) {
    out.error = "set_target_depth requires numeric args.depth";
    return out;
  }
  if (*kind == CommandKind::ManualStep) {
    const auto dir = args.value("direction", "");
    if (dir != "up" && dir != "down") {
      out.error = "manual_step requires args.direction 'up' or 'down'";
      return out;
    }
    if (args.contains("step") && !args["step"].is_number()) {
      out.error = "manual_step args.step must be numeric";
      return out;
    }
  }
  out.command = CommandMessage{*kind, out.command_id, std::move(args)};
  return out;
}

inline CommandMessage decode_command(std::string_view line, std::size_t base_offset = 0) {
  auto parsed = parse_command(line, base_offset);
  if (!parsed.command) throw DecodeError(parsed.error, base_offset);
  return *parsed.command;
}

/// Splits a byte stream into lines, tracking absolute offsets. Empty lines are
/// skipped and counted; an unterminated tail at end of stream is an error.
class LineSplitter {
 public:
  struct Line {
    std::string text;
    std::size_t offset = 0;
  };

  void feed(std::string_view bytes) { buffer_.append(bytes); }

  std::optional<Line> next() {
    while (true) {
      const auto nl = buffer_.find('\n', scan_);
      if (nl == std::string::npos) {
        scan_ = buffer_.size();
        return std::nullopt;
      }
      Line line{buffer_.substr(0, nl), consumed_};
      buffer_.erase(0, nl + 1);
      consumed_ += nl + 1;
      scan_ = 0;
      if (!line.text.empty() && line.text.back() == '\r') line.text.pop_back();
      if (line.text.empty()) {
        ++skipped_empty_;
        continue;
      }
      return line;
    }
  }

  /// Call at end of stream.
  void finish() const {
    if (!buffer_.empty()) throw DecodeError("truncated line (no terminating newline)", consumed_);
  }

  [[nodiscard]] std::size_t skipped_empty_lines() const { return skipped_empty_; }
  [[nodiscard]] std::size_t pending_bytes() const { return buffer_.size(); }

 private:
  std::string buffer_;
  std::size_t scan_ = 0;
  std::size_t consumed_ = 0;
  std::size_t skipped_empty_ = 0;
};

inline std::vector<TelemetryMessage> decode_stream(std::string_view bytes,
                                                   std::size_t* skipped_empty = nullptr) {
  LineSplitter splitter;
  splitter.feed(bytes);
  std::vector<TelemetryMessage> out;
  while (auto line = splitter.next()) out.push_back(decode_telemetry(line->text, line->offset));
  splitter.finish();
  if (skipped_empty) *skipped_empty = splitter.skipped_empty_lines();
  return out;
}

inline TelemetryMessage make_ack(std::string command_id, bool accepted, std::string reason,
                                 std::string warning = {}) {
  nlohmann::json payload = {{"command_id", command_id.empty() ? nlohmann::json(nullptr)
                                                              : nlohmann::json(command_id)},
                            {"accepted", accepted},
                            {"reason", reason}};
  if (!warning.empty()) payload["warning"] = warning;
  return {MessageKind::Ack, 0, std::move(payload)};
}

}  // namespace aps::protocol
