#pragma once

// Winch depth controller: mode state machine, bang-bang regulation with a
// deadband, relay dwell, open-loop manual steps and the stall-timeout monitor.
// Every operation is a pure function of (state, input).

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "aps/geo.hpp"
#include "aps/hydro.hpp"
#include "aps/specs.hpp"

namespace aps {

enum class ControllerMode { Underway, Deploying, Holding, Retrieving, Fault, Idle };

constexpr std::string_view to_string(ControllerMode m) {
  switch (m) {
    case ControllerMode::Underway: return "underway";
    case ControllerMode::Deploying: return "deploying";
    case ControllerMode::Holding: return "holding";
    case ControllerMode::Retrieving: return "retrieving";
    case ControllerMode::Fault: return "fault";
    case ControllerMode::Idle: return "idle";
  }
  return "?";
}

inline ControllerMode mode_from_string(std::string_view s) {
  if (s == "underway") return ControllerMode::Underway;
  if (s == "deploying") return ControllerMode::Deploying;
  if (s == "holding") return ControllerMode::Holding;
  if (s == "retrieving") return ControllerMode::Retrieving;
  if (s == "fault") return ControllerMode::Fault;
  if (s == "idle") return ControllerMode::Idle;
  throw std::invalid_argument("unknown controller mode '" + std::string(s) + "'");
}

struct ControllerConfig {
  double deadband = 0.05;          // m
  double hysteresis = 0.025;       // m beyond the deadband needed to leave Holding
  double control_period = 0.1;     // s
  double stall_window = 5.0;       // s
  double stall_epsilon = 0.02;     // m
  double shallow_setpoint = 0.3;   // m, underway probe depth
  double manual_step = 0.25;       // m of line per manual step

  void validate() const {
    if (!(deadband > 0)) throw std::invalid_argument("controller.deadband must be > 0");
    if (hysteresis < 0) throw std::invalid_argument("controller.hysteresis must be >= 0");
    if (!(control_period > 0)) throw std::invalid_argument("controller.control_period must be > 0");
    if (!(stall_window > 0)) throw std::invalid_argument("controller.stall_window must be > 0");
    if (!(stall_epsilon > 0)) throw std::invalid_argument("controller.stall_epsilon must be > 0");
    if (shallow_setpoint < 0) throw std::invalid_argument("controller.shallow_setpoint must be >= 0");
    if (!(manual_step > 0)) throw std::invalid_argument("controller.manual_step must be > 0");
  }
};

enum class StepDirection { Up, Down };

struct ManualPulse {
  RelayCommand direction = RelayCommand::Off;
  double duration = 0.0;              // s of relay on-time
  std::optional<double> end_time;     // set once the relay actually engages

  friend bool operator==(const ManualPulse&, const ManualPulse&) = default;
};

struct ControllerState {
  ControllerMode mode = ControllerMode::Idle;
  std::optional<double> target_depth;
  double deadband = 0.05;
  double hysteresis = 0.025;
  RelayCommand relay_out = RelayCommand::Off;
  double last_relay_change = -std::numeric_limits<double>::infinity();
  double stall_window = 5.0;
  double stall_epsilon = 0.02;
  double stall_reference_depth = 0.0;
  double stall_reference_time = 0.0;
  double stall_reference_line = 0.0;
  bool stall_armed = false;
  std::optional<std::string> fault_reason;

  bool underway_pending = false;
  double shallow_setpoint = 0.3;
  std::optional<ManualPulse> manual;

  // Winch limits.
  double spool_capacity = 10.0;
  double min_relay_dwell = 0.5;
  double payout_speed = 0.3556;
  double retrieval_speed = 0.3302;

  // Most recent control input.
  double last_depth = 0.0;
  double last_line_out = 0.0;
  double last_time = 0.0;

  friend bool operator==(const ControllerState&, const ControllerState&) = default;
};

struct ControlInput {
  double fused_depth = 0.0;  // m
  double line_out = 0.0;     // m
  GeoPoint asv_fix{};
  double time = 0.0;         // s
};

struct ControlOutput {
  ControllerState state;
  RelayCommand relay = RelayCommand::Off;
  // Latest instant the relay may stay engaged (manual pulses); the plant
  // loop enforces it at its own resolution.
  std::optional<double> relay_cutoff;
};

template <class T>
struct WithNotice {
  T value;
  std::string warning;  // empty when the request was applied as asked
};

/// Raised when a command is refused by the state machine (e.g. while in Fault).
class CommandRejected : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline ControllerState make_controller(const ControllerConfig& config, const WinchSpec& winch) {
  config.validate();
  ControllerState s;
  s.deadband = config.deadband;
  s.hysteresis = config.hysteresis;
  s.stall_window = config.stall_window;
  s.stall_epsilon = config.stall_epsilon;
  s.shallow_setpoint = config.shallow_setpoint;
  s.spool_capacity = winch.spool_capacity.value();
  s.min_relay_dwell = winch.min_relay_dwell.value();
  s.payout_speed = winch.payout_speed.value();
  s.retrieval_speed = winch.retrieval_speed.value();
  return s;
}

namespace detail {

inline void reset_stall_reference(ControllerState& s) {
  s.stall_reference_depth = s.last_depth;
  s.stall_reference_time = s.last_time;
  s.stall_reference_line = s.last_line_out;
  s.stall_armed = false;
}

// Applies `desired` subject to spool limits and dwell. Switching Off is never
// delayed; engaging a direction waits for min_relay_dwell since the last
// change, so a reversal always passes through Off.
inline void drive_relay(ControllerState& s, RelayCommand desired, double now) {
  if (desired == RelayCommand::Payout && s.last_line_out >= s.spool_capacity) {
    desired = RelayCommand::Off;
  }
  if (desired == RelayCommand::Retrieve && s.last_line_out <= 0.0) desired = RelayCommand::Off;
  if (desired == s.relay_out) return;
  // A reversal drops to Off first; the new direction engages after the dwell.
  if (desired != RelayCommand::Off && s.relay_out != RelayCommand::Off) desired = RelayCommand::Off;

  if (desired != RelayCommand::Off && now - s.last_relay_change < s.min_relay_dwell) {
    desired = RelayCommand::Off;
    if (s.relay_out == RelayCommand::Off) return;
  }
  s.relay_out = desired;
  s.last_relay_change = now;
}

inline void enter_fault(ControllerState& s, std::string reason, double now) {
  s.mode = ControllerMode::Fault;
  s.fault_reason = std::move(reason);
  s.manual.reset();
  s.underway_pending = false;
  drive_relay(s, RelayCommand::Off, now);
  s.stall_armed = false;
}

// Bang-bang law on the current target.
inline void regulate(ControllerState& s, double now) {
  const double error = *s.target_depth - s.last_depth;
  const double band = s.mode == ControllerMode::Holding ? s.deadband + s.hysteresis : s.deadband;
  if (std::abs(error) <= band) {
    s.mode = ControllerMode::Holding;
    drive_relay(s, RelayCommand::Off, now);
  } else if (error > 0) {
    s.mode = ControllerMode::Deploying;
    drive_relay(s, RelayCommand::Payout, now);
  } else {
    s.mode = ControllerMode::Retrieving;
    drive_relay(s, RelayCommand::Retrieve, now);
  }
}

}  // namespace detail

/// Rolls the stall reference forward while depth moves (or slack is being
/// taken in), and faults when the
/// relay has been engaged for stall_window without stall_epsilon of motion.
inline ControllerState detect_stall(const ControllerState& ctrl, const ControlInput& input) {
  ControllerState s = ctrl;
  if (s.relay_out == RelayCommand::Off || s.mode == ControllerMode::Fault) {
    s.stall_armed = false;
    return s;
  }
  auto roll = [&] {
    s.stall_reference_depth = input.fused_depth;
    s.stall_reference_time = input.time;
    s.stall_reference_line = input.line_out;
  };
  if (!s.stall_armed) {
    s.stall_armed = true;
    roll();
    return s;
  }
  // Taking in slack over a resting probe counts as progress.
  const bool slack_in = s.relay_out == RelayCommand::Retrieve &&
                        input.line_out > input.fused_depth + s.stall_epsilon &&
                        s.stall_reference_line - input.line_out >= s.stall_epsilon;
  if (std::abs(input.fused_depth - s.stall_reference_depth) >= s.stall_epsilon || slack_in) {
    roll();
    return s;
  }
  if (input.time - s.stall_reference_time >= s.stall_window) {
    detail::enter_fault(s,
                        s.relay_out == RelayCommand::Payout ? "stall during payout"
                                                            : "stall during retrieval",
                        input.time);
  }
  return s;
}

inline ControllerState command_target_depth(const ControllerState& ctrl, double target,
                                            const WinchSpec& limits) {
  if (ctrl.mode == ControllerMode::Fault) {
    throw CommandRejected("controller in fault (" + ctrl.fault_reason.value_or("") +
                          "); acknowledge first");
  }
  const double spool = limits.spool_capacity.value();
  if (!(target >= 0.0) || target > spool) {
    throw std::out_of_range("target depth " + std::to_string(target) + " m outside [0, " +
                            std::to_string(spool) + "] m");
  }
  ControllerState s = ctrl;
  s.target_depth = target;
  s.manual.reset();
  s.underway_pending = false;
  if (s.mode == ControllerMode::Holding) s.mode = ControllerMode::Idle;
  detail::reset_stall_reference(s);
  detail::regulate(s, s.last_time);
  return s;
}

inline ControlOutput control_step(const ControllerState& ctrl, const ControlInput& input) {
  ControllerState s = ctrl;
  s.last_depth = input.fused_depth;
  s.last_line_out = input.line_out;
  s.last_time = input.time;
  const double now = input.time;
  std::optional<double> cutoff;

  if (s.mode == ControllerMode::Fault || s.mode == ControllerMode::Idle ||
      s.mode == ControllerMode::Underway) {
    detail::drive_relay(s, RelayCommand::Off, now);
  } else if (s.manual) {
    auto& pulse = *s.manual;
    if (pulse.end_time && now >= *pulse.end_time) {
      s.manual.reset();
      s.mode = ControllerMode::Idle;
      detail::drive_relay(s, RelayCommand::Off, now);
    } else {
      detail::drive_relay(s, pulse.direction, now);
      if (s.relay_out == pulse.direction && !pulse.end_time) pulse.end_time = now + pulse.duration;
      if (s.relay_out == pulse.direction) {
        cutoff = pulse.end_time;
      } else if (pulse.end_time) {
        // Engaged earlier but now held Off by a spool limit: the step is over.
        s.manual.reset();
        s.mode = ControllerMode::Idle;
      }
    }
  } else if (s.underway_pending) {
    if (input.fused_depth <= s.shallow_setpoint) {
      s.underway_pending = false;
      s.target_depth.reset();
      s.mode = ControllerMode::Underway;
      detail::drive_relay(s, RelayCommand::Off, now);
    } else {
      s.mode = ControllerMode::Retrieving;
      detail::drive_relay(s, RelayCommand::Retrieve, now);
    }
  } else if (s.target_depth) {
    detail::regulate(s, now);
  } else {
    s.mode = ControllerMode::Idle;
    detail::drive_relay(s, RelayCommand::Off, now);
  }

  s = detect_stall(s, input);
  if (s.mode == ControllerMode::Fault) cutoff.reset();
  return {s, s.relay_out, cutoff};
}

inline WithNotice<ControllerState> manual_step(const ControllerState& ctrl, StepDirection direction,
                                               double step_line) {
  if (ctrl.mode == ControllerMode::Fault) {
    throw CommandRejected("controller in fault (" + ctrl.fault_reason.value_or("") +
                          "); acknowledge first");
  }
  if (!(step_line > 0.0)) throw std::invalid_argument("manual step length must be > 0");

  const bool down = direction == StepDirection::Down;
  const double room = down ? ctrl.spool_capacity - ctrl.last_line_out : ctrl.last_line_out;
  WithNotice<ControllerState> out{ctrl, {}};
  double effective = step_line;
  if (room <= 0.0) {
    out.warning = down ? "manual step clipped: spool fully paid out"
                       : "manual step clipped: line fully retrieved";
    return out;
  }
  if (step_line > room) {
    effective = room;
    out.warning = "manual step clipped to " + std::to_string(room) + " m at the spool bound";
  }

  ControllerState& s = out.value;
  const double speed = down ? s.payout_speed : s.retrieval_speed;
  s.manual = ManualPulse{down ? RelayCommand::Payout : RelayCommand::Retrieve, effective / speed, {}};
  s.mode = down ? ControllerMode::Deploying : ControllerMode::Retrieving;
  s.target_depth.reset();
  s.underway_pending = false;
  detail::reset_stall_reference(s);
  return out;
}

inline ControllerState set_underway(const ControllerState& ctrl, double shallow_setpoint) {
  if (ctrl.mode == ControllerMode::Fault) {
    throw CommandRejected("controller in fault (" + ctrl.fault_reason.value_or("") +
                          "); acknowledge first");
  }
  ControllerState s = ctrl;
  s.manual.reset();
  s.shallow_setpoint = shallow_setpoint;
  detail::reset_stall_reference(s);
  if (s.last_depth <= shallow_setpoint) {
    s.underway_pending = false;
    s.target_depth.reset();
    s.mode = ControllerMode::Underway;
    detail::drive_relay(s, RelayCommand::Off, s.last_time);
  } else {
    s.underway_pending = true;
    s.target_depth = shallow_setpoint;
    s.mode = ControllerMode::Retrieving;
    detail::drive_relay(s, RelayCommand::Retrieve, s.last_time);
  }
  return s;
}

inline WithNotice<ControllerState> acknowledge_fault(const ControllerState& ctrl) {
  if (ctrl.mode != ControllerMode::Fault) return {ctrl, "no fault to acknowledge"};
  ControllerState s = ctrl;
  s.mode = ControllerMode::Idle;
  s.fault_reason.reset();
  s.target_depth.reset();
  detail::drive_relay(s, RelayCommand::Off, s.last_time);
  detail::reset_stall_reference(s);
  return {s, {}};
}

}  // namespace aps
