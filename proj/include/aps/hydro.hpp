#pragma once

// Probe / tether / winch plant. The tether is inextensible, massless and
// vertical; the probe sinks under gravity, buoyancy and quadratic drag while
// the line is slack and is carried by the line while taut.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include "aps/environment.hpp"
#include "aps/specs.hpp"

namespace aps {

enum class RelayCommand { Payout, Off, Retrieve };

constexpr std::string_view to_string(RelayCommand r) {
  switch (r) {
    case RelayCommand::Payout: return "payout";
    case RelayCommand::Off: return "off";
    case RelayCommand::Retrieve: return "retrieve";
  }
  return "?";
}

inline RelayCommand relay_from_string(std::string_view s) {
  if (s == "payout") return RelayCommand::Payout;
  if (s == "off") return RelayCommand::Off;
  if (s == "retrieve") return RelayCommand::Retrieve;
  throw std::invalid_argument("unknown relay command '" + std::string(s) + "'");
}

/// Maximum |probe_depth - line_out| for which the tether counts as taut.
inline constexpr double kTautTolerance = 1e-6;

struct PlantState {
  double time = 0.0;            // s
  double line_out = 0.0;        // m of tether paid out
  double probe_depth = 0.0;     // m, positive down
  double probe_velocity = 0.0;  // m/s, positive down
  bool tether_taut = true;
  RelayCommand relay = RelayCommand::Off;
  GeoPoint asv_position{};
  double asv_speed = 0.0;    // m/s
  double asv_heading = 0.0;  // rad, clockwise from north

  friend bool operator==(const PlantState&, const PlantState&) = default;
};

class SimulationFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Signed line rate for a relay command (positive pays out).
inline double line_rate(RelayCommand relay, const WinchSpec& winch) {
  switch (relay) {
    case RelayCommand::Payout: return winch.payout_speed.value();
    case RelayCommand::Retrieve: return -winch.retrieval_speed.value();
    case RelayCommand::Off: return 0.0;
  }
  return 0.0;
}

/// Closed-form free-sink speed where net weight balances quadratic drag.
inline double terminal_velocity(const ProbeSpec& probe, const Environment& env) {
  const double net = probe.mass_air.value() * env.gravity -
                     env.water_density * env.gravity * probe.volume.value();
  if (net < 0.0) throw std::domain_error("probe is positively buoyant; no sinking terminal velocity");
  return std::sqrt(2.0 * net /
                   (env.water_density * probe.drag_coefficient * probe.cross_section_area.value()));
}

/// Checks the PlantState invariants against the given floor and spool; returns
/// an empty string when they hold, otherwise a description of the violation.
inline std::string check_invariants(const PlantState& s, double floor, double spool_capacity) {
  if (s.line_out < 0.0 || s.line_out > spool_capacity) return "line_out outside [0, spool]";
  if (s.probe_depth < 0.0 || s.probe_depth > floor) return "probe_depth outside [0, floor]";
  if (s.tether_taut && std::abs(s.probe_depth - s.line_out) > kTautTolerance)
    return "taut tether with depth != line_out";
  if (!s.tether_taut && !(s.probe_depth < s.line_out)) return "slack tether with depth >= line_out";
  return {};
}

/// Advances the plant by one fixed step. Pure: no hidden state.
inline PlantState step(const PlantState& state, RelayCommand relay, const Environment& env,
                       const ProbeSpec& probe, const WinchSpec& winch, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be > 0");

  PlantState next = state;
  next.time = state.time + dt;
  next.relay = relay;

  // Line kinematics, clamped to the spool.
  const double spool = winch.spool_capacity.value();
  next.line_out = std::clamp(state.line_out + line_rate(relay, winch) * dt, 0.0, spool);
  const double line_velocity = (next.line_out - state.line_out) / dt;

  // Probe velocity: semi-implicit, drag taken at the new velocity. Solving
  // v' + c*dt*v'|v'| = v + dt*a_net in closed form keeps the free-sink speed
  // monotone toward terminal velocity for any dt.
  const double m = probe.mass_air.value();
  const double rho = env.water_density;
  const double g = env.gravity;
  const double net_accel = (m * g - rho * g * probe.volume.value()) / m;
  const double c = 0.5 * rho * probe.drag_coefficient * probe.cross_section_area.value() / m;
  const double b = state.probe_velocity + dt * net_accel;
  double v = 2.0 * b / (1.0 + std::sqrt(1.0 + 4.0 * c * dt * std::abs(b)));
  double depth = state.probe_depth + v * dt;

  if (!std::isfinite(v) || !std::isfinite(depth)) {
    throw SimulationFault("non-finite probe state at t=" + std::to_string(next.time) +
                          " (velocity " + std::to_string(v) + ")");
  }

  // Tether constraint: the probe cannot be below the paid-out line.
  if (depth >= next.line_out) {
    depth = next.line_out;
    v = line_velocity;
  }
  if (depth < 0.0) {
    depth = 0.0;
    v = std::max(v, 0.0);
  }

  const double floor = effective_floor(env, state.asv_position);
  if (depth >= floor) {
    depth = floor;
    v = 0.0;
  }

  next.probe_depth = depth;
  next.probe_velocity = v;
  next.tether_taut = next.line_out - depth <= kTautTolerance;
  return next;
}

/// One plant step where the relay must drop to Off at `cutoff` (absolute
/// time). A cutoff inside the step splits it so pulse durations are exact.
inline PlantState step_with_cutoff(const PlantState& state, RelayCommand relay,
                                   std::optional<double> cutoff, const Environment& env,
                                   const ProbeSpec& probe, const WinchSpec& winch, double dt) {
  if (!cutoff || relay == RelayCommand::Off) return step(state, relay, env, probe, winch, dt);
  const double on = *cutoff - state.time;
  if (on <= 1e-12) return step(state, RelayCommand::Off, env, probe, winch, dt);
  if (on >= dt - 1e-12) return step(state, relay, env, probe, winch, dt);
  auto mid = step(state, relay, env, probe, winch, on);
  auto next = step(mid, RelayCommand::Off, env, probe, winch, dt - on);
  next.time = state.time + dt;
  return next;
}

/// Pressure-derived depth reading: truth plus Gaussian noise, clamped at the surface.
template <class Rng>
double measure_depth(const PlantState& state, const ProbeSpec& probe, Rng& rng) {
  const double sigma = probe.pressure_sensor_noise_sigma.value();
  if (sigma == 0.0) return state.probe_depth;
  std::normal_distribution<double> noise(0.0, sigma);
  return std::max(0.0, state.probe_depth + noise(rng));
}

}  // namespace aps
