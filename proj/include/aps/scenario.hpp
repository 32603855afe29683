#pragma once

// A Scenario bundles specs, environment, mission, controller configuration
// and seed: the unit of reproducible execution.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "aps/asv.hpp"
#include "aps/controller.hpp"
#include "aps/environment.hpp"
#include "aps/specs.hpp"

namespace aps {

enum class Pacing { Realtime, Fast };

inline constexpr int kScenarioSchemaVersion = 1;

struct Scenario {
  int schema_version = kScenarioSchemaVersion;
  std::string name = "scenario";
  ProbeSpec probe;
  WinchSpec winch;
  PlatformSpec platform;
  StructuralCheck structure;
  ASVModel asv;
  Environment environment;
  MissionPlan mission;
  ControllerConfig controller;
  std::uint64_t seed = 1;
  double dt = 0.01;
  Pacing pacing = Pacing::Realtime;  // how serve paces the session; run is always fast
  double max_duration = 7200.0;       // s of simulated time before a run is cut off
  double state_broadcast_rate = 10.0;  // Hz

  /// Number of plant steps per control period / sample period.
  [[nodiscard]] long control_ticks() const { return std::lround(controller.control_period / dt); }
  [[nodiscard]] long sample_ticks() const { return std::lround(probe.sample_period.value() / dt); }
  [[nodiscard]] long broadcast_ticks() const {
    return std::max(1L, std::lround(1.0 / state_broadcast_rate / dt));
  }

  void validate() const {
    if (schema_version != kScenarioSchemaVersion) {
      throw std::invalid_argument("unsupported schema_version " + std::to_string(schema_version));
    }
    probe.validate();
    winch.validate();
    platform.validate();
    structure.validate();
    asv.validate();
    environment.validate();
    controller.validate();
    if (!(dt > 0)) throw std::invalid_argument("dt must be > 0");
    auto is_multiple = [&](double period) {
      const double n = period / dt;
      return std::lround(n) >= 1 && std::abs(n - std::round(n)) < 1e-6;
    };
    if (!is_multiple(controller.control_period)) {
      throw std::invalid_argument("controller.control_period must be a multiple of dt");
    }
    if (!is_multiple(probe.sample_period.value())) {
      throw std::invalid_argument("probe.sample_period must be a multiple of dt");
    }
    if (!(max_duration > 0)) throw std::invalid_argument("max_duration must be > 0");
    if (!(state_broadcast_rate > 0)) throw std::invalid_argument("state_broadcast_rate must be > 0");
    if (environment.water_density != platform.water_density.value() ||
        environment.gravity != platform.gravity.value()) {
      throw std::invalid_argument("environment and platform disagree on water density or gravity");
    }
    for (const auto& p : probe.parameters) {
      if (!environment.fields.contains(p)) {
        throw std::invalid_argument("probe parameter '" + p + "' has no field model");
      }
    }
    mission.validate(winch.spool_capacity.value(), probe.sample_period.value());
  }
};

/// Lake Hertel field site, one station with four consecutive casts between
/// two underway transits.
inline Scenario lake_hertel_scenario() {
  Scenario s;
  s.name = "lake_hertel";
  s.seed = 7;
  const GeoPoint origin{45.54437, -73.15212};
  const LocalTangentPlane plane(origin);
  s.environment.origin = origin;
  s.environment.bathymetry = {origin, 11.0, 1.0, 400.0};

  auto linear = [](double surface, double per_m, double noise) {
    FieldProfile f;
    f.surface_value = surface;
    f.gradients = {{0.0, per_m}};
    f.noise_sigma = noise;
    return f;
  };
  FieldProfile temperature = linear(22.0, -0.3, 0.02);
  temperature.thermocline = Thermocline{4.0, -6.0};
  temperature.horizontal = {0.3, 300.0};
  FieldProfile oxygen;
  oxygen.surface_value = 8.5;
  oxygen.gradients = {{0.0, -0.15}, {5.0, -0.6}};
  oxygen.horizontal = {0.4, 250.0};
  oxygen.noise_sigma = 0.05;
  s.environment.fields = {
      {"conductivity", linear(250.0, 4.0, 0.5)},
      {"dissolved_oxygen", oxygen},
      {"orp", linear(350.0, -5.0, 2.0)},
      {"ph", linear(8.1, -0.08, 0.01)},
      {"salinity", linear(0.12, 0.002, 0.001)},
      {"temperature", temperature},
      {"turbidity", linear(1.5, 0.3, 0.1)},
  };

  s.asv.position = plane.to_geo({-140.0, -140.0});
  const GeoPoint station = plane.to_geo({20.0, 20.0});
  s.mission.legs = {
      TransitLeg{station, 1.0},
      StationLeg{station, {{2.0, 20.0}, {4.0, 20.0}, {6.0, 20.0}, {8.0, 20.0}}},
      TransitLeg{plane.to_geo({170.0, 20.0}), 1.0},
  };
  return s;
}

/// Same site with a vegetation mat at 4 m under the station and an 8 m cast.
inline Scenario vegetation_scenario() {
  Scenario s = lake_hertel_scenario();
  s.name = "vegetation";
  const GeoPoint station = std::get<StationLeg>(s.mission.legs[1]).hold_position;
  s.environment.obstructions = {{station, 10.0, 4.0}};
  s.mission.legs = {
      TransitLeg{station, 1.0},
      StationLeg{station, {{8.0, 20.0}}},
  };
  return s;
}

inline nlohmann::json to_json(const GeoPoint& p) { return {{"lat", p.lat}, {"lon", p.lon}}; }

inline nlohmann::json to_json(const Scenario& s) {
  using nlohmann::json;
  json fields = json::object();
  for (const auto& [name, f] : s.environment.fields) {
    json grads = json::array();
    for (const auto& g : f.gradients) grads.push_back({{"from", g.from_depth}, {"per_m", g.per_meter}});
    json jf = {{"surface", f.surface_value},
               {"gradients", grads},
               {"horizontal", {{"amplitude", f.horizontal.amplitude},
                               {"wavelength", f.horizontal.wavelength}}},
               {"noise_sigma", f.noise_sigma}};
    if (f.thermocline) jf["thermocline"] = {{"depth", f.thermocline->depth}, {"step", f.thermocline->step}};
    fields[name] = jf;
  }
  json obstructions = json::array();
  for (const auto& o : s.environment.obstructions) {
    obstructions.push_back({{"at", to_json(o.center)}, {"radius", o.radius}, {"top_depth", o.top_depth}});
  }
  json legs = json::array();
  for (const auto& leg : s.mission.legs) {
    if (const auto* t = std::get_if<TransitLeg>(&leg)) {
      legs.push_back({{"transit", {{"to", to_json(t->to)}, {"speed", t->speed}}}});
    } else {
      const auto& st = std::get<StationLeg>(leg);
      json casts = json::array();
      for (const auto& c : st.casts) casts.push_back({{"depth", c.target_depth}, {"dwell", c.dwell}});
      legs.push_back({{"station", {{"at", to_json(st.hold_position)}, {"casts", casts}}}});
    }
  }
  return {
      {"schema_version", s.schema_version},
      {"name", s.name},
      {"seed", s.seed},
      {"dt", s.dt},
      {"pacing", s.pacing == Pacing::Fast ? "fast" : "realtime"},
      {"max_duration", s.max_duration},
      {"state_broadcast_rate", s.state_broadcast_rate},
      {"probe",
       {{"mass_air", s.probe.mass_air.value()},
        {"volume", s.probe.volume.value()},
        {"drag_coefficient", s.probe.drag_coefficient},
        {"cross_section_area", s.probe.cross_section_area.value()},
        {"pressure_sensor_noise_sigma", s.probe.pressure_sensor_noise_sigma.value()},
        {"sample_period", s.probe.sample_period.value()},
        {"parameters", s.probe.parameters}}},
      {"winch",
       {{"max_payload", s.winch.max_payload.value()},
        {"payout_speed_m_per_min", to_meters_per_minute(s.winch.payout_speed)},
        {"retrieval_speed_m_per_min", to_meters_per_minute(s.winch.retrieval_speed)},
        {"spool_capacity", s.winch.spool_capacity.value()},
        {"operating_voltage", s.winch.operating_voltage.value()},
        {"min_relay_dwell", s.winch.min_relay_dwell.value()}}},
      {"platform",
       {{"pontoon_volume_each", s.platform.pontoon_volume_each.value()},
        {"pontoon_count", s.platform.pontoon_count},
        {"water_density", s.platform.water_density.value()},
        {"gravity", s.platform.gravity.value()},
        {"buoyancy_safety_factor", s.platform.buoyancy_safety_factor},
        {"dry_mass", s.platform.dry_mass.value()}}},
      {"structure",
       {{"yield_strength_mpa", to_megapascals(s.structure.yield_strength)},
        {"maximum_stress_mpa", to_megapascals(s.structure.maximum_stress)}}},
      {"asv",
       {{"max_speed", s.asv.max_speed},
        {"start", to_json(s.asv.position)},
        {"heading", s.asv.heading},
        {"station_keep_radius", s.asv.station_keep_radius}}},
      {"controller",
       {{"deadband", s.controller.deadband},
        {"hysteresis", s.controller.hysteresis},
        {"control_period", s.controller.control_period},
        {"stall_window", s.controller.stall_window},
        {"stall_epsilon", s.controller.stall_epsilon},
        {"shallow_setpoint", s.controller.shallow_setpoint},
        {"manual_step", s.controller.manual_step}}},
      {"environment",
       {{"origin", to_json(s.environment.origin)},
        {"bathymetry",
         {{"center", to_json(s.environment.bathymetry.center)},
          {"max_depth", s.environment.bathymetry.max_depth},
          {"shore_depth", s.environment.bathymetry.shore_depth},
          {"radius", s.environment.bathymetry.radius}}},
        {"obstructions", obstructions},
        {"fields", fields}}},
      {"mission", {{"legs", legs}}},
  };
}

/// FNV-1a 64 of the canonical JSON form, as 16 hex digits.
inline std::string config_hash(const Scenario& s) {
  const std::string canonical = to_json(s).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace aps
