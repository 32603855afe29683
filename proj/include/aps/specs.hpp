#pragma once

// Physical specifications of the probe, winch, and floating platform, and the
// static feasibility checks run before any simulation.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "aps/units.hpp"

namespace aps {

struct ProbeSpec {
  Mass mass_air{1.5};
  Volume volume{0.0008};
  double drag_coefficient = 1.0;
  Area cross_section_area{0.00173};
  Length pressure_sensor_noise_sigma{0.003};
  Duration sample_period{1.0};
  std::vector<std::string> parameters{"conductivity", "dissolved_oxygen", "orp", "ph",
                                      "salinity",     "temperature",      "turbidity"};

  void validate() const {
    if (!(mass_air.value() > 0)) throw std::invalid_argument("probe.mass_air must be > 0");
    if (!(volume.value() > 0)) throw std::invalid_argument("probe.volume must be > 0");
    if (!(drag_coefficient > 0)) throw std::invalid_argument("probe.drag_coefficient must be > 0");
    if (!(cross_section_area.value() > 0))
      throw std::invalid_argument("probe.cross_section_area must be > 0");
    if (pressure_sensor_noise_sigma.value() < 0)
      throw std::invalid_argument("probe.pressure_sensor_noise_sigma must be >= 0");
    if (!(sample_period.value() > 0)) throw std::invalid_argument("probe.sample_period must be > 0");
    if (parameters.empty()) throw std::invalid_argument("probe.parameters must not be empty");
  }
};

// Defaults are the Trac G3 Fisherman 25 figures (payload, speeds, voltage)
// and the 10 m tether the spool diameter allows.
struct WinchSpec {
  Mass max_payload{11.340};
  Velocity payout_speed = meters_per_minute(21.336);
  Velocity retrieval_speed = meters_per_minute(19.812);
  Length spool_capacity{10.0};
  Voltage operating_voltage{12.0};
  Duration min_relay_dwell{0.5};

  void validate() const {
    if (!(max_payload.value() > 0)) throw std::invalid_argument("winch.max_payload must be > 0");
    if (!(payout_speed.value() > 0)) throw std::invalid_argument("winch.payout_speed must be > 0");
    if (!(retrieval_speed.value() > 0))
      throw std::invalid_argument("winch.retrieval_speed must be > 0");
    if (!(spool_capacity.value() > 0))
      throw std::invalid_argument("winch.spool_capacity must be > 0");
    if (!(operating_voltage.value() > 0))
      throw std::invalid_argument("winch.operating_voltage must be > 0");
    if (!(min_relay_dwell.value() > 0))
      throw std::invalid_argument("winch.min_relay_dwell must be > 0");
  }
};

struct PlatformSpec {
  Volume pontoon_volume_each{0.0642};
  int pontoon_count = 2;
  Density water_density{997.0};
  Acceleration gravity{9.81};
  double buoyancy_safety_factor = 1.2;
  Mass dry_mass{75.0};

  void validate() const {
    if (pontoon_count < 1) throw std::invalid_argument("platform.pontoon_count must be >= 1");
    if (!(water_density.value() > 0))
      throw std::invalid_argument("platform.water_density must be > 0");
    if (!(gravity.value() > 0)) throw std::invalid_argument("platform.gravity must be > 0");
    if (!(buoyancy_safety_factor >= 1.0))
      throw std::invalid_argument("platform.buoyancy_safety_factor must be >= 1");
  }

  [[nodiscard]] Volume total_volume() const {
    return Volume(pontoon_volume_each.value() * pontoon_count);
  }
};

struct StructuralCheck {
  Pressure yield_strength = megapascals(120.0);
  Pressure maximum_stress = megapascals(14.7);

  void validate() const {
    if (!(yield_strength.value() > 0))
      throw std::invalid_argument("structure.yield_strength must be > 0");
    if (!(maximum_stress.value() > 0))
      throw std::invalid_argument("structure.maximum_stress must be > 0");
  }
};

/// Archimedes lift of all pontoons: rho * g * V_total.
inline Force buoyant_force(const PlatformSpec& platform) {
  return platform.water_density * platform.gravity * platform.total_volume();
}

/// Largest total mass the pontoons carry with the configured safety factor.
inline Mass max_total_weight(const PlatformSpec& platform) {
  if (platform.buoyancy_safety_factor < 1.0) {
    throw std::invalid_argument("buoyancy_safety_factor must be >= 1");
  }
  return buoyant_force(platform) / platform.buoyancy_safety_factor / platform.gravity;
}

inline double structural_safety_factor(const StructuralCheck& check) {
  if (!(check.maximum_stress.value() > 0)) {
    throw std::domain_error("maximum_stress must be > 0");
  }
  return (check.yield_strength / check.maximum_stress).value();
}

struct RuleVerdict {
  std::string id;
  std::string description;
  double measured = 0.0;
  double limit = 0.0;
  Unit unit = Unit::dimensionless;
  bool passed = false;
};

struct CompatibilityReport {
  std::vector<RuleVerdict> rules;

  [[nodiscard]] bool all_passed() const {
    for (const auto& r : rules) {
      if (!r.passed) return false;
    }
    return !rules.empty();
  }
};

/// Net downward force on the submerged probe (weight minus buoyancy).
inline Force wet_weight(const ProbeSpec& probe, Density water_density, Acceleration gravity) {
  return probe.mass_air * gravity - water_density * gravity * probe.volume;
}

inline CompatibilityReport check_probe_compatibility(const ProbeSpec& probe, const WinchSpec& winch,
                                                     const PlatformSpec& platform) {
  CompatibilityReport report;

  const Force wet = wet_weight(probe, platform.water_density, platform.gravity);
  report.rules.push_back({"a", "probe is negatively buoyant (wet weight > 0)", wet.value(), 0.0,
                          Unit::newton, wet.value() > 0.0});

  report.rules.push_back({"b", "probe mass within winch max payload", probe.mass_air.value(),
                          winch.max_payload.value(), Unit::kilogram,
                          probe.mass_air <= winch.max_payload});

  const Mass loaded = platform.dry_mass + probe.mass_air;
  const Mass limit = max_total_weight(platform);
  report.rules.push_back({"c", "platform dry mass + payload within flotation limit", loaded.value(),
                          limit.value(), Unit::kilogram, loaded <= limit});
  return report;
}

}  // namespace aps
