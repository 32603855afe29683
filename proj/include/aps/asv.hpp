#pragma once

// Kinematic surface vehicle and the mission plan it executes.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "aps/geo.hpp"

namespace aps {

struct ASVModel {
  double max_speed = 1.0;  // m/s
  GeoPoint position{};
  double heading = 0.0;    // rad, clockwise from north
  double station_keep_radius = 2.0;  // m
  double speed = 0.0;      // current ground speed, m/s

  void validate() const {
    if (!(max_speed > 0)) throw std::invalid_argument("asv.max_speed must be > 0");
    if (!(station_keep_radius > 0))
      throw std::invalid_argument("asv.station_keep_radius must be > 0");
  }
};

/// Moves straight toward `goal` in the local tangent plane at up to
/// min(max_speed, speed_limit); holds position once inside the station radius.
inline ASVModel advance_asv(const ASVModel& model, GeoPoint goal, double dt,
                            double speed_limit = std::numeric_limits<double>::infinity()) {
  if (!(dt > 0.0)) throw std::invalid_argument("advance_asv: dt must be > 0");
  ASVModel next = model;
  const LocalTangentPlane plane(model.position);
  const auto to_goal = plane.to_local(goal);
  const double distance = std::hypot(to_goal.east, to_goal.north);
  if (distance <= model.station_keep_radius) {
    next.speed = 0.0;
    return next;
  }
  const double travel = std::min(std::min(model.max_speed, speed_limit) * dt, distance);
  const double scale = travel / distance;
  next.position = plane.to_geo({to_goal.east * scale, to_goal.north * scale});
  next.heading = std::atan2(to_goal.east, to_goal.north);
  next.speed = travel / dt;
  return next;
}

struct TransitLeg {
  GeoPoint to{};
  double speed = 1.0;  // m/s
};

struct Cast {
  double target_depth = 0.0;  // m
  double dwell = 10.0;        // s held at depth while logging
};

struct StationLeg {
  GeoPoint hold_position{};
  std::vector<Cast> casts;
};

using MissionLeg = std::variant<TransitLeg, StationLeg>;

struct MissionPlan {
  std::vector<MissionLeg> legs;

  void validate(double spool_capacity, double sample_period) const {
    if (legs.empty()) throw std::invalid_argument("mission must have at least one leg");
    for (std::size_t i = 0; i < legs.size(); ++i) {
      const std::string where = "mission.legs[" + std::to_string(i) + "]";
      if (const auto* t = std::get_if<TransitLeg>(&legs[i])) {
        if (!(t->speed > 0)) throw std::invalid_argument(where + ".speed must be > 0");
        continue;
      }
      const auto& station = std::get<StationLeg>(legs[i]);
      for (std::size_t c = 0; c < station.casts.size(); ++c) {
        const auto& cast = station.casts[c];
        const std::string cw = where + ".casts[" + std::to_string(c) + "]";
        if (!(cast.target_depth >= 0) || cast.target_depth > spool_capacity) {
          throw std::invalid_argument(cw + ".depth outside [0, spool_capacity]");
        }
        if (cast.dwell < sample_period) {
          throw std::invalid_argument(cw + ".dwell shorter than the probe sample period");
        }
      }
    }
  }
};

}  // namespace aps
