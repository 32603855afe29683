#pragma once

// Scenario documents in YAML. Every key is checked: unknown keys are errors,
// reported with line/column and the dotted field path.

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include <yaml-cpp/yaml.h>

#include "aps/scenario.hpp"

namespace aps {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

class YamlScope {
 public:
  YamlScope(YAML::Node node, std::string path, std::string source)
      : node_(std::move(node)), path_(std::move(path)), source_(std::move(source)) {
    if (!node_.IsMap()) fail(node_, "expected a mapping");
  }

  [[noreturn]] void fail(const YAML::Node& at, const std::string& what,
                         const std::string& field = {}) const {
    const auto mark = at.Mark();
    std::ostringstream os;
    os << source_;
    if (mark.line >= 0) os << ':' << mark.line + 1 << ':' << mark.column + 1;
    const std::string where = field.empty() ? path_ : join(field);
    os << ": ";
    if (!where.empty()) os << where << ": ";
    os << what;
    throw ScenarioError(os.str());
  }

  [[nodiscard]] bool has(const std::string& key) const {
    return static_cast<bool>(std::as_const(node_)[key]);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    const YAML::Node v = std::as_const(node_)[key];
    if (!v) return fallback;
    try {
      return v.as<T>();
    } catch (const YAML::Exception&) {
      fail(v, "wrong type", key);
    }
  }

  template <class T>
  T require(const std::string& key) {
    if (!has(key)) fail(node_, "missing required key '" + key + "'");
    return get<T>(key, T{});
  }

  YamlScope child(const std::string& key) {
    seen_.insert(key);
    return YamlScope(std::as_const(node_)[key], join(key), source_);
  }

  [[nodiscard]] YAML::Node raw(const std::string& key) {
    seen_.insert(key);
    return std::as_const(node_)[key];
  }

  [[nodiscard]] std::string join(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  [[nodiscard]] const std::string& source() const { return source_; }
  [[nodiscard]] const YAML::Node& node() const { return node_; }

  void finish() const {
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.contains(key)) fail(kv.first, "unknown key '" + key + "'");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::string source_;
  std::set<std::string> seen_;
};

inline GeoPoint read_point(YamlScope scope) {
  GeoPoint p{scope.require<double>("lat"), scope.require<double>("lon")};
  scope.finish();
  return p;
}

template <class Fn>
void for_each_item(YamlScope& parent, const std::string& key, Fn&& fn) {
  const YAML::Node seq = parent.raw(key);
  if (!seq) return;
  if (!seq.IsSequence()) parent.fail(seq, "expected a list", key);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    fn(YamlScope(seq[i], parent.join(key) + "[" + std::to_string(i) + "]", parent.source()));
  }
}

}  // namespace detail

inline Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>") {
  using detail::YamlScope;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ScenarioError(source + ":" + std::to_string(e.mark.line + 1) + ":" +
                        std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  YamlScope top(root, "", source);
  Scenario s;
  s.schema_version = top.require<int>("schema_version");
  if (s.schema_version != kScenarioSchemaVersion) {
    top.fail(root["schema_version"], "unsupported schema version", "schema_version");
  }
  s.name = top.get<std::string>("name", s.name);
  s.seed = top.get<std::uint64_t>("seed", s.seed);
  s.dt = top.get<double>("dt", s.dt);
  const auto pacing = top.get<std::string>("pacing", "realtime");
  if (pacing == "fast") {
    s.pacing = Pacing::Fast;
  } else if (pacing == "realtime") {
    s.pacing = Pacing::Realtime;
  } else {
    top.fail(root["pacing"], "expected 'fast' or 'realtime'", "pacing");
  }
  s.max_duration = top.get<double>("max_duration", s.max_duration);
  s.state_broadcast_rate = top.get<double>("state_broadcast_rate", s.state_broadcast_rate);

  // Specs are checked as they are built so errors carry the file position.
  auto guarded = [&](YamlScope& scope, auto&& build) {
    try {
      build();
    } catch (const std::invalid_argument& e) {
      scope.fail(scope.node(), e.what());
    }
  };

  if (top.has("probe")) {
    auto p = top.child("probe");
    guarded(p, [&] {
      s.probe.mass_air = Mass(p.get<double>("mass_air", s.probe.mass_air.value()));
      s.probe.volume = Volume(p.get<double>("volume", s.probe.volume.value()));
      s.probe.drag_coefficient = p.get<double>("drag_coefficient", s.probe.drag_coefficient);
      s.probe.cross_section_area =
          Area(p.get<double>("cross_section_area", s.probe.cross_section_area.value()));
      s.probe.pressure_sensor_noise_sigma = Length(
          p.get<double>("pressure_sensor_noise_sigma", s.probe.pressure_sensor_noise_sigma.value()));
      s.probe.sample_period = Duration(p.get<double>("sample_period", s.probe.sample_period.value()));
      s.probe.parameters = p.get<std::vector<std::string>>("parameters", s.probe.parameters);
      s.probe.validate();
    });
    p.finish();
  }
  if (top.has("winch")) {
    auto w = top.child("winch");
    guarded(w, [&] {
      s.winch.max_payload = Mass(w.get<double>("max_payload", s.winch.max_payload.value()));
      s.winch.payout_speed = meters_per_minute(
          w.get<double>("payout_speed_m_per_min", to_meters_per_minute(s.winch.payout_speed)));
      s.winch.retrieval_speed = meters_per_minute(
          w.get<double>("retrieval_speed_m_per_min", to_meters_per_minute(s.winch.retrieval_speed)));
      s.winch.spool_capacity = Length(w.get<double>("spool_capacity", s.winch.spool_capacity.value()));
      s.winch.operating_voltage =
          Voltage(w.get<double>("operating_voltage", s.winch.operating_voltage.value()));
      s.winch.min_relay_dwell =
          Duration(w.get<double>("min_relay_dwell", s.winch.min_relay_dwell.value()));
      s.winch.validate();
    });
    w.finish();
  }
  if (top.has("platform")) {
    auto p = top.child("platform");
    guarded(p, [&] {
      s.platform.pontoon_volume_each =
          Volume(p.get<double>("pontoon_volume_each", s.platform.pontoon_volume_each.value()));
      s.platform.pontoon_count = p.get<int>("pontoon_count", s.platform.pontoon_count);
      s.platform.water_density = Density(p.get<double>("water_density", s.platform.water_density.value()));
      s.platform.gravity = Acceleration(p.get<double>("gravity", s.platform.gravity.value()));
      s.platform.buoyancy_safety_factor =
          p.get<double>("buoyancy_safety_factor", s.platform.buoyancy_safety_factor);
      s.platform.dry_mass = Mass(p.get<double>("dry_mass", s.platform.dry_mass.value()));
      s.platform.validate();
    });
    p.finish();
  }
  s.environment.water_density = s.platform.water_density.value();
  s.environment.gravity = s.platform.gravity.value();

  if (top.has("structure")) {
    auto st = top.child("structure");
    guarded(st, [&] {
      s.structure.yield_strength = megapascals(
          st.get<double>("yield_strength_mpa", to_megapascals(s.structure.yield_strength)));
      s.structure.maximum_stress = megapascals(
          st.get<double>("maximum_stress_mpa", to_megapascals(s.structure.maximum_stress)));
      s.structure.validate();
    });
    st.finish();
  }
  if (top.has("asv")) {
    auto a = top.child("asv");
    guarded(a, [&] {
      s.asv.max_speed = a.get<double>("max_speed", s.asv.max_speed);
      if (a.has("start")) s.asv.position = detail::read_point(a.child("start"));
      s.asv.heading = a.get<double>("heading", s.asv.heading);
      s.asv.station_keep_radius = a.get<double>("station_keep_radius", s.asv.station_keep_radius);
      s.asv.validate();
    });
    a.finish();
  }
  if (top.has("controller")) {
    auto c = top.child("controller");
    guarded(c, [&] {
      auto& cc = s.controller;
      cc.deadband = c.get<double>("deadband", cc.deadband);
      cc.hysteresis = c.get<double>("hysteresis", cc.hysteresis);
      cc.control_period = c.get<double>("control_period", cc.control_period);
      cc.stall_window = c.get<double>("stall_window", cc.stall_window);
      cc.stall_epsilon = c.get<double>("stall_epsilon", cc.stall_epsilon);
      cc.shallow_setpoint = c.get<double>("shallow_setpoint", cc.shallow_setpoint);
      cc.manual_step = c.get<double>("manual_step", cc.manual_step);
      cc.validate();
    });
    c.finish();
  }
  if (top.has("environment")) {
    auto e = top.child("environment");
    if (e.has("origin")) s.environment.origin = detail::read_point(e.child("origin"));
    s.environment.bathymetry.center = s.environment.origin;
    if (e.has("bathymetry")) {
      auto b = e.child("bathymetry");
      auto& bt = s.environment.bathymetry;
      if (b.has("center")) bt.center = detail::read_point(b.child("center"));
      bt.max_depth = b.get<double>("max_depth", bt.max_depth);
      bt.shore_depth = b.get<double>("shore_depth", bt.shore_depth);
      bt.radius = b.get<double>("radius", bt.radius);
      b.finish();
    }
    detail::for_each_item(e, "obstructions", [&](YamlScope o) {
      Obstruction ob;
      ob.center = detail::read_point(o.child("at"));
      ob.radius = o.require<double>("radius");
      ob.top_depth = o.require<double>("top_depth");
      o.finish();
      s.environment.obstructions.push_back(ob);
    });
    if (e.has("fields")) {
      const YAML::Node fields = e.raw("fields");
      if (!fields.IsMap()) e.fail(fields, "expected a mapping", "fields");
      for (const auto& kv : fields) {
        const auto name = kv.first.as<std::string>();
        YamlScope f(kv.second, e.join("fields." + name), e.source());
        FieldProfile fp;
        fp.surface_value = f.require<double>("surface");
        detail::for_each_item(f, "gradients", [&](YamlScope g) {
          fp.gradients.push_back({g.require<double>("from"), g.require<double>("per_m")});
          g.finish();
        });
        if (f.has("thermocline")) {
          auto t = f.child("thermocline");
          fp.thermocline = Thermocline{t.require<double>("depth"), t.require<double>("step")};
          t.finish();
        }
        if (f.has("horizontal")) {
          auto h = f.child("horizontal");
          fp.horizontal = {h.require<double>("amplitude"), h.require<double>("wavelength")};
          h.finish();
        }
        fp.noise_sigma = f.get<double>("noise_sigma", 0.0);
        f.finish();
        try {
          fp.validate(name);
        } catch (const std::invalid_argument& ex) {
          f.fail(kv.second, ex.what());
        }
        s.environment.fields[name] = fp;
      }
    }
    e.finish();
  }
  if (top.has("mission")) {
    auto m = top.child("mission");
    detail::for_each_item(m, "legs", [&](YamlScope leg) {
      if (leg.has("transit")) {
        auto t = leg.child("transit");
        TransitLeg tl;
        tl.to = detail::read_point(t.child("to"));
        tl.speed = t.get<double>("speed", tl.speed);
        t.finish();
        s.mission.legs.emplace_back(tl);
      } else if (leg.has("station")) {
        auto st = leg.child("station");
        StationLeg sl;
        sl.hold_position = detail::read_point(st.child("at"));
        detail::for_each_item(st, "casts", [&](YamlScope c) {
          sl.casts.push_back({c.require<double>("depth"), c.get<double>("dwell", 10.0)});
          c.finish();
        });
        st.finish();
        s.mission.legs.emplace_back(sl);
      } else {
        leg.fail(leg.node(), "leg must be 'transit' or 'station'");
      }
      leg.finish();
    });
    m.finish();
  }
  top.finish();

  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(source + ": " + e.what());
  }
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(path + ": cannot open scenario file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

}  // namespace aps
