#pragma once

// Lake model: bathymetry, vegetation obstructions, and synthetic science
// fields that vary with depth and across the surface.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "aps/geo.hpp"

namespace aps {

// Paraboloid bowl around `center`: max_depth at the center, shore_depth at
// and beyond `radius`. radius <= 0 gives a flat bottom at max_depth.
struct Bathymetry {
  GeoPoint center{};
  double max_depth = 12.0;
  double shore_depth = 1.0;
  double radius = 0.0;

  [[nodiscard]] double depth_at(GeoPoint p, const LocalTangentPlane& plane) const {
    if (radius <= 0.0) return max_depth;
    const double r = plane.distance(center, p) / radius;
    if (r >= 1.0) return shore_depth;
    return shore_depth + (max_depth - shore_depth) * (1.0 - r * r);
  }
};

struct Obstruction {
  GeoPoint center{};
  double radius = 1.0;     // m
  double top_depth = 4.0;  // m
};

struct GradientSegment {
  double from_depth = 0.0;  // m
  double per_meter = 0.0;   // value units per m, applies below from_depth
};

struct Thermocline {
  double depth = 0.0;
  double step = 0.0;
};

struct HorizontalVariation {
  double amplitude = 0.0;
  double wavelength = 0.0;  // m
};

struct FieldProfile {
  double surface_value = 0.0;
  std::vector<GradientSegment> gradients;  // sorted by from_depth
  std::optional<Thermocline> thermocline;
  HorizontalVariation horizontal;
  double noise_sigma = 0.0;

  /// Noise-free vertical structure at depth z.
  [[nodiscard]] double vertical(double z) const {
    double v = surface_value;
    for (std::size_t i = 0; i < gradients.size(); ++i) {
      const double lo = gradients[i].from_depth;
      const double hi = i + 1 < gradients.size() ? gradients[i + 1].from_depth : z;
      const double span = std::clamp(z, lo, std::max(lo, hi)) - lo;
      if (span > 0.0) v += gradients[i].per_meter * span;
    }
    if (thermocline && z >= thermocline->depth) v += thermocline->step;
    return v;
  }

  [[nodiscard]] double lateral(EastNorth en) const {
    if (horizontal.amplitude == 0.0 || horizontal.wavelength <= 0.0) return 0.0;
    const double k = 2.0 * std::numbers::pi / horizontal.wavelength;
    return horizontal.amplitude * std::sin(k * en.east) * std::cos(k * en.north);
  }

  void validate(const std::string& name) const {
    double prev = -1.0;
    for (const auto& g : gradients) {
      if (g.from_depth < 0.0 || g.from_depth <= prev) {
        throw std::invalid_argument("field '" + name +
                                    "': gradient segments must start at increasing depths >= 0");
      }
      prev = g.from_depth;
    }
    if (noise_sigma < 0.0) throw std::invalid_argument("field '" + name + "': noise_sigma < 0");
  }
};

using ScalarFieldModel = std::map<std::string, FieldProfile>;

struct Environment {
  double water_density = 997.0;
  double gravity = 9.81;
  GeoPoint origin{45.54437, -73.15212};
  Bathymetry bathymetry{};
  std::vector<Obstruction> obstructions;
  ScalarFieldModel fields;

  [[nodiscard]] LocalTangentPlane plane() const { return LocalTangentPlane(origin); }

  [[nodiscard]] double bottom_depth(GeoPoint p) const { return bathymetry.depth_at(p, plane()); }

  void validate() const {
    if (!(water_density > 0)) throw std::invalid_argument("environment.water_density must be > 0");
    if (!(gravity > 0)) throw std::invalid_argument("environment.gravity must be > 0");
    if (!(bathymetry.max_depth > 0) || !(bathymetry.shore_depth > 0)) {
      throw std::invalid_argument("environment.bathymetry depths must be > 0");
    }
    for (const auto& o : obstructions) {
      if (!(o.radius > 0)) throw std::invalid_argument("obstruction radius must be > 0");
      if (!(o.top_depth >= 0) || !(o.top_depth < bottom_depth(o.center))) {
        throw std::invalid_argument("obstruction top_depth must lie above the local bottom");
      }
    }
    for (const auto& [name, f] : fields) f.validate(name);
  }
};

/// Depth at which a probe hanging below `p` comes to rest: the bottom, or the
/// top of any obstruction whose footprint contains `p`.
inline double effective_floor(const Environment& env, GeoPoint p) {
  const auto plane = env.plane();
  double floor = env.bathymetry.depth_at(p, plane);
  for (const auto& o : env.obstructions) {
    if (plane.distance(o.center, p) <= o.radius) floor = std::min(floor, o.top_depth);
  }
  return floor;
}

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline void push_u64(std::vector<std::uint32_t>& v, std::uint64_t x) {
  v.push_back(static_cast<std::uint32_t>(x));
  v.push_back(static_cast<std::uint32_t>(x >> 32));
}

/// Standard normal draw keyed on the full sampling coordinate.
inline double keyed_normal(std::uint64_t seed, std::string_view parameter, GeoPoint p, double depth,
                           double time) {
  std::vector<std::uint32_t> key;
  push_u64(key, seed);
  push_u64(key, fnv1a(parameter));
  push_u64(key, std::bit_cast<std::uint64_t>(p.lat));
  push_u64(key, std::bit_cast<std::uint64_t>(p.lon));
  push_u64(key, std::bit_cast<std::uint64_t>(depth));
  push_u64(key, std::bit_cast<std::uint64_t>(time));
  std::seed_seq seq(key.begin(), key.end());
  std::mt19937_64 gen(seq);
  return std::normal_distribution<double>(0.0, 1.0)(gen);
}

}  // namespace detail

inline std::map<std::string, double> sample_fields(const Environment& env, GeoPoint p, double depth,
                                                   double time, std::uint64_t seed) {
  const double bottom = env.bottom_depth(p);
  if (depth < 0.0 || depth > bottom + 1e-9) {
    throw std::domain_error("sample depth " + std::to_string(depth) +
                            " m outside water column (bottom " + std::to_string(bottom) + " m)");
  }
  const auto en = env.plane().to_local(p);
  std::map<std::string, double> out;
  for (const auto& [name, f] : env.fields) {
    double v = f.vertical(depth) + f.lateral(en);
    if (f.noise_sigma > 0.0) v += f.noise_sigma * detail::keyed_normal(seed, name, p, depth, time);
    out.emplace(name, v);
  }
  return out;
}

}  // namespace aps
