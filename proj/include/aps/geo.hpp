#pragma once

#include <cmath>
#include <numbers>

namespace aps {

struct GeoPoint {
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

struct EastNorth {
  double east = 0.0;   // m
  double north = 0.0;  // m
};

// Equirectangular local tangent plane; fine for lake-scale (< 5 km) work.
class LocalTangentPlane {
 public:
  static constexpr double kEarthRadius = 6371008.8;

  LocalTangentPlane() = default;
  explicit LocalTangentPlane(GeoPoint origin)
      : origin_(origin), cos_lat_(std::cos(origin.lat * kDegToRad)) {}

  [[nodiscard]] GeoPoint origin() const { return origin_; }

  [[nodiscard]] EastNorth to_local(GeoPoint p) const {
    return {(p.lon - origin_.lon) * kDegToRad * kEarthRadius * cos_lat_,
            (p.lat - origin_.lat) * kDegToRad * kEarthRadius};
  }

  [[nodiscard]] GeoPoint to_geo(EastNorth en) const {
    return {origin_.lat + en.north / kEarthRadius / kDegToRad,
            origin_.lon + en.east / (kEarthRadius * cos_lat_) / kDegToRad};
  }

  [[nodiscard]] double distance(GeoPoint a, GeoPoint b) const {
    const auto la = to_local(a);
    const auto lb = to_local(b);
    return std::hypot(lb.east - la.east, lb.north - la.north);
  }

  /// Bearing from a to b, radians clockwise from north.
  [[nodiscard]] double bearing(GeoPoint a, GeoPoint b) const {
    const auto la = to_local(a);
    const auto lb = to_local(b);
    return std::atan2(lb.east - la.east, lb.north - la.north);
  }

 private:
  static constexpr double kDegToRad = std::numbers::pi / 180.0;
  GeoPoint origin_{};
  double cos_lat_ = 1.0;
};

}  // namespace aps
