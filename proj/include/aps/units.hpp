#pragma once

// Dimension-checked SI quantities. Dimensions are tracked as integer
// exponents of (mass, length, time, current); mixing incompatible quantities
// in + or - is a compile error.

#include <cmath>
#include <compare>
#include <stdexcept>
#include <string>
#include <string_view>

namespace aps {

enum class Unit {
  meter,
  meter_per_second,
  meter_per_second_squared,
  kilogram,
  newton,
  pascal,
  megapascal,
  second,
  volt,
  cubic_meter,
  kilogram_per_cubic_meter,
  square_meter,
  dimensionless,
};

constexpr std::string_view symbol(Unit u) {
  switch (u) {
    case Unit::meter: return "m";
    case Unit::meter_per_second: return "m/s";
    case Unit::meter_per_second_squared: return "m/s^2";
    case Unit::kilogram: return "kg";
    case Unit::newton: return "N";
    case Unit::pascal: return "Pa";
    case Unit::megapascal: return "MPa";
    case Unit::second: return "s";
    case Unit::volt: return "V";
    case Unit::cubic_meter: return "m^3";
    case Unit::kilogram_per_cubic_meter: return "kg/m^3";
    case Unit::square_meter: return "m^2";
    case Unit::dimensionless: return "";
  }
  return "?";
}

template <int Mass, int Length, int Time, int Current = 0>
class Quantity {
 public:
  static constexpr int mass_exp = Mass;
  static constexpr int length_exp = Length;
  static constexpr int time_exp = Time;
  static constexpr int current_exp = Current;

  // Quantities that are physically positive-definite (mass, volume, area,
  // density) reject negative construction.
  static constexpr bool non_negative =
      (Mass == 1 && Length == 0 && Time == 0 && Current == 0) ||
      (Mass == 0 && Length == 3 && Time == 0 && Current == 0) ||
      (Mass == 0 && Length == 2 && Time == 0 && Current == 0) ||
      (Mass == 1 && Length == -3 && Time == 0 && Current == 0);

  constexpr Quantity() = default;

  constexpr explicit Quantity(double v) : value_(v) {
    if constexpr (non_negative) {
      if (v < 0.0 || std::isnan(v)) {
        throw std::invalid_argument("negative value for a non-negative quantity");
      }
    }
  }

  [[nodiscard]] constexpr double value() const { return value_; }

  constexpr Quantity operator+(Quantity rhs) const { return raw(value_ + rhs.value_); }
  constexpr Quantity operator-(Quantity rhs) const { return raw(value_ - rhs.value_); }
  constexpr Quantity operator-() const { return raw(-value_); }
  constexpr Quantity operator*(double k) const { return raw(value_ * k); }
  constexpr Quantity operator/(double k) const { return raw(value_ / k); }
  friend constexpr Quantity operator*(double k, Quantity q) { return raw(k * q.value_); }

  constexpr Quantity& operator+=(Quantity rhs) {
    value_ += rhs.value_;
    return *this;
  }
  constexpr Quantity& operator-=(Quantity rhs) {
    value_ -= rhs.value_;
    return *this;
  }

  constexpr auto operator<=>(const Quantity&) const = default;

  // Arithmetic results bypass the sign check: a difference of two masses may
  // legitimately be negative (a margin), it just cannot be a stored spec.
  static constexpr Quantity raw(double v) {
    Quantity q;
    q.value_ = v;
    return q;
  }

 private:
  double value_ = 0.0;
};

template <int M1, int L1, int T1, int I1, int M2, int L2, int T2, int I2>
constexpr auto operator*(Quantity<M1, L1, T1, I1> a, Quantity<M2, L2, T2, I2> b) {
  return Quantity<M1 + M2, L1 + L2, T1 + T2, I1 + I2>::raw(a.value() * b.value());
}

template <int M1, int L1, int T1, int I1, int M2, int L2, int T2, int I2>
constexpr auto operator/(Quantity<M1, L1, T1, I1> a, Quantity<M2, L2, T2, I2> b) {
  return Quantity<M1 - M2, L1 - L2, T1 - T2, I1 - I2>::raw(a.value() / b.value());
}

using Scalar = Quantity<0, 0, 0>;
using Length = Quantity<0, 1, 0>;
using Velocity = Quantity<0, 1, -1>;
using Acceleration = Quantity<0, 1, -2>;
using Mass = Quantity<1, 0, 0>;
using Force = Quantity<1, 1, -2>;
using Pressure = Quantity<1, -1, -2>;
using Duration = Quantity<0, 0, 1>;
using Voltage = Quantity<1, 2, -3, -1>;
using Volume = Quantity<0, 3, 0>;
using Density = Quantity<1, -3, 0>;
using Area = Quantity<0, 2, 0>;

template <class Q> constexpr Unit unit_of();
template <> constexpr Unit unit_of<Scalar>() { return Unit::dimensionless; }
template <> constexpr Unit unit_of<Length>() { return Unit::meter; }
template <> constexpr Unit unit_of<Velocity>() { return Unit::meter_per_second; }
template <> constexpr Unit unit_of<Acceleration>() { return Unit::meter_per_second_squared; }
template <> constexpr Unit unit_of<Mass>() { return Unit::kilogram; }
template <> constexpr Unit unit_of<Force>() { return Unit::newton; }
template <> constexpr Unit unit_of<Pressure>() { return Unit::pascal; }
template <> constexpr Unit unit_of<Duration>() { return Unit::second; }
template <> constexpr Unit unit_of<Voltage>() { return Unit::volt; }
template <> constexpr Unit unit_of<Volume>() { return Unit::cubic_meter; }
template <> constexpr Unit unit_of<Density>() { return Unit::kilogram_per_cubic_meter; }
template <> constexpr Unit unit_of<Area>() { return Unit::square_meter; }

template <class Q>
std::string to_string(Q q) {
  auto s = std::to_string(q.value());
  auto sym = symbol(unit_of<Q>());
  if (!sym.empty()) {
    s += ' ';
    s += sym;
  }
  return s;
}

// Field-practice units live only at I/O boundaries.
constexpr Velocity meters_per_minute(double v) { return Velocity(v / 60.0); }
constexpr double to_meters_per_minute(Velocity v) { return v.value() * 60.0; }
constexpr Pressure megapascals(double v) { return Pressure(v * 1.0e6); }
constexpr double to_megapascals(Pressure p) { return p.value() / 1.0e6; }

namespace literals {
constexpr Length operator""_m(long double v) { return Length(static_cast<double>(v)); }
constexpr Mass operator""_kg(long double v) { return Mass(static_cast<double>(v)); }
constexpr Duration operator""_s(long double v) { return Duration(static_cast<double>(v)); }
constexpr Velocity operator""_mps(long double v) { return Velocity(static_cast<double>(v)); }
}  // namespace literals

}  // namespace aps
