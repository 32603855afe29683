#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "aps/asv.hpp"
#include "aps/environment.hpp"

using namespace aps;

namespace {
const GeoPoint kHertel{45.54437, -73.15212};
}

TEST(LocalTangentPlane, RoundTripAndDistances) {
  const LocalTangentPlane plane(kHertel);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2000.0, 2000.0);
  for (int i = 0; i < 100; ++i) {
    const EastNorth en{u(rng), u(rng)};
    const auto back = plane.to_local(plane.to_geo(en));
    EXPECT_NEAR(back.east, en.east, 1e-6);
    EXPECT_NEAR(back.north, en.north, 1e-6);
    EXPECT_NEAR(plane.distance(kHertel, plane.to_geo(en)), std::hypot(en.east, en.north), 1e-6);
  }
  // One degree of latitude on the mean sphere.
  EXPECT_NEAR(plane.distance(kHertel, {kHertel.lat + 1.0, kHertel.lon}), 111195.08, 0.01);
}

TEST(LocalTangentPlane, Bearings) {
  const LocalTangentPlane plane(kHertel);
  EXPECT_NEAR(plane.bearing(kHertel, plane.to_geo({0, 100})), 0.0, 1e-12);
  EXPECT_NEAR(plane.bearing(kHertel, plane.to_geo({100, 0})), std::numbers::pi / 2, 1e-12);
  EXPECT_NEAR(plane.bearing(kHertel, plane.to_geo({-100, 0})), -std::numbers::pi / 2, 1e-12);
}

TEST(Bathymetry, BowlProfile) {
  const LocalTangentPlane plane(kHertel);
  const Bathymetry b{kHertel, 11.0, 1.0, 400.0};
  EXPECT_DOUBLE_EQ(b.depth_at(kHertel, plane), 11.0);
  EXPECT_NEAR(b.depth_at(plane.to_geo({200, 0}), plane), 1.0 + 10.0 * 0.75, 1e-9);
  EXPECT_DOUBLE_EQ(b.depth_at(plane.to_geo({500, 0}), plane), 1.0);
  const Bathymetry flat{kHertel, 12.0, 1.0, 0.0};
  EXPECT_DOUBLE_EQ(flat.depth_at(plane.to_geo({500, 0}), plane), 12.0);
}

TEST(EffectiveFloor, ObstructionFootprint) {
  Environment env;
  env.obstructions = {{kHertel, 10.0, 4.0}};
  const auto plane = env.plane();
  EXPECT_DOUBLE_EQ(effective_floor(env, kHertel), 4.0);
  EXPECT_DOUBLE_EQ(effective_floor(env, plane.to_geo({9.9, 0})), 4.0);
  EXPECT_DOUBLE_EQ(effective_floor(env, plane.to_geo({10.1, 0})), 12.0);
}

TEST(Environment, ValidateRejectsBadObstructionsAndFields) {
  Environment env;
  env.obstructions = {{kHertel, 10.0, 13.0}};
  EXPECT_THROW(env.validate(), std::invalid_argument);
  env.obstructions = {{kHertel, 0.0, 3.0}};
  EXPECT_THROW(env.validate(), std::invalid_argument);
  env.obstructions.clear();
  FieldProfile f;
  f.gradients = {{2.0, 1.0}, {1.0, 1.0}};
  env.fields["x"] = f;
  EXPECT_THROW(env.validate(), std::invalid_argument);
  env.fields["x"].gradients = {{0.0, 1.0}};
  env.fields["x"].noise_sigma = -1;
  EXPECT_THROW(env.validate(), std::invalid_argument);
}

TEST(FieldProfile, PiecewiseGradientsAndThermocline) {
  FieldProfile f;
  f.surface_value = 8.5;
  f.gradients = {{0.0, -0.15}, {5.0, -0.6}};
  EXPECT_DOUBLE_EQ(f.vertical(0.0), 8.5);
  EXPECT_NEAR(f.vertical(4.0), 8.5 - 0.6, 1e-12);
  EXPECT_NEAR(f.vertical(7.0), 8.5 - 0.75 - 1.2, 1e-12);
  f.thermocline = Thermocline{6.0, -2.0};
  EXPECT_NEAR(f.vertical(5.99), 8.5 - 0.75 - 0.6 * 0.99, 1e-12);
  EXPECT_NEAR(f.vertical(6.0), 8.5 - 0.75 - 0.6 - 2.0, 1e-12);
}

TEST(SampleFields, NoiseFreeIsDeterministicFieldValue) {
  Environment env;
  FieldProfile f;
  f.surface_value = 10.0;
  f.gradients = {{0.0, -0.5}};
  env.fields["temperature"] = f;
  for (double z : {0.0, 1.0, 4.5, 8.0}) {
    EXPECT_DOUBLE_EQ(sample_fields(env, kHertel, z, 1.0, 1).at("temperature"), 10.0 - 0.5 * z);
  }
  EXPECT_THROW(sample_fields(env, kHertel, 12.5, 0.0, 1), std::domain_error);
  EXPECT_THROW(sample_fields(env, kHertel, -0.1, 0.0, 1), std::domain_error);
}

TEST(SampleFields, NoiseIsKeyedOnSeedAndCoordinate) {
  Environment env;
  FieldProfile f;
  f.surface_value = 1.0;
  f.noise_sigma = 0.1;
  env.fields["ph"] = f;
  const double a = sample_fields(env, kHertel, 2.0, 5.0, 7).at("ph");
  EXPECT_EQ(a, sample_fields(env, kHertel, 2.0, 5.0, 7).at("ph"));
  EXPECT_NE(a, sample_fields(env, kHertel, 2.0, 5.0, 8).at("ph"));
  EXPECT_NE(a, sample_fields(env, kHertel, 2.0, 6.0, 7).at("ph"));
  // Sample spread matches sigma.
  double sum = 0, sq = 0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const double v = sample_fields(env, kHertel, 1.0, i, 7).at("ph") - 1.0;
    sum += v;
    sq += v * v;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(std::sqrt(sq / n), 0.1, 0.01);
}

TEST(AdvanceAsv, GoalAtPositionIsUnchanged) {
  ASVModel m;
  m.position = kHertel;
  const auto next = advance_asv(m, kHertel, 1.0);
  EXPECT_EQ(next.position, kHertel);
  EXPECT_EQ(next.speed, 0.0);
}

TEST(AdvanceAsv, DueNorthOneSecond) {
  ASVModel m;
  m.position = kHertel;
  const LocalTangentPlane plane(kHertel);
  const GeoPoint goal = plane.to_geo({0.0, 100.0});
  const auto next = advance_asv(m, goal, 1.0);
  EXPECT_NEAR(plane.distance(next.position, goal), 99.0, 1e-6);
  EXPECT_NEAR(next.heading, 0.0, 1e-9);
  EXPECT_NEAR(next.speed, 1.0, 1e-12);
}

TEST(AdvanceAsv, NeverOvershootsAndRespectsSpeedLimit) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-300.0, 300.0);
  const LocalTangentPlane plane(kHertel);
  for (int trial = 0; trial < 20; ++trial) {
    ASVModel m;
    m.position = plane.to_geo({u(rng), u(rng)});
    const GeoPoint goal = plane.to_geo({u(rng), u(rng)});
    double previous = plane.distance(m.position, goal);
    for (int i = 0; i < 3000; ++i) {
      const auto next = advance_asv(m, goal, 0.5, 0.7);
      EXPECT_LE(LocalTangentPlane(m.position).distance(m.position, next.position), 0.7 * 0.5 + 1e-9);
      m = next;
      const double d = plane.distance(m.position, goal);
      ASSERT_LE(d, previous + 1e-9);
      previous = d;
    }
    EXPECT_LE(previous, m.station_keep_radius + 1e-6);
  }
  EXPECT_THROW(advance_asv(ASVModel{}, kHertel, 0.0), std::invalid_argument);
}

TEST(MissionPlan, Validation) {
  MissionPlan plan;
  EXPECT_THROW(plan.validate(10.0, 1.0), std::invalid_argument);
  plan.legs = {StationLeg{kHertel, {{12.0, 10.0}}}};
  EXPECT_THROW(plan.validate(10.0, 1.0), std::invalid_argument);
  plan.legs = {StationLeg{kHertel, {{5.0, 0.5}}}};
  EXPECT_THROW(plan.validate(10.0, 1.0), std::invalid_argument);
  plan.legs = {TransitLeg{kHertel, 0.0}};
  EXPECT_THROW(plan.validate(10.0, 1.0), std::invalid_argument);
  plan.legs = {TransitLeg{kHertel, 1.0}, StationLeg{kHertel, {{5.0, 10.0}}}, StationLeg{kHertel, {}}};
  EXPECT_NO_THROW(plan.validate(10.0, 1.0));
}
