#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "aps/runner.hpp"

using namespace aps;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const MissionResult& hertel_result() {
  static const MissionResult r = run_mission(lake_hertel_scenario());
  return r;
}

}  // namespace

TEST(LakeHertelMission, CompletesWithFourProfiles) {
  const auto& r = hertel_result();
  ASSERT_EQ(r.status, MissionStatus::Completed);
  EXPECT_TRUE(r.faults.empty());
  const auto profiles = assemble_profiles(r.samples);
  ASSERT_EQ(profiles.size(), 4u);
  const double targets[] = {2.0, 4.0, 6.0, 8.0};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_FALSE(profiles[i].interrupted);
    // Plateau at the target while Holding.
    int held = 0;
    for (const auto& s : profiles[i].samples) {
      if (s.mode != ControllerMode::Holding) continue;
      ++held;
      EXPECT_NEAR(s.depth, targets[i], 0.05 + 0.3556 * 0.1 + 0.02);
    }
    EXPECT_GE(held, 19);
  }
}

TEST(LakeHertelMission, SamplesAreOrderedAndTaggedWithAsvFix) {
  const auto& r = hertel_result();
  ASSERT_FALSE(r.samples.empty());
  std::map<double, GeoPoint> fixes;
  for (const auto& p : r.trajectory) fixes.emplace(p.time, p.position);
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    if (i > 0) {
      EXPECT_GT(r.samples[i].timestamp, r.samples[i - 1].timestamp);
    }
    const auto it = fixes.find(r.samples[i].timestamp);
    ASSERT_NE(it, fixes.end()) << r.samples[i].timestamp;
    EXPECT_EQ(r.samples[i].position, it->second);
  }
  // One sample per second.
  EXPECT_NEAR(static_cast<double>(r.samples.size()), r.end_time, 1.0);
}

TEST(LakeHertelMission, AsvHoldsStationWhileDeployed) {
  const auto& r = hertel_result();
  const auto scenario = lake_hertel_scenario();
  const auto& station = std::get<StationLeg>(scenario.mission.legs[1]);
  const LocalTangentPlane plane(station.hold_position);
  int deployed = 0;
  for (const auto& p : r.trajectory) {
    if (p.mode == ControllerMode::Deploying || p.mode == ControllerMode::Holding ||
        (p.mode == ControllerMode::Retrieving && p.probe_depth > 0.5)) {
      ++deployed;
      EXPECT_LE(plane.distance(station.hold_position, p.position), scenario.asv.station_keep_radius + 1e-9);
    }
  }
  EXPECT_GT(deployed, 1000);
}

TEST(LakeHertelMission, InvariantsHoldAlongTrajectory) {
  const auto& r = hertel_result();
  const auto scenario = lake_hertel_scenario();
  for (const auto& p : r.trajectory) {
    EXPECT_GE(p.line_out, 0.0);
    EXPECT_LE(p.line_out, scenario.winch.spool_capacity.value());
    EXPECT_GE(p.probe_depth, 0.0);
    EXPECT_LE(p.probe_depth, effective_floor(scenario.environment, p.position) + 1e-12);
    if (p.tether_taut) {
      EXPECT_NEAR(p.probe_depth, p.line_out, kTautTolerance);
    }
  }
}

TEST(LakeHertelMission, EventsInOrder) {
  const auto& r = hertel_result();
  std::vector<std::string> names;
  for (const auto& e : r.events) names.push_back(e.event);
  ASSERT_FALSE(names.empty());
  EXPECT_EQ(names.front(), "mission_started");
  EXPECT_EQ(names.back(), "mission_completed");
  EXPECT_EQ(std::count(names.begin(), names.end(), "cast_started"), 4);
  EXPECT_EQ(std::count(names.begin(), names.end(), "cast_reached"), 4);
  EXPECT_EQ(std::count(names.begin(), names.end(), "station_reached"), 1);
}

TEST(Mission, DeterministicTrajectoryAndLogBytes) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto a = dir / "aps_det_a.ndjson";
  const auto b = dir / "aps_det_b.ndjson";
  const auto ra = run_mission(lake_hertel_scenario(), a.string());
  const auto rb = run_mission(lake_hertel_scenario(), b.string());
  EXPECT_EQ(ra.trajectory, rb.trajectory);
  EXPECT_EQ(ra.samples, rb.samples);
  const auto bytes = slurp(a);
  EXPECT_FALSE(bytes.empty());
  EXPECT_EQ(bytes, slurp(b));
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST(Mission, DifferentSeedChangesNoiseOnly) {
  auto s = lake_hertel_scenario();
  s.seed = 8;
  const auto r = run_mission(s);
  EXPECT_EQ(r.status, MissionStatus::Completed);
  ASSERT_FALSE(r.samples.empty());
  EXPECT_NE(r.samples, hertel_result().samples);
}

TEST(VegetationMission, PausesInFaultWithPlateauAtObstruction) {
  const auto r = run_mission(vegetation_scenario());
  EXPECT_EQ(r.status, MissionStatus::PausedFault);
  ASSERT_EQ(r.faults.size(), 1u);
  EXPECT_EQ(r.faults[0].reason, "stall during payout");
  EXPECT_NEAR(r.faults[0].depth, 4.0, 0.02);
  const auto profiles = assemble_profiles(r.samples);
  ASSERT_EQ(profiles.size(), 1u);
  EXPECT_TRUE(profiles[0].interrupted);
  EXPECT_NEAR(profiles[0].max_depth(), 4.0, 0.02);
}

TEST(VegetationMission, OperatorRecoversAfterAcknowledge) {
  MissionRunner runner(vegetation_scenario());
  runner.start_mission();
  while (runner.status() == MissionStatus::Running) runner.tick();
  ASSERT_EQ(runner.status(), MissionStatus::PausedFault);
  EXPECT_THROW(runner.resume(), CommandRejected);
  EXPECT_THROW(runner.command_target_depth(2.0), CommandRejected);
  const double line = runner.plant().line_out;
  for (int i = 0; i < 2000; ++i) runner.tick();
  EXPECT_DOUBLE_EQ(runner.plant().line_out, line);

  EXPECT_EQ(runner.acknowledge_fault(), "");
  EXPECT_EQ(runner.acknowledge_fault(), "no fault to acknowledge");
  runner.set_underway();
  for (int i = 0; i < 6000; ++i) runner.tick();
  EXPECT_EQ(runner.controller().mode, ControllerMode::Underway);
  EXPECT_LE(runner.plant().probe_depth, 0.3 + 1e-9);
}

TEST(Mission, IncompatibleProbeRefusesToStart) {
  auto s = lake_hertel_scenario();
  s.probe.mass_air = Mass(12.0);
  try {
    MissionRunner runner(s);
    FAIL() << "expected CompatibilityError";
  } catch (const CompatibilityError& e) {
    EXPECT_FALSE(e.report().rules[1].passed);
  }
}

TEST(Mission, EmptyTransitWithoutCastsLogsOnlyUnderway) {
  auto s = lake_hertel_scenario();
  s.mission.legs = {TransitLeg{s.asv.position, 1.0}, StationLeg{s.asv.position, {}}};
  s.max_duration = 60.0;
  const auto r = run_mission(s);
  EXPECT_EQ(r.status, MissionStatus::Completed);
  for (const auto& rec : r.samples) {
    EXPECT_EQ(rec.mode, ControllerMode::Underway);
    EXPECT_EQ(rec.position, s.asv.position);
  }
  EXPECT_TRUE(assemble_profiles(r.samples).empty());
}

TEST(Mission, TimesOut) {
  auto s = lake_hertel_scenario();
  s.max_duration = 30.0;
  const auto r = run_mission(s);
  EXPECT_EQ(r.status, MissionStatus::TimedOut);
  EXPECT_NEAR(r.end_time, 30.0, 1e-9);
}

TEST(Mission, OperatorCommandPausesAndResumeReissuesPhase) {
  MissionRunner runner(lake_hertel_scenario());
  EXPECT_THROW(runner.resume(), CommandRejected);
  runner.start_mission();
  EXPECT_THROW(runner.start_mission(), CommandRejected);
  // Reach the station and start the first cast.
  while (runner.controller().mode != ControllerMode::Deploying) {
    runner.tick();
    ASSERT_LT(runner.time(), 600.0);
  }
  runner.command_target_depth(1.0);
  EXPECT_EQ(runner.status(), MissionStatus::Paused);
  for (int i = 0; i < 3000; ++i) runner.tick();
  EXPECT_EQ(runner.controller().mode, ControllerMode::Holding);
  EXPECT_NEAR(runner.plant().probe_depth, 1.0, 0.1);
  runner.resume();
  while (runner.status() == MissionStatus::Running) runner.tick();
  EXPECT_EQ(runner.status(), MissionStatus::Completed);
  EXPECT_EQ(assemble_profiles(runner.log().records()).size(), 5u);
}
