#pragma once

// Mission execution: a single-owner loop that advances the plant at dt, the
// controller at the control period, samples the sonde at its sample period and
// walks the mission plan. Events (samples, faults, mission milestones) are
// queued for the caller to drain.

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "aps/asv.hpp"
#include "aps/controller.hpp"
#include "aps/datalog.hpp"
#include "aps/hydro.hpp"
#include "aps/scenario.hpp"

namespace aps {

enum class MissionStatus { NotStarted, Running, Paused, PausedFault, Completed, TimedOut };

constexpr std::string_view to_string(MissionStatus s) {
  switch (s) {
    case MissionStatus::NotStarted: return "not_started";
    case MissionStatus::Running: return "running";
    case MissionStatus::Paused: return "paused";
    case MissionStatus::PausedFault: return "paused_fault";
    case MissionStatus::Completed: return "completed";
    case MissionStatus::TimedOut: return "timed_out";
  }
  return "?";
}

struct TrajectoryPoint {
  double time = 0.0;
  GeoPoint position{};
  double line_out = 0.0;
  double probe_depth = 0.0;
  double measured_depth = 0.0;
  double probe_velocity = 0.0;
  bool tether_taut = true;
  RelayCommand relay = RelayCommand::Off;
  ControllerMode mode = ControllerMode::Idle;
  std::optional<double> target_depth;

  friend bool operator==(const TrajectoryPoint&, const TrajectoryPoint&) = default;
};

struct FaultEvent {
  double time = 0.0;
  std::string reason;
  double depth = 0.0;
  double line_out = 0.0;
};

struct MissionEvent {
  double time = 0.0;
  std::string event;
  std::string detail;
};

using RunnerEvent = std::variant<SampleRecord, FaultEvent, MissionEvent>;

class CompatibilityError : public std::runtime_error {
 public:
  CompatibilityError(const std::string& what, CompatibilityReport report)
      : std::runtime_error(what), report_(std::move(report)) {}
  [[nodiscard]] const CompatibilityReport& report() const { return report_; }

 private:
  CompatibilityReport report_;
};

class MissionRunner {
 public:
  explicit MissionRunner(Scenario scenario, const std::string& log_path = {})
      : scenario_(std::move(scenario)) {
    scenario_.validate();
    auto report = check_probe_compatibility(scenario_.probe, scenario_.winch, scenario_.platform);
    if (!report.all_passed()) {
      throw CompatibilityError("probe/winch/platform compatibility check failed", std::move(report));
    }
    if (!log_path.empty()) log_ = SampleLog(log_path);
    control_ticks_ = scenario_.control_ticks();
    sample_ticks_ = scenario_.sample_ticks();
    sensor_rng_.seed(scenario_.seed);

    asv_ = scenario_.asv;
    const double initial_line =
        std::min(scenario_.controller.shallow_setpoint, scenario_.winch.spool_capacity.value());
    plant_.line_out = initial_line;
    plant_.probe_depth = std::min(initial_line, effective_floor(scenario_.environment, asv_.position));
    plant_.tether_taut = plant_.line_out - plant_.probe_depth <= kTautTolerance;
    sync_asv();
    controller_ = make_controller(scenario_.controller, scenario_.winch);
    controller_.last_depth = plant_.probe_depth;
    controller_.last_line_out = plant_.line_out;
    controller_ = aps::set_underway(controller_, scenario_.controller.shallow_setpoint);
  }

  // --- operator / mission control -------------------------------------------------

  void start_mission() {
    if (status_ != MissionStatus::NotStarted) {
      throw CommandRejected("mission already started (" + std::string(to_string(status_)) + ")");
    }
    status_ = MissionStatus::Running;
    leg_ = 0;
    enter_phase(Phase::Stow);
    emit(MissionEvent{time(), "mission_started", ""});
  }

  void pause() {
    if (status_ != MissionStatus::Running) {
      throw CommandRejected("mission not running (" + std::string(to_string(status_)) + ")");
    }
    status_ = MissionStatus::Paused;
    emit(MissionEvent{time(), "mission_paused", "operator"});
  }

  void resume() {
    if (status_ == MissionStatus::PausedFault && controller_.mode == ControllerMode::Fault) {
      throw CommandRejected("acknowledge the fault before resuming");
    }
    if (status_ != MissionStatus::Paused && status_ != MissionStatus::PausedFault) {
      throw CommandRejected("mission not paused (" + std::string(to_string(status_)) + ")");
    }
    status_ = MissionStatus::Running;
    phase_entered_ = false;  // re-issue the current phase's command
    emit(MissionEvent{time(), "mission_resumed", ""});
  }

  void command_target_depth(double depth) {
    controller_ = aps::command_target_depth(controller_, depth, scenario_.winch);
    operator_override("set_target_depth");
  }

  /// Returns a warning when the step was clipped at a spool bound.
  std::string manual_step(StepDirection direction, std::optional<double> step_line = {}) {
    auto out = aps::manual_step(controller_, direction,
                                step_line.value_or(scenario_.controller.manual_step));
    controller_ = out.value;
    operator_override("manual_step");
    return out.warning;
  }

  void set_underway() {
    controller_ = aps::set_underway(controller_, scenario_.controller.shallow_setpoint);
    operator_override("set_underway");
  }

  /// Returns a warning when there was no fault to acknowledge.
  std::string acknowledge_fault() {
    auto out = aps::acknowledge_fault(controller_);
    controller_ = out.value;
    if (out.warning.empty()) emit(MissionEvent{time(), "fault_acknowledged", ""});
    return out.warning;
  }

  // --- stepping ----------------------------------------------------------------------

  /// Advances one plant step.
  void tick() {
    const double t = time();
    const bool control_tick = tick_ % control_ticks_ == 0;
    if (control_tick) control_update(t);

    if (tick_ % sample_ticks_ == 0) take_sample(t);

    const GeoPoint goal = asv_goal();
    asv_ = advance_asv(asv_, goal, scenario_.dt, asv_speed_limit());
    sync_asv();
    plant_.time = t;
    plant_ = step_with_cutoff(plant_, relay_, relay_cutoff_, scenario_.environment, scenario_.probe,
                              scenario_.winch, scenario_.dt);
    ++tick_;
    plant_.time = time();

    if (status_ == MissionStatus::Running && time() >= scenario_.max_duration) {
      status_ = MissionStatus::TimedOut;
      emit(MissionEvent{time(), "mission_timed_out", ""});
    }
  }

  std::vector<RunnerEvent> take_events() { return std::exchange(events_, {}); }

  // --- accessors ---------------------------------------------------------------------

  [[nodiscard]] double time() const { return static_cast<double>(tick_) * scenario_.dt; }
  [[nodiscard]] long tick_index() const { return tick_; }
  [[nodiscard]] const Scenario& scenario() const { return scenario_; }
  [[nodiscard]] const PlantState& plant() const { return plant_; }
  [[nodiscard]] const ControllerState& controller() const { return controller_; }
  [[nodiscard]] const ASVModel& asv() const { return asv_; }
  [[nodiscard]] MissionStatus status() const { return status_; }
  [[nodiscard]] double last_measured_depth() const { return measured_depth_; }
  [[nodiscard]] const std::vector<TrajectoryPoint>& trajectory() const { return trajectory_; }
  [[nodiscard]] const SampleLog& log() const { return log_; }
  [[nodiscard]] SampleLog& log() { return log_; }
  [[nodiscard]] std::size_t leg_index() const { return leg_; }
  [[nodiscard]] bool finished() const {
    return status_ == MissionStatus::Completed || status_ == MissionStatus::TimedOut;
  }

  // Test hook: places the probe directly (line, depth) for plant-level scenarios.
  void place_probe(double line_out, double depth) {
    plant_.line_out = line_out;
    plant_.probe_depth = depth;
    plant_.probe_velocity = 0.0;
    plant_.tether_taut = line_out - depth <= kTautTolerance;
    controller_.last_depth = depth;
    controller_.last_line_out = line_out;
  }

 private:
  enum class Phase { Stow, Move, Cast, WaitHolding, Dwell, Surface, WaitSurface };

  void enter_phase(Phase p) {
    phase_ = p;
    phase_entered_ = false;
  }

  void operator_override(const std::string& what) {
    if (status_ == MissionStatus::Running) {
      status_ = MissionStatus::Paused;
      emit(MissionEvent{time(), "mission_paused", "operator override: " + what});
    }
  }

  void emit(RunnerEvent e) { events_.push_back(std::move(e)); }

  void sync_asv() {
    plant_.asv_position = asv_.position;
    plant_.asv_speed = asv_.speed;
    plant_.asv_heading = asv_.heading;
  }

  [[nodiscard]] const MissionLeg* current_leg() const {
    if (leg_ >= scenario_.mission.legs.size()) return nullptr;
    return &scenario_.mission.legs[leg_];
  }

  // Transit legs move only in the Move phase; at a station the vehicle keeps
  // station on the hold position throughout.
  [[nodiscard]] GeoPoint asv_goal() const {
    const auto* leg = current_leg();
    if (status_ != MissionStatus::Running || !leg) return asv_.position;
    if (const auto* st = std::get_if<StationLeg>(leg)) {
      return phase_ == Phase::Stow ? asv_.position : st->hold_position;
    }
    return phase_ == Phase::Move ? std::get<TransitLeg>(*leg).to : asv_.position;
  }

  [[nodiscard]] double asv_speed_limit() const {
    if (const auto* leg = current_leg()) {
      if (const auto* t = std::get_if<TransitLeg>(leg)) return t->speed;
    }
    return asv_.max_speed;
  }

  void control_update(double t) {
    measured_depth_ = measure_depth(plant_, scenario_.probe, sensor_rng_);
    if (status_ == MissionStatus::Running) advance_mission(t);

    const bool was_fault = controller_.mode == ControllerMode::Fault;
    auto out = control_step(controller_, {measured_depth_, plant_.line_out, asv_.position, t});
    controller_ = out.state;
    relay_ = out.relay;
    relay_cutoff_ = out.relay_cutoff;

    if (!was_fault && controller_.mode == ControllerMode::Fault) {
      emit(FaultEvent{t, controller_.fault_reason.value_or("fault"), measured_depth_,
                      plant_.line_out});
      if (status_ == MissionStatus::Running || status_ == MissionStatus::Paused) {
        status_ = MissionStatus::PausedFault;
        emit(MissionEvent{t, "mission_paused", "fault: " + controller_.fault_reason.value_or("")});
      }
    }

    trajectory_.push_back({t, asv_.position, plant_.line_out, plant_.probe_depth, measured_depth_,
                           plant_.probe_velocity, plant_.tether_taut, relay_, controller_.mode,
                           controller_.target_depth});
  }

  void take_sample(double t) {
    SampleRecord r;
    r.timestamp = t;
    r.position = asv_.position;
    r.depth = measure_depth(plant_, scenario_.probe, sensor_rng_);
    r.mode = controller_.mode;
    const auto fields = sample_fields(scenario_.environment, asv_.position, plant_.probe_depth, t,
                                      scenario_.seed);
    for (const auto& p : scenario_.probe.parameters) r.values.emplace(p, fields.at(p));
    log_.append(r);
    emit(std::move(r));
  }

  void next_leg(double t) {
    ++leg_;
    if (leg_ >= scenario_.mission.legs.size()) {
      status_ = MissionStatus::Completed;
      emit(MissionEvent{t, "mission_completed", ""});
      return;
    }
    emit(MissionEvent{t, "leg_started", std::to_string(leg_)});
    enter_phase(Phase::Stow);
  }

  // Walks the plan; runs at control ticks before the controller update.
  void advance_mission(double t) {
    const auto* leg = current_leg();
    if (!leg) {
      status_ = MissionStatus::Completed;
      return;
    }
    const auto& ctrl = controller_;
    const auto* station = std::get_if<StationLeg>(leg);
    const GeoPoint destination =
        station ? station->hold_position : std::get<TransitLeg>(*leg).to;
    const LocalTangentPlane plane(asv_.position);

    switch (phase_) {
      case Phase::Stow:
        if (!phase_entered_) {
          phase_entered_ = true;
          if (ctrl.mode != ControllerMode::Underway) {
            controller_ = aps::set_underway(controller_, scenario_.controller.shallow_setpoint);
          }
        }
        if (controller_.mode == ControllerMode::Underway) enter_phase(Phase::Move);
        break;
      case Phase::Move:
        phase_entered_ = true;
        if (plane.distance(asv_.position, destination) <= asv_.station_keep_radius) {
          if (station) {
            emit(MissionEvent{t, "station_reached", std::to_string(leg_)});
            cast_ = 0;
            enter_phase(Phase::Cast);
            advance_mission(t);
          } else {
            next_leg(t);
          }
        }
        break;
      case Phase::Cast:
        if (cast_ >= station->casts.size()) {
          enter_phase(Phase::Surface);
          advance_mission(t);
          break;
        }
        controller_ = aps::command_target_depth(controller_, station->casts[cast_].target_depth,
                                                scenario_.winch);
        emit(MissionEvent{t, "cast_started",
                          format_number(station->casts[cast_].target_depth)});
        enter_phase(Phase::WaitHolding);
        phase_entered_ = true;
        break;
      case Phase::WaitHolding:
        if (!phase_entered_) {  // resumed: re-issue the cast command
          enter_phase(Phase::Cast);
          advance_mission(t);
          break;
        }
        if (ctrl.mode == ControllerMode::Holding) {
          cast_reached_at_ = t;
          emit(MissionEvent{t, "cast_reached", format_number(station->casts[cast_].target_depth)});
          enter_phase(Phase::Dwell);
          phase_entered_ = true;
        }
        break;
      case Phase::Dwell:
        if (!phase_entered_) {
          enter_phase(Phase::Cast);
          advance_mission(t);
          break;
        }
        if (t - cast_reached_at_ >= station->casts[cast_].dwell - 1e-9) {
          ++cast_;
          enter_phase(Phase::Cast);
          advance_mission(t);
        }
        break;
      case Phase::Surface:
        controller_ = aps::set_underway(controller_, scenario_.controller.shallow_setpoint);
        enter_phase(Phase::WaitSurface);
        phase_entered_ = true;
        break;
      case Phase::WaitSurface:
        if (!phase_entered_) {
          enter_phase(Phase::Surface);
          advance_mission(t);
          break;
        }
        if (ctrl.mode == ControllerMode::Underway) next_leg(t);
        break;
    }
  }

  Scenario scenario_;
  PlantState plant_;
  ControllerState controller_;
  ASVModel asv_;
  RelayCommand relay_ = RelayCommand::Off;
  std::optional<double> relay_cutoff_;
  double measured_depth_ = 0.0;
  std::mt19937_64 sensor_rng_;
  long tick_ = 0;
  long control_ticks_ = 10;
  long sample_ticks_ = 100;

  MissionStatus status_ = MissionStatus::NotStarted;
  std::size_t leg_ = 0;
  Phase phase_ = Phase::Stow;
  bool phase_entered_ = false;
  std::size_t cast_ = 0;
  double cast_reached_at_ = 0.0;

  SampleLog log_;
  std::vector<TrajectoryPoint> trajectory_;
  std::vector<RunnerEvent> events_;
};

struct MissionResult {
  MissionStatus status = MissionStatus::NotStarted;
  std::vector<TrajectoryPoint> trajectory;
  std::vector<SampleRecord> samples;
  std::vector<FaultEvent> faults;
  std::vector<MissionEvent> events;
  double end_time = 0.0;
};

/// Runs the plan headless until it completes, faults or times out.
/// `on_tick` (optional) observes the runner after every plant step.
inline MissionResult run_mission(const Scenario& scenario, const std::string& log_path = {},
                                 const std::function<void(MissionRunner&)>& on_tick = {}) {
  MissionRunner runner(scenario, log_path);
  MissionResult result;
  runner.start_mission();
  auto drain = [&] {
    for (auto& e : runner.take_events()) {
      if (auto* f = std::get_if<FaultEvent>(&e)) result.faults.push_back(std::move(*f));
      if (auto* m = std::get_if<MissionEvent>(&e)) result.events.push_back(std::move(*m));
    }
  };
  while (runner.status() == MissionStatus::Running) {
    runner.tick();
    if (on_tick) on_tick(runner);
    drain();
  }
  drain();
  runner.log().close();
  result.status = runner.status();
  result.trajectory = runner.trajectory();
  result.samples = runner.log().records();
  result.end_time = runner.time();
  return result;
}

}  // namespace aps
