// The probe snags on vegetation at 4 m. The stall fault pauses the mission and
// holds the relay off; the operator acknowledges and brings the probe up.

#include <cstdio>

#include "aps/runner.hpp"
#include "aps/scenario.hpp"

namespace {

void print_state(const aps::MissionRunner& r) {
  std::printf("t=%7.2f  %-12s mode %-10s relay %-8s depth %.2f m  line %.2f m\n", r.time(),
              std::string(aps::to_string(r.status())).c_str(), std::string(aps::to_string(r.controller().mode)).c_str(),
              std::string(aps::to_string(r.controller().relay_out)).c_str(), r.plant().probe_depth,
              r.plant().line_out);
}

void run_for(aps::MissionRunner& r, double seconds) {
  const double until = r.time() + seconds;
  while (r.time() < until) {
    r.tick();
    for (const auto& e : r.take_events()) {
      if (const auto* f = std::get_if<aps::FaultEvent>(&e)) {
        std::printf("FAULT at t=%.2f: %s (depth %.2f m)\n", f->time, f->reason.c_str(), f->depth);
      } else if (const auto* m = std::get_if<aps::MissionEvent>(&e)) {
        std::printf("event %-20s %s\n", m->event.c_str(), m->detail.c_str());
      }
    }
  }
}

}  // namespace

int main() {
  aps::MissionRunner runner(aps::vegetation_scenario());
  runner.start_mission();
  while (runner.status() == aps::MissionStatus::Running) run_for(runner, 1.0);
  print_state(runner);

  std::printf("waiting 10 s before acknowledging\n");
  run_for(runner, 10.0);
  print_state(runner);

  const auto warning = runner.acknowledge_fault();
  if (!warning.empty()) std::printf("ack warning: %s\n", warning.c_str());
  runner.set_underway();
  run_for(runner, 30.0);
  print_state(runner);
}
