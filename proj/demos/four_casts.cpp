// Runs the four-cast lake mission headless and prints one line per profile.

#include <cstdio>

#include "aps/datalog.hpp"
#include "aps/runner.hpp"
#include "aps/scenario.hpp"

int main() {
  const auto result = aps::run_mission(aps::lake_hertel_scenario());
  std::printf("status %s after %.1f s, %zu samples\n", std::string(aps::to_string(result.status)).c_str(),
              result.end_time, result.samples.size());
  const auto profiles = aps::assemble_profiles(result.samples);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const auto& p = profiles[i];
    std::printf("  profile %zu  station %d  %3zu samples  max depth %.2f m%s\n", i, p.station_id,
                p.samples.size(), p.max_depth(), p.interrupted ? "  (interrupted)" : "");
  }
  const auto temp = aps::depth_normalized_summary(result.samples, "temperature", 1.0);
  std::printf("temperature, normalized, 1 m bins:\n");
  for (const auto& b : temp.bins) std::printf("  %4.1f-%4.1f m  %.3f  (n=%zu)\n", b.depth_lo, b.depth_hi, b.mean, b.count);
}
