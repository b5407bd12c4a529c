// Tracks a circle while alternating between the two modes and prints the
// error and energy every few seconds.

#include "sflc/metrics.hpp"
#include "sflc/simulation.hpp"

#include <cstdio>

int main() {
  sflc::Scenario sc;
  sc.schedule = sflc::SwitchSchedule::square_wave(sflc::SwitchSignal::energy_saving(), 8.0, 4);
  sc.duration = 40.0;

  const sflc::SimLog log = sflc::run_scenario(sc);
  std::printf("%6s %5s %12s %10s %10s\n", "t", "sigma", "|e1|", "v2", "energy");
  for (std::size_t k = 0; k < log.rows.size(); k += 4000) {
    const auto& r = log.rows[k];
    std::printf("%6.1f %5d %12.3e %10.4f %10.3f\n", r.t, r.sigma.value(), r.e1.norm(), r.state.v2, r.energy);
  }
  const auto m = sflc::compute_metrics(log);
  std::printf("switches %d, total energy %.3f, max |dv2| per step %.2e\n", m.switch_count, m.total_energy,
              m.max_step_dv2);
}
