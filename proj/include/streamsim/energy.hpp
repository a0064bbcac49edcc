#pragma once

#include "streamsim/delivery_sim.hpp"
#include "streamsim/radio_models.hpp"

#include <json.hpp>

#include <map>
#include <string>

namespace streamsim {

struct EnergyResult
{
  // Time-averaged radio current over the wall time.
  double avg_current_mA = 0.0;
  // Radio current while idle: the resting state's draw, or the lowest state
  // visited if that is lower.
  double baseline_mA = 0.0;
  // Radio current attributable to streaming (average minus baseline).
  double avg_streaming_current_mA = 0.0;
  // Radio energy at the profile's nominal voltage.
  double energy_J = 0.0;
};

/// Current of the state the radio settles in after long inactivity.
double resting_current(const RadioConfig& cfg, const PowerProfile& profile);

/// Throws InvariantError when the timeline does not tile [0, wall_time_s].
EnergyResult integrate_energy(const RadioTimeline& timeline,
                              const PowerProfile& profile,
                              double wall_time_s,
                              std::optional<double> resting_mA = std::nullopt);

/// Mean current over the connected-mode DRX intervals (on and sleep), or 0
/// when the timeline has none.
double drx_tail_current(const RadioTimeline& timeline);

struct SessionSummary
{
  double joining_time_s = 0.0;
  int stall_count = 0;
  double stall_total_s = 0.0;
  std::int64_t bytes_downloaded = 0;
  std::int64_t bytes_consumed = 0;
  // Downloaded but never played: discards plus whatever is still buffered.
  std::int64_t bytes_wasted = 0;
  double avg_streaming_current_mA = 0.0;
  double avg_playback_current_mA = 0.0;
  double avg_total_current_mA = 0.0;
  double energy_J = 0.0;
  double wall_time_s = 0.0;
  std::map<std::string, double> state_residency;
};

/// Cross-checks delivery, playback and radio artifacts of one session and
/// folds them into a summary. Throws InvariantError on any mismatch.
SessionSummary summarize(const SessionResult& session,
                         const RadioTimeline& timeline,
                         const PowerProfile& profile,
                         const RadioConfig& radio);

nlohmann::json to_json(const SessionSummary& summary);

} // namespace streamsim
