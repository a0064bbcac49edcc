#include "streamsim/energy.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace streamsim {

double
resting_current(const RadioConfig& cfg, const PowerProfile& profile)
{
  if (const auto* w = std::get_if<WifiPsmConfig>(&cfg))
    {
      if (!w->sleep_current_applies)
        {
          return profile.wifi_idle_tail;
        }
      // dozing includes the periodic beacon wakes
      const double awake = std::min(1.0, w->beacon_wake_ms / w->listen_interval_ms);
      return (1.0 - awake) * profile.wifi_sleep + awake * profile.wifi_idle_tail;
    }
  if (const auto* h = std::get_if<HspaRrcConfig>(&cfg))
    {
      return h->fast_dormancy && h->fd_target == DormancyTarget::Idle ? profile.hspa_idle : profile.hspa_pch;
    }
  return profile.lte_idle;
}

EnergyResult
integrate_energy(const RadioTimeline& timeline,
                 const PowerProfile& profile,
                 double wall_time_s,
                 std::optional<double> resting_mA)
{
  EnergyResult r;
  if (wall_time_s <= 0.0)
    {
      r.baseline_mA = resting_mA.value_or(0.0);
      return r;
    }
  timeline.require_coverage(wall_time_s);
  double charge = 0.0;  // mA*s
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& iv : timeline.intervals())
    {
      charge += iv.current_mA * iv.duration();
      // Wi-Fi sleep never lasts without beacon wakes; the resting draw covers it
      if (iv.state != RadioState::WifiSleep && iv.state != RadioState::WifiBeacon)
        {
          lowest = std::min(lowest, iv.current_mA);
        }
    }
  r.avg_current_mA = charge / wall_time_s;
  r.baseline_mA = resting_mA ? std::min(*resting_mA, lowest) : lowest;
  r.avg_streaming_current_mA = r.avg_current_mA - r.baseline_mA;
  r.energy_J = charge / 1000.0 * profile.nominal_voltage_V;
  return r;
}

double
drx_tail_current(const RadioTimeline& timeline)
{
  double charge = 0.0;
  double time = 0.0;
  for (const auto& iv : timeline.intervals())
    {
      if (iv.state == RadioState::LteDrxOn || iv.state == RadioState::LteDrxSleep)
        {
          charge += iv.current_mA * iv.duration();
          time += iv.duration();
        }
    }
  return time > 0.0 ? charge / time : 0.0;
}

SessionSummary
summarize(const SessionResult& session, const RadioTimeline& timeline, const PowerProfile& profile,
          const RadioConfig& radio)
{
  const auto on_wire = data_bytes(session.events);
  if (on_wire != session.log.bytes_delivered)
    {
      throw InvariantError(fmt::format("event stream carries {} data bytes but the delivery log reports {}", on_wire,
                                       session.log.bytes_delivered));
    }
  const auto& log = session.log;
  if (log.bytes_consumed + log.bytes_discarded + log.bytes_buffered_end != log.bytes_delivered)
    {
      throw InvariantError("delivery log does not balance");
    }

  SessionSummary s;
  s.wall_time_s = session.wall_time_s;
  s.joining_time_s = session.qoe.joining_time_s;
  s.stall_count = static_cast<int>(session.qoe.stalls.size());
  s.stall_total_s = session.qoe.stall_total_s;
  s.bytes_downloaded = log.bytes_delivered;
  s.bytes_consumed = log.bytes_consumed;
  s.bytes_wasted = log.bytes_delivered - log.bytes_consumed;

  const auto e = integrate_energy(timeline, profile, s.wall_time_s, resting_current(radio, profile));
  s.avg_streaming_current_mA = e.avg_streaming_current_mA;
  s.avg_playback_current_mA = s.wall_time_s > 0.0 ? profile.playback_mA + e.baseline_mA : 0.0;
  s.avg_total_current_mA = s.avg_streaming_current_mA + s.avg_playback_current_mA;
  s.energy_J = s.avg_total_current_mA / 1000.0 * profile.nominal_voltage_V * s.wall_time_s;
  s.state_residency = timeline.residency();

  double resident = 0.0;
  for (const auto& [state, secs] : s.state_residency)
    {
      resident += secs;
    }
  if (std::abs(resident - s.wall_time_s) > 1e-6 * std::max(1.0, s.wall_time_s))
    {
      throw InvariantError(fmt::format("state residency sums to {} s, wall time is {} s", resident, s.wall_time_s));
    }
  return s;
}

nlohmann::json
to_json(const SessionSummary& s)
{
  nlohmann::json j;
  j["joining_time_s"] = std::isfinite(s.joining_time_s) ? nlohmann::json(s.joining_time_s) : nlohmann::json(nullptr);
  j["stall_count"] = s.stall_count;
  j["stall_total_s"] = s.stall_total_s;
  j["bytes_downloaded"] = s.bytes_downloaded;
  j["bytes_consumed"] = s.bytes_consumed;
  j["bytes_wasted"] = s.bytes_wasted;
  j["avg_streaming_current_mA"] = s.avg_streaming_current_mA;
  j["avg_playback_current_mA"] = s.avg_playback_current_mA;
  j["avg_total_current_mA"] = s.avg_total_current_mA;
  j["energy_J"] = s.energy_J;
  j["wall_time_s"] = s.wall_time_s;
  j["state_residency"] = s.state_residency;
  return j;
}

} // namespace streamsim
