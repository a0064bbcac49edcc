#pragma once

// Fixed-step reference models used to cross-check the interval simulators.
// Each one decides the radio state of every step from the packets around it
// instead of tracking transitions.

#include "streamsim/radio_models.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <vector>

namespace oracle {

using namespace streamsim;

struct StepResult
{
  std::map<RadioState, double> residency;
  double charge_mAs = 0.0;
};

inline StepResult
wifi_steps(std::span<const PacketEvent> ev, double end, const WifiPsmConfig& cfg, const PowerProfile& p,
           double dt = 1e-3)
{
  std::vector<double> ts;
  for (const auto& e : ev)
    if (e.t_s <= end)
      ts.push_back(e.t_s);
  const double eps = cfg.packet_active_ms / 1000.0, tail = cfg.tail_ms / 1000.0;
  const double gap = cfg.burst_gap_ms / 1000.0, li = cfg.listen_interval_ms / 1000.0;
  const double wake = cfg.beacon_wake_ms / 1000.0;
  StepResult r;
  const auto n = static_cast<long>(std::llround(end / dt));
  for (long k = 0; k < n; ++k)
    {
      const double tm = (static_cast<double>(k) + 0.5) * dt;
      auto it = std::upper_bound(ts.begin(), ts.end(), tm);
      RadioState s;
      const bool has_prev = it != ts.begin();
      const bool has_next = it != ts.end();
      const double prev = has_prev ? *std::prev(it) : 0.0;
      if (has_prev && (tm < prev + eps || (has_next && *it - prev <= gap)))
        s = RadioState::WifiActive;
      else if (has_prev && tm < prev + eps + tail)
        s = RadioState::WifiTail;
      else if (!cfg.sleep_current_applies)
        s = RadioState::WifiTail;
      else
        s = std::fmod(tm, li) < wake ? RadioState::WifiBeacon : RadioState::WifiSleep;
      r.residency[s] += dt;
      r.charge_mAs += current_of(s, p) * dt;
    }
  return r;
}

inline StepResult
hspa_steps(std::span<const PacketEvent> ev, double end, const HspaRrcConfig& cfg, const PowerProfile& p,
           double dt = 1e-3)
{
  RadioState s = RadioState::HspaIdle;
  double since = 0.0;       // start of the current inactivity timer
  double up_at = -1.0;      // end of the last promotion
  std::size_t i = 0;
  StepResult r;
  const auto n = static_cast<long>(std::llround(end / dt));
  const bool fd = cfg.fast_dormancy && cfg.fd_timer_s <= cfg.t1_s;
  // apply every timer that expired by `now`
  auto expire = [&](double now) {
    for (bool moved = true; moved;)
      {
        moved = false;
        const double hold = fd ? cfg.fd_timer_s : cfg.t1_s;
        if (s == RadioState::HspaDch && now >= std::max(up_at, since + hold))
          {
            since = std::max(up_at, since + hold);
            s = fd ? (cfg.fd_target == DormancyTarget::CellPch ? RadioState::HspaPch : RadioState::HspaIdle)
                   : RadioState::HspaFach;
            moved = true;
          }
        else if (s == RadioState::HspaFach && now >= since + cfg.t2_s)
          {
            since += cfg.t2_s;
            s = RadioState::HspaPch;
            moved = true;
          }
        else if (s == RadioState::HspaPch && now >= since + cfg.t3_s)
          {
            since += cfg.t3_s;
            s = RadioState::HspaIdle;
            moved = true;
          }
      }
  };
  for (long k = 0; k < n; ++k)
    {
      const double t0 = static_cast<double>(k) * dt, t1 = t0 + dt;
      expire(t0);
      for (; i < ev.size() && ev[i].t_s < t1; ++i)
        {
          const auto& e = ev[i];
          expire(e.t_s);
          if (s == RadioState::HspaDch || (s == RadioState::HspaFach && e.bytes < cfg.fach_max_bytes))
            since = e.t_s;
          else
            {
              const double lat = s == RadioState::HspaFach ? cfg.fach_promotion_latency_s : cfg.promotion_latency_s;
              s = RadioState::HspaDch;
              since = e.t_s;
              up_at = e.t_s + lat;
            }
        }
      r.residency[s] += dt;
      r.charge_mAs += current_of(s, p) * dt;
    }
  return r;
}

inline StepResult
lte_steps(std::span<const PacketEvent> ev, double end, const LteDrxConfig& cfg, const PowerProfile& p,
          double dt = 1e-3)
{
  const double inact = cfg.drx_inactivity_ms / 1000.0, cycle = cfg.drx_cycle_ms / 1000.0;
  const double awake = std::min(cycle, std::max(cfg.drx_on_ms, p.drx_on_overstay_ms) / 1000.0);
  bool connected = false;
  double last = 0.0, up_at = -1.0;
  std::size_t i = 0;
  StepResult r;
  const auto n = static_cast<long>(std::llround(end / dt));
  for (long k = 0; k < n; ++k)
    {
      const double t0 = static_cast<double>(k) * dt, t1 = t0 + dt, tm = t0 + 0.5 * dt;
      for (; i < ev.size() && ev[i].t_s < t1; ++i)
        {
          const double te = ev[i].t_s;
          if (!connected || te >= last + cfg.rrc_idle_s)
            up_at = te + cfg.promotion_latency_ms / 1000.0;
          last = te;
          connected = true;
        }
      RadioState s = RadioState::LteIdle;
      if (connected && tm - last < cfg.rrc_idle_s)
        {
          const double drx_at = std::max(up_at, last + inact);
          if (!cfg.drx_enabled || tm < drx_at)
            s = RadioState::LteConnected;
          else
            s = std::fmod(tm - drx_at, cycle) < awake ? RadioState::LteDrxOn : RadioState::LteDrxSleep;
        }
      r.residency[s] += dt;
      r.charge_mAs += current_of(s, p) * dt;
    }
  return r;
}

inline StepResult
radio_steps(std::span<const PacketEvent> ev, double end, const RadioConfig& cfg, const PowerProfile& p,
            double dt = 1e-3)
{
  if (const auto* w = std::get_if<WifiPsmConfig>(&cfg))
    return wifi_steps(ev, end, *w, p, dt);
  if (const auto* h = std::get_if<HspaRrcConfig>(&cfg))
    return hspa_steps(ev, end, *h, p, dt);
  return lte_steps(ev, end, std::get<LteDrxConfig>(cfg), p, dt);
}

/// Charge (mA*s) of an interval timeline by sampling it every `dt`.
inline double
riemann_charge(const RadioTimeline& tl, double end, double dt = 1e-3)
{
  double q = 0.0;
  std::size_t j = 0;
  const auto& iv = tl.intervals();
  const auto n = static_cast<long>(std::llround(end / dt));
  for (long k = 0; k < n; ++k)
    {
      const double tm = (static_cast<double>(k) + 0.5) * dt;
      while (j + 1 < iv.size() && iv[j].t_end_s <= tm)
        ++j;
      q += iv[j].current_mA * dt;
    }
  return q;
}

inline double
interval_charge(const RadioTimeline& tl)
{
  double q = 0.0;
  for (const auto& iv : tl.intervals())
    q += iv.current_mA * iv.duration();
  return q;
}

inline std::map<RadioState, double>
interval_residency(const RadioTimeline& tl)
{
  std::map<RadioState, double> m;
  for (const auto& iv : tl.intervals())
    m[iv.state] += iv.duration();
  return m;
}

} // namespace oracle
