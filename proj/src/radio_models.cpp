#include "streamsim/radio_models.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>

namespace streamsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Intervals shorter than this are treated as empty (float noise).
constexpr double kTimeEps = 1e-12;

void
require(bool ok, const char* field, const char* what)
{
  if (!ok)
    {
      throw ConfigError(field, what);
    }
}

struct StateInfo
{
  RadioState state;
  std::string_view label;
  Technology tech;
};

constexpr std::array<StateInfo, 12> kStates{{
  {RadioState::WifiActive, "active", Technology::Wifi},
  {RadioState::WifiTail, "idle_tail", Technology::Wifi},
  {RadioState::WifiSleep, "sleep", Technology::Wifi},
  {RadioState::WifiBeacon, "beacon", Technology::Wifi},
  {RadioState::HspaDch, "CELL_DCH", Technology::Hspa},
  {RadioState::HspaFach, "CELL_FACH", Technology::Hspa},
  {RadioState::HspaPch, "CELL_PCH", Technology::Hspa},
  {RadioState::HspaIdle, "IDLE", Technology::Hspa},
  {RadioState::LteConnected, "RRC_CONNECTED", Technology::Lte},
  {RadioState::LteDrxOn, "DRX_ON", Technology::Lte},
  {RadioState::LteDrxSleep, "DRX_SLEEP", Technology::Lte},
  {RadioState::LteIdle, "RRC_IDLE", Technology::Lte},
}};

// Events past the end of the session never influence the timeline.
std::span<const PacketEvent>
clip_events(std::span<const PacketEvent> events, double end)
{
  require_sorted(events);
  auto last = std::upper_bound(events.begin(), events.end(), end,
                               [](double t, const PacketEvent& e) { return t < e.t_s; });
  return events.first(static_cast<std::size_t>(last - events.begin()));
}

} // namespace

std::string_view
to_string(Technology tech)
{
  switch (tech)
    {
    case Technology::Wifi:
      return "wifi";
    case Technology::Hspa:
      return "hspa";
    case Technology::Lte:
      return "lte";
    }
  return "wifi";
}

Technology
parse_technology(std::string_view text)
{
  for (auto tech : {Technology::Wifi, Technology::Hspa, Technology::Lte})
    {
      if (to_string(tech) == text)
        {
          return tech;
        }
    }
  throw ConfigError("radio.tech", fmt::format("unknown technology '{}' (expected wifi, hspa or lte)", text));
}

std::string_view
to_string(RadioState state)
{
  return kStates[static_cast<std::size_t>(state)].label;
}

RadioState
parse_radio_state(std::string_view text)
{
  for (const auto& info : kStates)
    {
      if (info.label == text)
        {
          return info.state;
        }
    }
  throw ConfigError("state", fmt::format("unknown radio state '{}'", text));
}

Technology
technology_of(RadioState state)
{
  return kStates[static_cast<std::size_t>(state)].tech;
}

Technology
technology_of(const RadioConfig& cfg)
{
  return static_cast<Technology>(cfg.index());
}

double
current_of(RadioState state, const PowerProfile& p)
{
  switch (state)
    {
    case RadioState::WifiActive:
      return p.wifi_active;
    case RadioState::WifiTail:
    case RadioState::WifiBeacon:
      return p.wifi_idle_tail;
    case RadioState::WifiSleep:
      return p.wifi_sleep;
    case RadioState::HspaDch:
      return p.hspa_dch;
    case RadioState::HspaFach:
      return p.hspa_fach;
    case RadioState::HspaPch:
      return p.hspa_pch;
    case RadioState::HspaIdle:
      return p.hspa_idle;
    case RadioState::LteConnected:
      return p.lte_rx;
    case RadioState::LteDrxOn:
      return p.lte_drx_on;
    case RadioState::LteDrxSleep:
      return p.lte_drx_sleep;
    case RadioState::LteIdle:
      return p.lte_idle;
    }
  return 0.0;
}

void
WifiPsmConfig::validate() const
{
  require(listen_interval_ms > 0.0, "radio.listen_interval_ms", "must be > 0");
  require(tail_ms >= 0.0, "radio.tail_ms", "must be >= 0");
  require(beacon_wake_ms >= 0.0 && beacon_wake_ms <= listen_interval_ms, "radio.beacon_wake_ms",
          "must lie in [0, listen_interval_ms]");
  require(packet_active_ms >= 0.0, "radio.packet_active_ms", "must be >= 0");
  require(burst_gap_ms >= 0.0, "radio.burst_gap_ms", "must be >= 0");
}

void
HspaRrcConfig::validate() const
{
  require(t1_s > 0.0, "radio.t1_s", "must be > 0");
  require(t2_s > 0.0, "radio.t2_s", "must be > 0");
  require(t3_s > 0.0, "radio.t3_s", "must be > 0");
  require(promotion_latency_s >= 0.0, "radio.promotion_latency_s", "must be >= 0");
  require(fach_promotion_latency_s >= 0.0, "radio.fach_promotion_latency_s", "must be >= 0");
  require(fach_max_bytes >= 0, "radio.fach_max_bytes", "must be >= 0");
  if (fast_dormancy)
    {
      require(fd_timer_s > 0.0, "radio.fd_timer_s", "must be > 0");
      require(fd_timer_s <= t1_s, "radio.fd_timer_s", "must not exceed t1_s when fast dormancy is enabled");
    }
}

void
LteDrxConfig::validate() const
{
  require(rrc_idle_s > 0.0, "radio.rrc_idle_s", "must be > 0");
  require(promotion_latency_ms >= 0.0, "radio.promotion_latency_ms", "must be >= 0");
  require(drx_inactivity_ms >= 0.0, "radio.drx_inactivity_ms", "must be >= 0");
  if (drx_enabled)
    {
      require(drx_cycle_ms >= 20.0 && drx_cycle_ms <= 5000.0, "radio.drx_cycle_ms", "must lie in [20, 5000]");
      require(drx_on_ms > 0.0 && drx_on_ms < drx_cycle_ms, "radio.drx_on_ms", "must lie in (0, drx_cycle_ms)");
    }
}

void
PowerProfile::validate() const
{
  const std::array<std::pair<const char*, double>, 13> currents{{
    {"profile.wifi_active", wifi_active},
    {"profile.wifi_idle_tail", wifi_idle_tail},
    {"profile.wifi_sleep", wifi_sleep},
    {"profile.hspa_dch", hspa_dch},
    {"profile.hspa_fach", hspa_fach},
    {"profile.hspa_pch", hspa_pch},
    {"profile.hspa_idle", hspa_idle},
    {"profile.lte_rx", lte_rx},
    {"profile.lte_drx_on", lte_drx_on},
    {"profile.lte_drx_sleep", lte_drx_sleep},
    {"profile.lte_idle", lte_idle},
    {"profile.playback_mA", playback_mA},
    {"profile.drx_on_overstay_ms", drx_on_overstay_ms},
  }};
  for (const auto& [field, value] : currents)
    {
      require(value >= 0.0 && std::isfinite(value), field, "must be a finite value >= 0");
    }
  require(hspa_dch >= hspa_fach, "profile.hspa_fach", "must not exceed hspa_dch");
  require(hspa_fach >= hspa_pch, "profile.hspa_pch", "must not exceed hspa_fach");
  require(nominal_voltage_V > 0.0, "profile.nominal_voltage_V", "must be > 0");
}

void
PowerProfile::validate_against(const LteDrxConfig& cfg) const
{
  if (cfg.drx_enabled)
    {
      require(drx_on_overstay_ms >= cfg.drx_on_ms, "profile.drx_on_overstay_ms",
              "must be >= the configured drx_on_ms");
    }
}

void
RadioTimeline::append(RadioState state, double start, double end, double current_mA)
{
  // slivers shorter than kTimeEps are dropped; the next interval absorbs them
  if (!intervals_.empty())
    {
      start = intervals_.back().t_end_s;
    }
  if (end - start <= kTimeEps)
    {
      return;
    }
  if (!intervals_.empty() && intervals_.back().state == state)
    {
      intervals_.back().t_end_s = end;
      return;
    }
  intervals_.push_back({state, start, end, current_mA});
}

std::map<std::string, double>
RadioTimeline::residency() const
{
  std::map<std::string, double> out;
  for (const auto& iv : intervals_)
    {
      out[std::string(to_string(iv.state))] += iv.duration();
    }
  return out;
}

void
RadioTimeline::require_coverage(double end_s) const
{
  if (end_s <= 0.0 && intervals_.empty())
    {
      return;
    }
  if (intervals_.empty())
    {
      throw InvariantError(fmt::format("radio timeline is empty but must cover [0, {}]", end_s));
    }
  if (std::abs(intervals_.front().t_start_s) > 1e-9)
    {
      throw InvariantError(fmt::format("radio timeline starts at {} instead of 0", intervals_.front().t_start_s));
    }
  for (std::size_t i = 1; i < intervals_.size(); ++i)
    {
      if (std::abs(intervals_[i].t_start_s - intervals_[i - 1].t_end_s) > 1e-9)
        {
          throw InvariantError(fmt::format("radio timeline gap/overlap at interval {}: {} vs {}", i,
                                           intervals_[i - 1].t_end_s, intervals_[i].t_start_s));
        }
    }
  if (std::abs(intervals_.back().t_end_s - end_s) > 1e-9)
    {
      throw InvariantError(
        fmt::format("radio timeline ends at {} but session ends at {}", intervals_.back().t_end_s, end_s));
    }
}

// ---------------------------------------------------------------------------
// Wi-Fi PSM

namespace {

class WifiBuilder
{
public:
  WifiBuilder(const WifiPsmConfig& cfg, const PowerProfile& p) : cfg_(cfg), p_(p), timeline_(Technology::Wifi) {}

  void put(RadioState s, double from, double to)
  {
    if (to - from > kTimeEps)
      {
        timeline_.append(s, from, to, current_of(s, p_));
      }
  }

  // Sleep punctuated by beacon wakes at every multiple of the listen interval.
  void sleep(double from, double to)
  {
    if (to - from <= kTimeEps)
      {
        return;
      }
    if (!cfg_.sleep_current_applies)
      {
        put(RadioState::WifiTail, from, to);
        return;
      }
    const double li = cfg_.listen_interval_ms / 1000.0;
    const double wake = cfg_.beacon_wake_ms / 1000.0;
    double cursor = from;
    for (auto k = static_cast<std::int64_t>(std::floor(from / li)); cursor < to; ++k)
      {
        const double b0 = static_cast<double>(k) * li;
        const double b1 = b0 + wake;
        if (b0 >= to)
          {
            break;
          }
        const double s = std::max(cursor, b0);
        const double e = std::min(to, b1);
        if (e > s)
          {
            put(RadioState::WifiSleep, cursor, s);
            put(RadioState::WifiBeacon, s, e);
            cursor = e;
          }
      }
    put(RadioState::WifiSleep, cursor, to);
  }

  RadioTimeline take() { return std::move(timeline_); }

private:
  const WifiPsmConfig& cfg_;
  const PowerProfile& p_;
  RadioTimeline timeline_;
};

} // namespace

RadioTimeline
simulate_wifi(std::span<const PacketEvent> events, double session_end_s, const WifiPsmConfig& cfg,
              const PowerProfile& profile)
{
  cfg.validate();
  if (session_end_s <= 0.0)
    {
      return RadioTimeline(Technology::Wifi);
    }
  events = clip_events(events, session_end_s);

  const double eps = cfg.packet_active_ms / 1000.0;
  const double tail = cfg.tail_ms / 1000.0;
  const double burst_gap = cfg.burst_gap_ms / 1000.0;

  WifiBuilder b(cfg, profile);
  double cursor = 0.0;
  std::size_t i = 0;
  while (i < events.size())
    {
      const double burst_start = events[i].t_s;
      double burst_end = burst_start;
      while (i + 1 < events.size() && events[i + 1].t_s - burst_end <= burst_gap)
        {
          burst_end = events[++i].t_s;
        }
      ++i;
      const double next = i < events.size() ? events[i].t_s : session_end_s;

      b.sleep(cursor, burst_start);
      const double active_end = std::min(burst_end + eps, next);
      const double tail_end = std::min(active_end + tail, next);
      b.put(RadioState::WifiActive, burst_start, active_end);
      b.put(RadioState::WifiTail, active_end, tail_end);
      cursor = tail_end;
    }
  b.sleep(cursor, session_end_s);
  return b.take();
}

// ---------------------------------------------------------------------------
// HSPA RRC

namespace {

class HspaMachine
{
public:
  HspaMachine(const HspaRrcConfig& cfg, const PowerProfile& p) : cfg_(cfg), p_(p), timeline_(Technology::Hspa) {}

  void advance_to(double t)
  {
    for (double d = deadline(); d <= t; d = deadline())
      {
        emit(d);
        state_ = demoted();
        timer_start_ = d;
      }
    emit(t);
  }

  void on_event(const PacketEvent& e)
  {
    advance_to(e.t_s);
    switch (state_)
      {
      case RadioState::HspaDch:
        timer_start_ = e.t_s;
        break;
      case RadioState::HspaFach:
        if (e.bytes < cfg_.fach_max_bytes)
          {
            timer_start_ = e.t_s;
          }
        else
          {
            promote(e.t_s, cfg_.fach_promotion_latency_s);
          }
        break;
      default:
        promote(e.t_s, cfg_.promotion_latency_s);
        break;
      }
  }

  RadioTimeline take() { return std::move(timeline_); }

private:
  bool dormancy_first() const { return cfg_.fast_dormancy && cfg_.fd_timer_s <= cfg_.t1_s; }

  double deadline() const
  {
    switch (state_)
      {
      case RadioState::HspaDch:
        return std::max(promotion_end_, timer_start_ + (dormancy_first() ? cfg_.fd_timer_s : cfg_.t1_s));
      case RadioState::HspaFach:
        return timer_start_ + cfg_.t2_s;
      case RadioState::HspaPch:
        return timer_start_ + cfg_.t3_s;
      default:
        return kInf;
      }
  }

  RadioState demoted() const
  {
    switch (state_)
      {
      case RadioState::HspaDch:
        if (dormancy_first())
          {
            return cfg_.fd_target == DormancyTarget::CellPch ? RadioState::HspaPch : RadioState::HspaIdle;
          }
        return RadioState::HspaFach;
      case RadioState::HspaFach:
        return RadioState::HspaPch;
      default:
        return RadioState::HspaIdle;
      }
  }

  // Promotion time is charged at DCH current and counts towards the
  // inactivity timer, so a promotion never outlasts the DCH hold it starts.
  void promote(double t, double latency)
  {
    state_ = RadioState::HspaDch;
    timer_start_ = t;
    promotion_end_ = t + latency;
  }

  void emit(double t)
  {
    if (t > cursor_)
      {
        timeline_.append(state_, cursor_, t, current_of(state_, p_));
        cursor_ = t;
      }
  }

  const HspaRrcConfig& cfg_;
  const PowerProfile& p_;
  RadioTimeline timeline_;
  RadioState state_ = RadioState::HspaIdle;
  double timer_start_ = 0.0;
  double promotion_end_ = -kInf;
  double cursor_ = 0.0;
};

} // namespace

RadioTimeline
simulate_hspa(std::span<const PacketEvent> events, double session_end_s, const HspaRrcConfig& cfg,
              const PowerProfile& profile)
{
  cfg.validate();
  if (session_end_s <= 0.0)
    {
      return RadioTimeline(Technology::Hspa);
    }
  if (cfg.fast_dormancy && cfg.fd_target == DormancyTarget::Idle)
    {
      spdlog::debug("hspa: fast dormancy targets IDLE; t3={}s is never reached from DCH", cfg.t3_s);
    }
  events = clip_events(events, session_end_s);
  HspaMachine m(cfg, profile);
  for (const auto& e : events)
    {
      m.on_event(e);
    }
  m.advance_to(session_end_s);
  return m.take();
}

// ---------------------------------------------------------------------------
// LTE RRC + cDRX

namespace {

class LteMachine
{
public:
  LteMachine(const LteDrxConfig& cfg, const PowerProfile& p)
    : cfg_(cfg)
    , p_(p)
    , timeline_(Technology::Lte)
    , inactivity_(cfg.drx_inactivity_ms / 1000.0)
    , cycle_(cfg.drx_cycle_ms / 1000.0)
    , awake_(std::min(cycle_, std::max(cfg.drx_on_ms, p.drx_on_overstay_ms) / 1000.0))
  {
  }

  void on_event(const PacketEvent& e)
  {
    const bool idle = !active_ || e.t_s >= last_activity_ + cfg_.rrc_idle_s;
    emit_until(e.t_s);
    if (idle)
      {
        promotion_end_ = e.t_s + cfg_.promotion_latency_ms / 1000.0;
      }
    last_activity_ = e.t_s;
    active_ = true;
  }

  void emit_until(double t)
  {
    if (t <= cursor_)
      {
        return;
      }
    if (!active_)
      {
        put(RadioState::LteIdle, t);
        return;
      }
    const double release = last_activity_ + cfg_.rrc_idle_s;
    const double drx_start =
        cfg_.drx_enabled ? std::min(release, std::max(promotion_end_, last_activity_ + inactivity_)) : release;
    put(RadioState::LteConnected, std::min(t, std::min(drx_start, release)));
    if (cfg_.drx_enabled && cursor_ < std::min(t, release))
      {
        const double limit = std::min(t, release);
        auto k = static_cast<std::int64_t>(std::floor((cursor_ - drx_start) / cycle_));
        k = std::max<std::int64_t>(k, 0);
        while (cursor_ < limit)
          {
            const double c0 = drx_start + static_cast<double>(k) * cycle_;
            put(RadioState::LteDrxOn, std::min(limit, c0 + awake_));
            put(RadioState::LteDrxSleep, std::min(limit, c0 + cycle_));
            ++k;
          }
      }
    put(RadioState::LteIdle, t);
  }

  RadioTimeline take() { return std::move(timeline_); }

private:
  void put(RadioState s, double to)
  {
    if (to > cursor_)
      {
        timeline_.append(s, cursor_, to, current_of(s, p_));
        cursor_ = to;
      }
  }

  const LteDrxConfig& cfg_;
  const PowerProfile& p_;
  RadioTimeline timeline_;
  double inactivity_;
  double cycle_;
  double awake_;
  bool active_ = false;
  double last_activity_ = 0.0;
  double promotion_end_ = -kInf;
  double cursor_ = 0.0;
};

} // namespace

RadioTimeline
simulate_lte(std::span<const PacketEvent> events, double session_end_s, const LteDrxConfig& cfg,
             const PowerProfile& profile)
{
  cfg.validate();
  profile.validate_against(cfg);
  if (session_end_s <= 0.0)
    {
      return RadioTimeline(Technology::Lte);
    }
  events = clip_events(events, session_end_s);
  LteMachine m(cfg, profile);
  for (const auto& e : events)
    {
      m.on_event(e);
    }
  m.emit_until(session_end_s);
  return m.take();
}

RadioTimeline
simulate_radio(std::span<const PacketEvent> events, double session_end_s, const RadioConfig& cfg,
               const PowerProfile& profile)
{
  return std::visit(
    [&](const auto& c) -> RadioTimeline {
      using T = std::decay_t<decltype(c)>;
      if constexpr (std::is_same_v<T, WifiPsmConfig>)
        {
          return simulate_wifi(events, session_end_s, c, profile);
        }
      else if constexpr (std::is_same_v<T, HspaRrcConfig>)
        {
          return simulate_hspa(events, session_end_s, c, profile);
        }
      else
        {
          return simulate_lte(events, session_end_s, c, profile);
        }
    },
    cfg);
}

void
write_radio_timeline_csv(std::ostream& out, const RadioTimeline& timeline)
{
  out << "t_start_s,t_end_s,state,current_mA\n";
  for (const auto& iv : timeline.intervals())
    {
      out << fmt::format("{},{},{},{}\n", iv.t_start_s, iv.t_end_s, to_string(iv.state), iv.current_mA);
    }
}

double
promotion_latency(Technology tech)
{
  switch (tech)
    {
    case Technology::Wifi:
      return 0.0;
    case Technology::Hspa:
      return 2.0;
    case Technology::Lte:
      return 0.12;
    }
  throw ConfigError("radio.tech", "unknown technology");
}

double
promotion_latency(const RadioConfig& cfg)
{
  if (const auto* h = std::get_if<HspaRrcConfig>(&cfg))
    {
      return h->promotion_latency_s;
    }
  if (const auto* l = std::get_if<LteDrxConfig>(&cfg))
    {
      return l->promotion_latency_ms / 1000.0;
    }
  return 0.0;
}

} // namespace streamsim
