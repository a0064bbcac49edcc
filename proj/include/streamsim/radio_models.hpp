#pragma once

#include "streamsim/events.hpp"

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace streamsim {

enum class Technology : std::uint8_t
{
  Wifi,
  Hspa,
  Lte,
};

std::string_view to_string(Technology tech);
Technology parse_technology(std::string_view text);

/// 802.11 PSM-adaptive parameters.
struct WifiPsmConfig
{
  double listen_interval_ms = 100.0;
  double tail_ms = 200.0;
  bool sleep_current_applies = true;
  // Per-beacon wake charged at idle-tail current.
  double beacon_wake_ms = 2.0;
  // Airtime attributed to an isolated packet.
  double packet_active_ms = 1.0;
  // Packets closer than this belong to one burst and keep the radio active.
  double burst_gap_ms = 20.0;

  void validate() const;
};

enum class DormancyTarget : std::uint8_t
{
  CellPch,
  Idle,
};

/// WCDMA/HSPA RRC timers. All times in seconds.
struct HspaRrcConfig
{
  double t1_s = 8.0;     // DCH -> FACH
  double t2_s = 3.0;     // FACH -> PCH
  double t3_s = 1740.0;  // PCH -> IDLE
  bool fast_dormancy = true;
  double fd_timer_s = 5.0;
  DormancyTarget fd_target = DormancyTarget::CellPch;
  double promotion_latency_s = 2.0;       // IDLE/PCH -> DCH
  double fach_promotion_latency_s = 0.0;  // FACH -> DCH
  // Packets below this size are served in FACH without promotion.
  std::int64_t fach_max_bytes = 1000;

  void validate() const;
};

/// LTE RRC with connected-mode DRX. Note the unit split: RRC in seconds, DRX
/// in milliseconds.
struct LteDrxConfig
{
  double rrc_idle_s = 10.0;
  double drx_inactivity_ms = 200.0;
  double drx_cycle_ms = 80.0;
  double drx_on_ms = 10.0;
  double promotion_latency_ms = 120.0;
  bool drx_enabled = true;

  void validate() const;
};

using RadioConfig = std::variant<WifiPsmConfig, HspaRrcConfig, LteDrxConfig>;

Technology technology_of(const RadioConfig& cfg);

/// Per-device current draws (mA) plus device quirks.
struct PowerProfile
{
  std::string device;

  double wifi_active = 0.0;
  double wifi_idle_tail = 0.0;
  double wifi_sleep = 0.0;

  double hspa_dch = 0.0;
  double hspa_fach = 0.0;
  double hspa_pch = 0.0;
  double hspa_idle = 0.0;

  double lte_rx = 0.0;
  double lte_drx_on = 0.0;
  double lte_drx_sleep = 0.0;
  double lte_idle = 0.0;

  double playback_mA = 0.0;
  double nominal_voltage_V = 3.8;
  // Time the modem actually stays awake per DRX on-period.
  double drx_on_overstay_ms = 10.0;

  void validate() const;
  void validate_against(const LteDrxConfig& cfg) const;
};

enum class RadioState : std::uint8_t
{
  WifiActive,
  WifiTail,
  WifiSleep,
  WifiBeacon,
  HspaDch,
  HspaFach,
  HspaPch,
  HspaIdle,
  LteConnected,
  LteDrxOn,
  LteDrxSleep,
  LteIdle,
};

std::string_view to_string(RadioState state);
RadioState parse_radio_state(std::string_view text);
Technology technology_of(RadioState state);
double current_of(RadioState state, const PowerProfile& profile);

struct RadioInterval
{
  RadioState state = RadioState::WifiSleep;
  double t_start_s = 0.0;
  double t_end_s = 0.0;
  double current_mA = 0.0;

  double duration() const { return t_end_s - t_start_s; }
};

/// Contiguous, non-overlapping state intervals covering [0, end_time()].
class RadioTimeline
{
public:
  RadioTimeline() = default;
  explicit RadioTimeline(Technology tech) : tech_(tech) {}

  Technology technology() const { return tech_; }
  const std::vector<RadioInterval>& intervals() const { return intervals_; }
  bool empty() const { return intervals_.empty(); }
  double end_time() const { return intervals_.empty() ? 0.0 : intervals_.back().t_end_s; }

  /// Appends [start, end) in `state`. Zero-length spans are dropped and
  /// same-state neighbours merged. `start` must equal end_time().
  void append(RadioState state, double start, double end, double current_mA);

  /// Seconds spent per state label.
  std::map<std::string, double> residency() const;

  /// Throws InvariantError unless intervals tile [0, end_s] exactly.
  void require_coverage(double end_s) const;

private:
  Technology tech_ = Technology::Wifi;
  std::vector<RadioInterval> intervals_;
};

RadioTimeline simulate_wifi(std::span<const PacketEvent> events,
                            double session_end_s,
                            const WifiPsmConfig& cfg,
                            const PowerProfile& profile);

RadioTimeline simulate_hspa(std::span<const PacketEvent> events,
                            double session_end_s,
                            const HspaRrcConfig& cfg,
                            const PowerProfile& profile);

RadioTimeline simulate_lte(std::span<const PacketEvent> events,
                           double session_end_s,
                           const LteDrxConfig& cfg,
                           const PowerProfile& profile);

RadioTimeline simulate_radio(std::span<const PacketEvent> events,
                             double session_end_s,
                             const RadioConfig& cfg,
                             const PowerProfile& profile);

/// CSV with header `t_start_s,t_end_s,state,current_mA`.
void write_radio_timeline_csv(std::ostream& out, const RadioTimeline& timeline);

/// Default wake-up latency to the data-carrying state, in seconds.
double promotion_latency(Technology tech);
double promotion_latency(const RadioConfig& cfg);

} // namespace streamsim
