#pragma once

#include "streamsim/events.hpp"
#include "streamsim/playback.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace streamsim {

enum class Direction : std::uint8_t
{
  Down,
  Up,
};

/// One row of a flow summary. `flags` is "-" for payload, "req" for a
/// request, "fc" for a flow-control segment and "probe" for a zero-window
/// probe.
struct FlowRecord
{
  double t_s = 0.0;
  std::int64_t bytes = 0;
  int connection_id = 0;
  Direction direction = Direction::Down;
  std::string flags = "-";

  friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

std::vector<FlowRecord> to_flow_records(std::span<const PacketEvent> events);
std::vector<PacketEvent> to_packet_events(std::span<const FlowRecord> records);

/// Parses CSV with header `t_s,bytes,connection_id,direction,flags`. Rows are
/// sorted by time (stable) with a warning if they were not. Throws ConfigError
/// whose field is "line N" for a malformed row.
std::vector<FlowRecord> ingest(std::istream& in);
std::vector<FlowRecord> ingest(const std::filesystem::path& path);

void write_flow_csv(std::ostream& out, std::span<const FlowRecord> records);

struct ClassifierConfig
{
  // Idle time between payload rows that counts as an OFF period.
  double gap_s = 5.0;
  // Payload rows closer than this belong to the same burst.
  double burst_gap_s = 0.05;
  // Coefficient of variation below which burst spacing counts as periodic.
  double periodic_cv = 0.3;
  int min_bursts = 10;
  // Mean over peak 1 s rate above which a single download counts as flat out.
  double sustained_ratio = 0.8;
  int min_requests = 10;
  double requests_per_connection = 3.0;
};

struct Classification
{
  // encoding_rate, throttling, on_off_s, on_off_m, fast_caching or rate_adaptive
  std::string technique;
  double confidence = 0.0;
  std::vector<std::string> rules_fired;
  std::optional<double> chunk_period_s;
  std::vector<double> off_durations_s;
  std::optional<double> median_off_s;
  int connection_count = 0;
  std::optional<double> estimated_factor;
  std::optional<double> request_interval_s;
  double mean_rate_bps = 0.0;
  double peak_rate_bps = 0.0;
};

/// Throws ConfigError when the records span less than 10 s. `encoding_rate_bps`
/// enables the throttle-factor estimate and the encoding-rate plausibility check.
Classification classify(std::span<const FlowRecord> records,
                        std::optional<double> encoding_rate_bps = std::nullopt,
                        const ClassifierConfig& cfg = {});

nlohmann::json to_json(const Classification& c);

/// Buffer occupancy implied by the downstream payload at constant rate
/// `encoding_rate_bps`, with playback starting once the default start
/// threshold worth of content has arrived.
BufferTimeline estimate_buffer(std::span<const FlowRecord> records, double encoding_rate_bps);

} // namespace streamsim
