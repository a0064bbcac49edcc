#pragma once

#include "streamsim/events.hpp"
#include "streamsim/media.hpp"
#include "streamsim/playback.hpp"
#include "streamsim/techniques.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace streamsim {

struct SessionOptions
{
  std::optional<double> abandon_at_s;
  double start_threshold_s = kDefaultStartThresholdS;
  double resume_threshold_s = kDefaultResumeThresholdS;
  std::uint64_t seed = 1;
  // Radio wake-up before the first byte can flow on the first connection.
  double access_latency_s = 0.0;
  double dt_s = 0.01;
};

/// Time-stamped delivery milestone: connection_open, connection_close,
/// on_start, off_start, keepalive, keyframe_waste, quality_switch,
/// quality_discard, playback_start, stall_start, stall_end.
struct DeliveryLogEntry
{
  double t_s = 0.0;
  std::string event;
  int connection_id = 0;
  std::int64_t bytes = 0;
  double buffer_s_after = 0.0;
};

struct DeliveryLog
{
  std::vector<DeliveryLogEntry> entries;
  std::int64_t bytes_delivered = 0;
  // Bytes thrown away by the client: keyframe re-requests and quality
  // switch discards.
  std::int64_t bytes_discarded = 0;
  std::int64_t bytes_consumed = 0;
  std::int64_t bytes_buffered_end = 0;
  int connections = 0;

  std::vector<const DeliveryLogEntry*> find(std::string_view event) const;
};

void write_delivery_log_csv(std::ostream& out, const DeliveryLog& log);

struct SessionResult
{
  std::vector<PacketEvent> events;
  DeliveryLog log;
  BufferTimeline buffer;
  QoeReport qoe;
  double wall_time_s = 0.0;
  // Hit the wall-time guard before playback ended.
  bool truncated = false;
};

/// Co-simulates server policy, link and client buffer on a fixed time step.
/// Data sent during [t, t+dt) is stamped t+dt. Events are returned in
/// canonical order. Throws InvariantError on a byte conservation breach.
SessionResult simulate_session(const StreamSpec& stream,
                               const LinkModel& link,
                               const Technique& tech,
                               const SessionOptions& options = {});

/// Keyframe-waste run: throttled delivery into a player that drops the
/// connection whenever `buffer_bytes` are buffered. Requires the stream's
/// keyframe interval. A new connection opens once `reopen_free_bytes`
/// (default: one keyframe interval) of buffer space is free.
DeliveryLog gen_multi_connection_waste(const StreamSpec& stream,
                                       std::int64_t buffer_bytes,
                                       const LinkModel& link,
                                       std::optional<std::int64_t> reopen_free_bytes = std::nullopt,
                                       double throttle_factor = 2.0,
                                       const SessionOptions& options = {});

} // namespace streamsim
