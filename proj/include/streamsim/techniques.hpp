#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace streamsim {

/// Server fast-caches into a small client buffer; receive-window backpressure
/// clocks delivery to the consumption rate once the buffer is full.
struct EncodingRate
{
  double faststart_target_s = 40.0;
};

/// Server paces content at factor x encoding rate in fixed-size chunks after a
/// fast start. With `player_buffer_bytes` set, the player closes the
/// connection whenever its buffer is full and re-requests from the start of
/// the partially received keyframe.
struct Throttling
{
  double factor = 1.25;
  std::int64_t chunk_bytes = 64 * 1024;
  double faststart_target_s = 40.0;
  // Uniform +/-50% chunk size jitter (seeded).
  bool chunk_jitter = false;
  std::optional<std::int64_t> player_buffer_bytes;
  // Free space needed before reconnecting; defaults to one keyframe interval.
  std::optional<std::int64_t> reopen_free_bytes;
};

/// Buffer-adaptive ON-OFF over one persistent connection. OFF periods stall
/// the receive window; the server probes with a doubling persist timer.
struct OnOffS
{
  std::int64_t upper_bytes = 20'000'000;
  double lower_s = 2.0;
  double keepalive_interval_s = 16.0;  // 0 disables keepalive reads
  std::int64_t keepalive_bytes = 64 * 1024;
  double persist_cap_s = 5.0;
  double persist_initial_s = 1.0;
  std::optional<double> off_fixed_s;
  // Content required before the first OFF may start.
  double faststart_target_s = 40.0;
};

/// Buffer-adaptive ON-OFF over a fresh connection per ON period.
struct OnOffM
{
  double upper_s = 100.0;
  double lower_s = 40.0;
  std::optional<double> off_fixed_s;
  // Chunk mode: first connection fetches `faststart_bytes`, later ones
  // `chunk_bytes` each, reconnecting once a chunk's worth has been played.
  std::optional<std::int64_t> chunk_bytes;
  std::int64_t faststart_bytes = 30'000'000;
  // Server throttle applied during ON periods after the fast start.
  std::optional<double> rate_factor;
  double faststart_target_s = 40.0;
};

/// Whole content at full available bandwidth.
struct FastCaching
{
};

struct Rung
{
  std::string quality;
  double rate_bps = 0.0;
};

/// HTTP Live Streaming style segment fetching.
struct Hls
{
  double chunk_s = 10.0;
  int initial_chunks = 7;
  std::vector<Rung> ladder;
  std::size_t start_rung = 0;
  bool discard_on_upswitch = true;
  bool audio_video_split = false;
  double av_offset_s = 5.0;
  double audio_rate_bps = 128'000.0;
  // Consecutive chunk measurements needed before switching.
  int switch_chunks = 3;
};

/// Smooth Streaming style: short video chunks, audio every N video chunks,
/// one connection.
struct Mss
{
  double video_chunk_s = 4.0;
  int audio_every_n_video_chunks = 4;
  double startup_buffer_s = 60.0;
  std::vector<Rung> ladder;
  double audio_rate_bps = 128'000.0;
  int switch_chunks = 3;
};

using Technique = std::variant<EncodingRate, Throttling, OnOffS, OnOffM, FastCaching, Hls, Mss>;

/// Scenario-file spelling: encoding_rate, throttling, on_off_s, on_off_m,
/// fast_caching, hls, mss.
std::string_view technique_name(const Technique& tech);

/// Traffic class as inferred from traces; hls and mss map to rate_adaptive.
std::string_view technique_class(const Technique& tech);

/// Throws ConfigError naming the offending `technique.*` field.
void validate(const Technique& tech);

} // namespace streamsim
