#pragma once

#include "streamsim/events.hpp"
#include "streamsim/media.hpp"
#include "streamsim/radio_models.hpp"
#include "streamsim/techniques.hpp"

#include <deque>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace streamsim {

inline constexpr double kDefaultStartThresholdS = 4.0;
inline constexpr double kDefaultResumeThresholdS = 4.0;

/// Contiguous run of content [start_s, end_s) holding `bytes` bytes, spread
/// linearly over the run.
struct BufferPiece
{
  double start_s = 0.0;
  double end_s = 0.0;
  double bytes = 0.0;
};

/// Ordered pieces of one media track waiting to be played.
class PlaybackBuffer
{
public:
  void push(const BufferPiece& piece);
  /// Drops content before `content_s`; returns the bytes removed.
  double consume_until(double content_s);
  /// Drops content after `content_s`; returns the bytes removed.
  double discard_after(double content_s);
  /// Drops the last `bytes` bytes (or everything); returns bytes removed.
  double discard_tail_bytes(double bytes);

  bool empty() const { return pieces_.empty(); }
  double bytes() const { return bytes_; }
  double seconds() const;
  /// End of the last buffered piece, or `fallback` when empty.
  double frontier_s(double fallback) const { return pieces_.empty() ? fallback : pieces_.back().end_s; }
  const std::deque<BufferPiece>& pieces() const { return pieces_; }

private:
  std::deque<BufferPiece> pieces_;
  double bytes_ = 0.0;
};

struct BufferSample
{
  double t_s = 0.0;
  double buffered_seconds = 0.0;
  double buffered_bytes = 0.0;
  double playhead_s = 0.0;
};

struct BufferTimeline
{
  std::vector<BufferSample> samples;
  double duration_s = 0.0;
  double joining_time_s = 0.0;
  double end_s = 0.0;

  /// Linear lookup of the last sample at or before t (first sample if none).
  const BufferSample& at(double t_s) const;
};

void write_buffer_csv(std::ostream& out, const BufferTimeline& timeline);

struct Stall
{
  double t_start_s = 0.0;
  double duration_s = 0.0;
};

struct QoeReport
{
  double joining_time_s = 0.0;
  std::vector<Stall> stalls;
  double stall_total_s = 0.0;
  // Total stall time over content duration.
  double stall_ratio = 0.0;
};

struct PlayerConfig
{
  double duration_s = 0.0;
  double start_threshold_s = kDefaultStartThresholdS;
  double resume_threshold_s = kDefaultResumeThresholdS;
  std::optional<double> abandon_at_s;
  // Start playback at this wall time regardless of buffer level.
  std::optional<double> forced_start_s;
};

enum class PlayState : std::uint8_t
{
  Waiting,
  Playing,
  Stalled,
  Finished,
  Abandoned,
};

/// Client player: a video track that gates playback and an optional audio
/// track that is consumed alongside it. Callers alternate advance() over a
/// wall-time span with arrivals and a settle() at the span end.
class Player
{
public:
  explicit Player(PlayerConfig cfg);

  void add_video(double start_s, double end_s, double bytes);
  void add_audio(double start_s, double end_s, double bytes);
  double discard_video_after(double content_s);
  double discard_video_tail_bytes(double bytes);

  /// Plays from t0 to t1 (or until the buffer empties or playback ends).
  void advance(double t0, double t1);
  /// Applies start/resume rules at t and records a sample.
  void settle(double t);
  /// Ends the session at t without playing further (e.g. abandonment at 0).
  void abandon(double t);

  PlayState state() const { return state_; }
  bool done() const { return state_ == PlayState::Finished || state_ == PlayState::Abandoned; }
  double playhead_s() const { return playhead_; }
  double buffered_s() const { return video_.seconds(); }
  double buffered_bytes() const { return video_.bytes() + audio_.bytes(); }
  double video_frontier_s() const { return video_.frontier_s(playhead_); }
  double consumed_bytes() const { return consumed_; }
  double end_time_s() const { return end_time_; }
  std::optional<double> joining_time_s() const { return join_; }
  const std::vector<Stall>& stalls() const { return stalls_; }
  const PlayerConfig& config() const { return cfg_; }

  /// Closes an open stall at `end_s` and returns the timeline and QoE.
  BufferTimeline timeline(double end_s) const;
  QoeReport qoe(double end_s) const;

private:
  void record(double t);
  void open_stall(double t);
  bool content_complete() const;

  PlayerConfig cfg_;
  PlaybackBuffer video_;
  PlaybackBuffer audio_;
  PlayState state_ = PlayState::Waiting;
  double playhead_ = 0.0;
  double consumed_ = 0.0;
  double end_time_ = 0.0;
  std::optional<double> join_;
  std::optional<double> stall_start_;
  std::vector<Stall> stalls_;
  std::vector<BufferSample> samples_;
};

/// Replays data arrivals against consumption that starts at `joining_time_s`.
/// Buffered content is the cumulative arrivals minus cumulative consumption.
BufferTimeline compute_buffer(std::span<const PacketEvent> arrivals,
                              const StreamSpec& stream,
                              double joining_time_s,
                              double resume_threshold_s = kDefaultResumeThresholdS);

/// Closed-form join: promotion + one RTT for the request + time to fetch
/// `start_threshold_s` of content at the fast-start rate. Infinity when the
/// link never delivers it.
double joining_time(const Technique& tech,
                    const StreamSpec& stream,
                    const LinkModel& link,
                    Technology radio_tech,
                    double start_threshold_s = kDefaultStartThresholdS,
                    std::optional<double> promotion_latency_s = std::nullopt);

QoeReport detect_stalls(const BufferTimeline& buffer, double resume_threshold_s = kDefaultResumeThresholdS);

} // namespace streamsim
