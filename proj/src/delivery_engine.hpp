#pragma once

// Internal: fixed-step co-simulation kernel shared by the delivery policies.

#include "streamsim/delivery_sim.hpp"

#include <map>
#include <memory>

namespace streamsim::detail {

inline constexpr std::int64_t kRequestBytes = 500;
inline constexpr std::int64_t kAckBytes = 40;
inline constexpr std::int64_t kProbeBytes = 41;

class Engine;

class Policy
{
public:
  virtual ~Policy() = default;
  /// Called once per tick at engine.now(), before playback advances.
  virtual void step(Engine& e) = 0;
};

std::unique_ptr<Policy> make_policy(const Technique& tech, const Engine& e);

class Engine
{
public:
  Engine(const StreamSpec& stream, const LinkModel& link, const SessionOptions& options);

  double now() const { return now_; }
  double dt() const { return opt_.dt_s; }
  const StreamSpec& stream() const { return stream_; }
  const LinkModel& link() const { return link_; }
  const SessionOptions& options() const { return opt_; }
  const Player& player() const { return player_; }

  /// Opens a connection and emits its request. Data may flow one RTT later
  /// (plus the access latency on the very first connection).
  int open();
  /// Another request on an open connection; returns when its data may flow.
  double request(int conn);
  void close(int conn);
  bool is_open(int conn) const;
  bool ready(int conn) const;
  void set_ready_at(int conn, double t);
  void control(int conn, EventKind kind, std::int64_t bytes);

  /// Link bytes still unused in this tick.
  std::int64_t budget() const { return budget_; }
  std::int64_t take(std::int64_t want);

  /// Next `bytes` of the single-quality stream, arriving at now + dt.
  void deliver_stream(int conn, std::int64_t bytes);
  void deliver_video(int conn, std::int64_t bytes, double c0, double c1);
  void deliver_audio(int conn, std::int64_t bytes, double c0, double c1);
  /// Stream bytes delivered so far, including this tick's pending ones.
  std::int64_t stream_offset() const { return stream_offset_; }
  std::int64_t stream_remaining() const { return stream_.size_bytes() - stream_offset_; }

  /// Drops the last `bytes` of buffered stream content and moves the stream
  /// offset back so they are fetched again. Returns bytes dropped.
  std::int64_t rewind_stream(std::int64_t bytes);
  /// Drops buffered video after content position `c`; returns bytes.
  std::int64_t discard_video_after(double c);

  void note(std::string event, int conn, std::int64_t bytes = 0);

  SessionResult run(Policy& policy);

private:
  struct Pending
  {
    int conn;
    std::int64_t bytes;
    bool audio;
    double c0;
    double c1;
  };
  struct Conn
  {
    bool open = true;
    double ready_at = 0.0;
  };

  void emit(double t, int conn, EventKind kind, std::int64_t bytes);
  void flush_pending(double t);

  const StreamSpec& stream_;
  const LinkModel& link_;
  SessionOptions opt_;
  Player player_;
  double now_ = 0.0;
  double budget_carry_ = 0.0;
  std::int64_t budget_ = 0;
  std::int64_t stream_offset_ = 0;
  double discarded_ = 0.0;
  std::int64_t delivered_ = 0;
  std::map<int, Conn> conns_;
  int next_conn_ = 1;
  std::vector<Pending> pending_;
  std::vector<PacketEvent> events_;
  DeliveryLog log_;
};

/// Bytes a rate cap allows this tick, with fractional carry.
class RateCap
{
public:
  std::int64_t allow(double rate_bps, double dt);
  void reset() { carry_ = 0.0; }

private:
  double carry_ = 0.0;
};

} // namespace streamsim::detail
