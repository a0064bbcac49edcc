#include "delivery_engine.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace streamsim::detail {

namespace {

PlayerConfig
player_config(const StreamSpec& stream, const SessionOptions& opt)
{
  PlayerConfig cfg;
  cfg.duration_s = stream.duration_s();
  cfg.start_threshold_s = opt.start_threshold_s;
  cfg.resume_threshold_s = opt.resume_threshold_s;
  cfg.abandon_at_s = opt.abandon_at_s;
  return cfg;
}

} // namespace

std::int64_t
RateCap::allow(double rate_bps, double dt)
{
  const double raw = rate_bps * dt / 8.0 + carry_;
  const auto whole = static_cast<std::int64_t>(std::floor(raw));
  carry_ = raw - static_cast<double>(whole);
  return whole;
}

Engine::Engine(const StreamSpec& stream, const LinkModel& link, const SessionOptions& options)
  : stream_(stream), link_(link), opt_(options), player_(player_config(stream, options))
{
  if (!(opt_.dt_s > 0.0))
    {
      throw ConfigError("session.dt_s", "must be > 0");
    }
  if (opt_.access_latency_s < 0.0)
    {
      throw ConfigError("session.access_latency_s", "must be >= 0");
    }
}

void
Engine::emit(double t, int conn, EventKind kind, std::int64_t bytes)
{
  events_.push_back({t, bytes, conn, kind});
}

int
Engine::open()
{
  const int id = next_conn_++;
  double ready = now_ + link_.rtt_s();
  if (id == 1)
    {
      ready += opt_.access_latency_s;
    }
  conns_[id] = Conn{true, ready};
  emit(now_, id, EventKind::Request, kRequestBytes);
  ++log_.connections;
  note("connection_open", id);
  return id;
}

double
Engine::request(int conn)
{
  auto& c = conns_.at(conn);
  c.ready_at = std::max(c.ready_at, now_ + link_.rtt_s());
  emit(now_, conn, EventKind::Request, kRequestBytes);
  return c.ready_at;
}

void
Engine::close(int conn)
{
  auto it = conns_.find(conn);
  if (it == conns_.end() || !it->second.open)
    {
      return;
    }
  it->second.open = false;
  emit(now_, conn, EventKind::FlowControl, kAckBytes);
  note("connection_close", conn);
}

bool
Engine::is_open(int conn) const
{
  auto it = conns_.find(conn);
  return it != conns_.end() && it->second.open;
}

bool
Engine::ready(int conn) const
{
  auto it = conns_.find(conn);
  return it != conns_.end() && it->second.open && now_ >= it->second.ready_at - 1e-9;
}

void
Engine::set_ready_at(int conn, double t)
{
  conns_.at(conn).ready_at = t;
}

void
Engine::control(int conn, EventKind kind, std::int64_t bytes)
{
  if (kind == EventKind::Data || bytes > kMaxControlBytes)
    {
      throw InvariantError(fmt::format("control event of {} bytes exceeds the control limit", bytes));
    }
  emit(now_, conn, kind, bytes);
}

std::int64_t
Engine::take(std::int64_t want)
{
  const auto got = std::clamp<std::int64_t>(want, 0, budget_);
  budget_ -= got;
  return got;
}

void
Engine::deliver_stream(int conn, std::int64_t bytes)
{
  if (bytes <= 0)
    {
      return;
    }
  const double c0 = stream_.content_at(static_cast<double>(stream_offset_));
  stream_offset_ += bytes;
  const double c1 = stream_.content_at(static_cast<double>(stream_offset_));
  pending_.push_back({conn, bytes, false, c0, c1});
}

void
Engine::deliver_video(int conn, std::int64_t bytes, double c0, double c1)
{
  if (bytes > 0)
    {
      pending_.push_back({conn, bytes, false, c0, c1});
    }
}

void
Engine::deliver_audio(int conn, std::int64_t bytes, double c0, double c1)
{
  if (bytes > 0)
    {
      pending_.push_back({conn, bytes, true, c0, c1});
    }
}

std::int64_t
Engine::rewind_stream(std::int64_t bytes)
{
  const auto removed = static_cast<std::int64_t>(std::llround(player_.discard_video_tail_bytes(static_cast<double>(bytes))));
  stream_offset_ -= removed;
  discarded_ += removed;
  return removed;
}

std::int64_t
Engine::discard_video_after(double c)
{
  const double removed = player_.discard_video_after(c);
  discarded_ += removed;
  return static_cast<std::int64_t>(std::llround(removed));
}

void
Engine::note(std::string event, int conn, std::int64_t bytes)
{
  log_.entries.push_back({now_, std::move(event), conn, bytes, player_.buffered_s()});
}

void
Engine::flush_pending(double t)
{
  // One data event per connection per tick.
  std::map<int, std::int64_t> per_conn;
  for (const auto& p : pending_)
    {
      if (p.audio)
        {
          player_.add_audio(p.c0, p.c1, static_cast<double>(p.bytes));
        }
      else
        {
          player_.add_video(p.c0, p.c1, static_cast<double>(p.bytes));
        }
      per_conn[p.conn] += p.bytes;
      delivered_ += p.bytes;
    }
  for (const auto& [conn, bytes] : per_conn)
    {
      emit(t, conn, EventKind::Data, bytes);
    }
  pending_.clear();
}

SessionResult
Engine::run(Policy& policy)
{
  SessionResult res;
  const double dt = opt_.dt_s;
  const double max_wall = 10.0 * stream_.duration_s() + 600.0;

  if (opt_.abandon_at_s && *opt_.abandon_at_s <= 0.0)
    {
      player_.abandon(0.0);
    }

  double end = 0.0;
  for (std::int64_t k = 0; !player_.done(); ++k)
    {
      now_ = static_cast<double>(k) * dt;
      const double next = static_cast<double>(k + 1) * dt;
      if (now_ >= max_wall)
        {
          spdlog::warn("session hit the {:.0f} s wall-time guard before playback ended", max_wall);
          res.truncated = true;
          end = now_;
          break;
        }
      const double raw = link_.bits_between(now_, next) / 8.0 + budget_carry_;
      budget_ = static_cast<std::int64_t>(std::floor(raw));
      budget_carry_ = raw - std::floor(raw);

      policy.step(*this);

      const auto before = player_.state();
      player_.advance(now_, next);
      if (player_.done())
        {
          pending_.clear();
          break;
        }
      if (player_.state() == PlayState::Stalled && before == PlayState::Playing)
        {
          note("stall_start", 0);
        }
      flush_pending(next);
      const auto pre_settle = player_.state();
      player_.settle(next);
      if (pre_settle != player_.state())
        {
          const double saved = now_;
          now_ = next;
          if (pre_settle == PlayState::Waiting)
            {
              note("playback_start", 0);
            }
          else if (pre_settle == PlayState::Stalled)
            {
              note("stall_end", 0);
            }
          now_ = saved;
        }
      end = next;
    }
  if (player_.done())
    {
      end = player_.end_time_s();
    }

  std::stable_sort(events_.begin(), events_.end(), event_before);
  std::erase_if(events_, [end](const PacketEvent& ev) { return ev.t_s > end + 1e-9; });

  const double consumed = player_.consumed_bytes();
  const double buffered = player_.buffered_bytes();
  const double balance = static_cast<double>(delivered_) - consumed - buffered - discarded_;
  if (std::abs(balance) > 1.0 + 1e-9 * static_cast<double>(delivered_))
    {
      throw InvariantError(fmt::format("byte conservation breached: delivered {} != consumed {:.1f} + buffered {:.1f} "
                                       "+ discarded {:.1f}",
                                       delivered_, consumed, buffered, discarded_));
    }

  log_.bytes_delivered = delivered_;
  log_.bytes_discarded = static_cast<std::int64_t>(std::llround(discarded_));
  log_.bytes_consumed = static_cast<std::int64_t>(std::llround(consumed));
  log_.bytes_buffered_end = delivered_ - log_.bytes_consumed - log_.bytes_discarded;

  res.events = std::move(events_);
  res.log = std::move(log_);
  res.buffer = player_.timeline(end);
  res.qoe = player_.qoe(end);
  res.wall_time_s = end;
  return res;
}

} // namespace streamsim::detail
