#include "streamsim/playback.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace streamsim {

namespace {

constexpr double kEps = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace

void
PlaybackBuffer::push(const BufferPiece& piece)
{
  if (piece.end_s < piece.start_s || piece.bytes < 0.0)
    {
      throw InvariantError(fmt::format("malformed buffer piece [{}, {}) {} B", piece.start_s, piece.end_s, piece.bytes));
    }
  if (piece.end_s - piece.start_s <= 0.0 && piece.bytes <= 0.0)
    {
      return;
    }
  bytes_ += piece.bytes;
  if (!pieces_.empty())
    {
      // extend the last piece when contiguous at the same byte density
      auto& last = pieces_.back();
      const double a = last.end_s - last.start_s;
      const double b = piece.end_s - piece.start_s;
      if (std::abs(piece.start_s - last.end_s) <= 1e-9 && a > 0.0 && b > 0.0
          && std::abs(last.bytes * b - piece.bytes * a) <= 1e-9 * std::max(last.bytes * b, piece.bytes * a))
        {
          last.end_s = piece.end_s;
          last.bytes += piece.bytes;
          return;
        }
    }
  pieces_.push_back(piece);
}

double
PlaybackBuffer::consume_until(double content_s)
{
  double removed = 0.0;
  while (!pieces_.empty())
    {
      auto& p = pieces_.front();
      if (p.end_s <= content_s + kEps)
        {
          removed += p.bytes;
          pieces_.pop_front();
          continue;
        }
      if (p.start_s < content_s)
        {
          const double frac = (content_s - p.start_s) / (p.end_s - p.start_s);
          const double b = p.bytes * frac;
          p.bytes -= b;
          p.start_s = content_s;
          removed += b;
        }
      break;
    }
  bytes_ -= removed;
  if (pieces_.empty())
    {
      bytes_ = 0.0;
    }
  return removed;
}

double
PlaybackBuffer::discard_after(double content_s)
{
  double removed = 0.0;
  while (!pieces_.empty())
    {
      auto& p = pieces_.back();
      if (p.start_s >= content_s - kEps)
        {
          removed += p.bytes;
          pieces_.pop_back();
          continue;
        }
      if (p.end_s > content_s)
        {
          const double frac = (p.end_s - content_s) / (p.end_s - p.start_s);
          const double b = p.bytes * frac;
          p.bytes -= b;
          p.end_s = content_s;
          removed += b;
        }
      break;
    }
  bytes_ -= removed;
  if (pieces_.empty())
    {
      bytes_ = 0.0;
    }
  return removed;
}

double
PlaybackBuffer::discard_tail_bytes(double bytes)
{
  double removed = 0.0;
  while (!pieces_.empty() && removed < bytes)
    {
      auto& p = pieces_.back();
      const double want = bytes - removed;
      if (p.bytes <= want + kEps)
        {
          removed += p.bytes;
          pieces_.pop_back();
          continue;
        }
      const double span = p.end_s - p.start_s;
      p.end_s -= span * (want / p.bytes);
      p.bytes -= want;
      removed += want;
    }
  bytes_ -= removed;
  if (pieces_.empty())
    {
      bytes_ = 0.0;
    }
  return removed;
}

double
PlaybackBuffer::seconds() const
{
  double s = 0.0;
  for (const auto& p : pieces_)
    {
      s += p.end_s - p.start_s;
    }
  return s;
}

const BufferSample&
BufferTimeline::at(double t_s) const
{
  if (samples.empty())
    {
      throw InvariantError("empty buffer timeline");
    }
  auto it = std::upper_bound(samples.begin(), samples.end(), t_s,
                             [](double t, const BufferSample& s) { return t < s.t_s; });
  return it == samples.begin() ? samples.front() : *std::prev(it);
}

void
write_buffer_csv(std::ostream& out, const BufferTimeline& timeline)
{
  out << "t_s,buffered_seconds,buffered_bytes\n";
  for (const auto& s : timeline.samples)
    {
      out << fmt::format("{:.3f},{:.3f},{:.0f}\n", s.t_s, s.buffered_seconds, s.buffered_bytes);
    }
}

Player::Player(PlayerConfig cfg) : cfg_(cfg)
{
  if (!(cfg_.duration_s > 0.0))
    {
      throw ConfigError("stream.duration_s", "must be > 0");
    }
  if (cfg_.start_threshold_s < 0.0)
    {
      throw ConfigError("session.start_threshold_s", "must be >= 0");
    }
  if (cfg_.resume_threshold_s < 0.0)
    {
      throw ConfigError("session.resume_threshold_s", "must be >= 0");
    }
  if (cfg_.abandon_at_s && (*cfg_.abandon_at_s < 0.0 || *cfg_.abandon_at_s > cfg_.duration_s + kEps))
    {
      throw ConfigError("session.abandon_at_s", "must lie within [0, duration]");
    }
}

void
Player::add_video(double start_s, double end_s, double bytes)
{
  if (start_s < video_frontier_s() - 1e-6)
    {
      throw InvariantError(fmt::format("video piece at {} overlaps buffered content ending at {}", start_s,
                                       video_frontier_s()));
    }
  video_.push({start_s, end_s, bytes});
}

void
Player::add_audio(double start_s, double end_s, double bytes)
{
  audio_.push({start_s, end_s, bytes});
  if (state_ != PlayState::Waiting)
    {
      consumed_ += audio_.consume_until(playhead_);
    }
}

double
Player::discard_video_after(double content_s)
{
  return video_.discard_after(std::max(content_s, playhead_));
}

double
Player::discard_video_tail_bytes(double bytes)
{
  return video_.discard_tail_bytes(bytes);
}

bool
Player::content_complete() const
{
  return video_frontier_s() >= cfg_.duration_s - kEps;
}

void
Player::record(double t)
{
  samples_.push_back({t, video_.seconds(), buffered_bytes(), playhead_});
}

void
Player::open_stall(double t)
{
  state_ = PlayState::Stalled;
  stall_start_ = t;
  record(t);
}

void
Player::advance(double t0, double t1)
{
  double t = t0;
  while (state_ == PlayState::Playing && t < t1)
    {
      const double avail = video_.seconds();
      const double limit = cfg_.abandon_at_s.value_or(cfg_.duration_s);
      const double step = std::min({t1 - t, avail, limit - playhead_});
      if (step > 0.0)
        {
          playhead_ += step;
          t += step;
          consumed_ += video_.consume_until(playhead_);
          consumed_ += audio_.consume_until(playhead_);
        }
      if (cfg_.abandon_at_s && playhead_ >= *cfg_.abandon_at_s - kEps && *cfg_.abandon_at_s < cfg_.duration_s - kEps)
        {
          state_ = PlayState::Abandoned;
          end_time_ = t;
          record(t);
          return;
        }
      if (playhead_ >= cfg_.duration_s - kEps)
        {
          consumed_ += video_.consume_until(kInf);
          consumed_ += audio_.consume_until(kInf);
          state_ = PlayState::Finished;
          end_time_ = t;
          record(t);
          return;
        }
      if (video_.seconds() <= kEps)
        {
          open_stall(t);
          return;
        }
      if (step <= 0.0)
        {
          break;
        }
    }
}

void
Player::settle(double t)
{
  if (state_ == PlayState::Waiting)
    {
      const bool go = cfg_.forced_start_s ? t >= *cfg_.forced_start_s - kEps
                                          : (video_.seconds() > kEps && video_.seconds() >= cfg_.start_threshold_s - kEps)
                                              || content_complete();
      if (go)
        {
          join_ = cfg_.forced_start_s.value_or(t);
          state_ = PlayState::Playing;
          consumed_ += audio_.consume_until(playhead_);
          if (cfg_.abandon_at_s && *cfg_.abandon_at_s <= kEps)
            {
              state_ = PlayState::Abandoned;
              end_time_ = t;
            }
          else if (video_.seconds() <= kEps)
            {
              open_stall(t);
              return;
            }
        }
    }
  else if (state_ == PlayState::Stalled)
    {
      if (video_.seconds() >= cfg_.resume_threshold_s - kEps || content_complete())
        {
          stalls_.push_back({*stall_start_, t - *stall_start_});
          stall_start_.reset();
          state_ = PlayState::Playing;
        }
    }
  record(t);
}

void
Player::abandon(double t)
{
  state_ = PlayState::Abandoned;
  end_time_ = t;
  record(t);
}

BufferTimeline
Player::timeline(double end_s) const
{
  BufferTimeline tl;
  tl.samples = samples_;
  tl.duration_s = cfg_.duration_s;
  tl.joining_time_s = join_.value_or(kInf);
  tl.end_s = end_s;
  return tl;
}

QoeReport
Player::qoe(double end_s) const
{
  QoeReport q;
  q.joining_time_s = join_.value_or(kInf);
  q.stalls = stalls_;
  if (stall_start_)
    {
      q.stalls.push_back({*stall_start_, std::max(0.0, end_s - *stall_start_)});
    }
  for (const auto& s : q.stalls)
    {
      q.stall_total_s += s.duration_s;
    }
  q.stall_ratio = q.stall_total_s / cfg_.duration_s;
  return q;
}

BufferTimeline
compute_buffer(std::span<const PacketEvent> arrivals,
               const StreamSpec& stream,
               double joining_time_s,
               double resume_threshold_s)
{
  require_sorted(arrivals);
  PlayerConfig cfg;
  cfg.duration_s = stream.duration_s();
  cfg.resume_threshold_s = resume_threshold_s;
  cfg.forced_start_s = joining_time_s;
  Player player(cfg);

  const double size = static_cast<double>(stream.size_bytes());
  double received = 0.0;
  double t = 0.0;
  bool join_pending = std::isfinite(joining_time_s);
  player.settle(0.0);

  auto step_to = [&](double t_next) {
    if (join_pending && joining_time_s <= t_next)
      {
        player.advance(t, joining_time_s);
        t = std::max(t, joining_time_s);
        player.settle(t);
        join_pending = false;
      }
    player.advance(t, t_next);
    t = std::max(t, t_next);
  };

  std::size_t i = 0;
  while (i < arrivals.size() && !player.done())
    {
      const double te = arrivals[i].t_s;
      step_to(te);
      for (; i < arrivals.size() && arrivals[i].t_s == te; ++i)
        {
          if (arrivals[i].kind != EventKind::Data || arrivals[i].bytes <= 0 || received >= size)
            {
              continue;
            }
          const double add = std::min(size - received, static_cast<double>(arrivals[i].bytes));
          const double c0 = stream.content_at(received);
          received += add;
          player.add_video(c0, stream.content_at(received), add);
        }
      player.settle(te);
    }
  if (join_pending)
    {
      step_to(joining_time_s);
    }
  if (!player.done() && player.state() != PlayState::Waiting)
    {
      player.advance(t, kInf);
    }
  double end = player.done() ? player.end_time_s() : t;
  if (std::isfinite(joining_time_s))
    {
      end = std::max(end, player.done() ? end : joining_time_s + stream.duration_s());
    }
  return player.timeline(end);
}

double
joining_time(const Technique& tech,
             const StreamSpec& stream,
             const LinkModel& link,
             Technology radio_tech,
             double start_threshold_s,
             std::optional<double> promotion_latency_s)
{
  double need_bytes = stream.bytes_at(start_threshold_s);
  if (const auto* hls = std::get_if<Hls>(&tech); hls && !hls->ladder.empty())
    {
      const auto rung = std::min(hls->start_rung, hls->ladder.size() - 1);
      need_bytes = std::min(start_threshold_s, stream.duration_s()) * hls->ladder[rung].rate_bps / 8.0;
    }
  else if (const auto* mss = std::get_if<Mss>(&tech); mss && !mss->ladder.empty())
    {
      need_bytes = std::min(start_threshold_s, stream.duration_s()) * mss->ladder.front().rate_bps / 8.0;
    }
  const double t0 = promotion_latency_s.value_or(promotion_latency(radio_tech)) + link.rtt_s();
  return link.time_to_deliver(t0, need_bytes, kInf);
}

QoeReport
detect_stalls(const BufferTimeline& buffer, double resume_threshold_s)
{
  QoeReport q;
  q.joining_time_s = buffer.joining_time_s;
  if (!std::isfinite(buffer.joining_time_s))
    {
      return q;
    }
  std::optional<double> open;
  for (const auto& s : buffer.samples)
    {
      if (s.t_s < buffer.joining_time_s - kEps)
        {
          continue;
        }
      const bool content_left = s.playhead_s < buffer.duration_s - kEps;
      if (!open)
        {
          if (s.buffered_seconds <= kEps && content_left)
            {
              open = s.t_s;
            }
        }
      else if (s.buffered_seconds >= resume_threshold_s - kEps
               || s.playhead_s + s.buffered_seconds >= buffer.duration_s - kEps)
        {
          q.stalls.push_back({*open, s.t_s - *open});
          open.reset();
        }
    }
  if (open)
    {
      q.stalls.push_back({*open, std::max(0.0, buffer.end_s - *open)});
    }
  for (const auto& s : q.stalls)
    {
      q.stall_total_s += s.duration_s;
    }
  q.stall_ratio = q.stall_total_s / buffer.duration_s;
  return q;
}

} // namespace streamsim
