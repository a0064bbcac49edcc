#include "streamsim/media.hpp"

#include "streamsim/events.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace streamsim {

StreamSpec
StreamSpec::cbr(double duration_s, double encoding_rate_bps)
{
  StreamSpec s;
  s.duration_s_ = duration_s;
  s.encoding_rate_bps_ = encoding_rate_bps;
  s.size_bytes_ = static_cast<std::int64_t>(std::llround(duration_s * encoding_rate_bps / 8.0));
  s.validate();
  return s;
}

StreamSpec
StreamSpec::vbr(double duration_s, std::vector<RatePoint> trace, std::optional<std::int64_t> size_bytes)
{
  StreamSpec s;
  s.duration_s_ = duration_s;
  s.vbr_trace_ = std::move(trace);
  if (s.vbr_trace_.empty())
    {
      throw ConfigError("stream.vbr_trace", "must contain at least one point");
    }
  if (s.vbr_trace_.front().t_s != 0.0)
    {
      throw ConfigError("stream.vbr_trace", "first point must start at t=0");
    }
  for (std::size_t i = 0; i < s.vbr_trace_.size(); ++i)
    {
      if (s.vbr_trace_[i].rate_bps < 0.0)
        {
          throw ConfigError("stream.vbr_trace", fmt::format("point {} has a negative rate", i));
        }
      if (i > 0 && s.vbr_trace_[i].t_s <= s.vbr_trace_[i - 1].t_s)
        {
          throw ConfigError("stream.vbr_trace", fmt::format("point {} is not after point {}", i, i - 1));
        }
    }
  s.build_table();
  const double integral = s.cum_bytes_.back();
  s.size_bytes_ = size_bytes.value_or(static_cast<std::int64_t>(std::llround(integral)));
  if (integral <= 0.0)
    {
      throw ConfigError("stream.vbr_trace", "integrates to zero bytes");
    }
  if (std::abs(static_cast<double>(s.size_bytes_) - integral) > 0.01 * integral)
    {
      throw ConfigError("stream.size_bytes",
                        fmt::format("{} differs from the VBR trace integral {:.0f} by more than 1%",
                                    s.size_bytes_, integral));
    }
  s.byte_scale_ = static_cast<double>(s.size_bytes_) / integral;
  s.encoding_rate_bps_ = static_cast<double>(s.size_bytes_) * 8.0 / duration_s;
  s.validate();
  return s;
}

void
StreamSpec::build_table()
{
  cum_t_.clear();
  cum_bytes_.clear();
  double acc = 0.0;
  for (std::size_t i = 0; i < vbr_trace_.size() && vbr_trace_[i].t_s < duration_s_; ++i)
    {
      const double t0 = vbr_trace_[i].t_s;
      const double t1 = i + 1 < vbr_trace_.size() ? std::min(vbr_trace_[i + 1].t_s, duration_s_) : duration_s_;
      cum_t_.push_back(t0);
      cum_bytes_.push_back(acc);
      acc += (t1 - t0) * vbr_trace_[i].rate_bps / 8.0;
    }
  cum_t_.push_back(duration_s_);
  cum_bytes_.push_back(acc);
}

StreamSpec&
StreamSpec::set_keyframe_interval_bytes(std::optional<std::int64_t> bytes)
{
  if (bytes && *bytes <= 0)
    {
      throw ConfigError("stream.keyframe_interval_bytes", "must be > 0");
    }
  keyframe_interval_bytes_ = bytes;
  return *this;
}

double
StreamSpec::bytes_at(double content_s) const
{
  const double c = std::clamp(content_s, 0.0, duration_s_);
  if (!is_vbr())
    {
      return static_cast<double>(size_bytes_) * (c / duration_s_);
    }
  auto it = std::upper_bound(cum_t_.begin(), cum_t_.end(), c);
  const auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - cum_t_.begin()) - 1));
  if (i + 1 >= cum_t_.size())
    {
      return static_cast<double>(size_bytes_);
    }
  const double frac = (c - cum_t_[i]) / (cum_t_[i + 1] - cum_t_[i]);
  return byte_scale_ * (cum_bytes_[i] + frac * (cum_bytes_[i + 1] - cum_bytes_[i]));
}

double
StreamSpec::content_at(double bytes) const
{
  const double size = static_cast<double>(size_bytes_);
  const double b = std::clamp(bytes, 0.0, size);
  if (!is_vbr())
    {
      return duration_s_ * (b / size);
    }
  const double raw = b / byte_scale_;
  auto it = std::lower_bound(cum_bytes_.begin(), cum_bytes_.end(), raw);
  if (it == cum_bytes_.begin())
    {
      return 0.0;
    }
  const auto i = static_cast<std::size_t>(it - cum_bytes_.begin()) - 1;
  const double span = cum_bytes_[i + 1] - cum_bytes_[i];
  const double frac = span > 0.0 ? (raw - cum_bytes_[i]) / span : 0.0;
  return cum_t_[i] + frac * (cum_t_[i + 1] - cum_t_[i]);
}

double
StreamSpec::rate_at(double content_s) const
{
  if (!is_vbr())
    {
      return encoding_rate_bps_;
    }
  auto it = std::upper_bound(vbr_trace_.begin(), vbr_trace_.end(), content_s,
                             [](double t, const RatePoint& p) { return t < p.t_s; });
  return it == vbr_trace_.begin() ? vbr_trace_.front().rate_bps : std::prev(it)->rate_bps * byte_scale_;
}

void
StreamSpec::validate() const
{
  if (!(duration_s_ > 0.0))
    {
      throw ConfigError("stream.duration_s", "must be > 0");
    }
  if (!(encoding_rate_bps_ > 0.0))
    {
      throw ConfigError("stream.encoding_rate_bps", "must be > 0");
    }
  if (size_bytes_ <= 0)
    {
      throw ConfigError("stream.size_bytes", "must be > 0");
    }
}

LinkModel::LinkModel(std::vector<LinkSegment> segments, double rtt_ms)
  : segments_(std::move(segments)), rtt_ms_(rtt_ms)
{
  validate();
}

LinkModel
LinkModel::constant(double bandwidth_bps, double rtt_ms)
{
  return LinkModel({{0.0, bandwidth_bps}}, rtt_ms);
}

void
LinkModel::validate() const
{
  if (segments_.empty())
    {
      throw ConfigError("link.bandwidth", "needs at least one segment");
    }
  if (segments_.front().t_start_s != 0.0)
    {
      throw ConfigError("link.bandwidth", "first segment must start at t=0");
    }
  for (std::size_t i = 0; i < segments_.size(); ++i)
    {
      if (!(segments_[i].bandwidth_bps >= 0.0) || !std::isfinite(segments_[i].bandwidth_bps))
        {
          throw ConfigError("link.bandwidth", fmt::format("segment {} has an invalid bandwidth", i));
        }
      if (i > 0 && segments_[i].t_start_s <= segments_[i - 1].t_start_s)
        {
          throw ConfigError("link.bandwidth", fmt::format("segment {} is not ordered after segment {}", i, i - 1));
        }
    }
  if (!(rtt_ms_ >= 0.0))
    {
      throw ConfigError("link.rtt_ms", "must be >= 0");
    }
}

double
LinkModel::bandwidth_at(double t_s) const
{
  auto it = std::upper_bound(segments_.begin(), segments_.end(), t_s,
                             [](double t, const LinkSegment& s) { return t < s.t_start_s; });
  return it == segments_.begin() ? segments_.front().bandwidth_bps : std::prev(it)->bandwidth_bps;
}

double
LinkModel::bits_between(double t0, double t1) const
{
  double bits = 0.0;
  for (std::size_t i = 0; i < segments_.size(); ++i)
    {
      const double s0 = segments_[i].t_start_s;
      const double s1 = i + 1 < segments_.size() ? segments_[i + 1].t_start_s : std::numeric_limits<double>::infinity();
      const double a = std::max(t0, s0);
      const double b = std::min(t1, s1);
      if (b > a)
        {
          bits += (b - a) * segments_[i].bandwidth_bps;
        }
    }
  return bits;
}

double
LinkModel::time_to_deliver(double t0, double bytes, double rate_cap_bps) const
{
  double remaining = bytes * 8.0;
  if (remaining <= 0.0)
    {
      return t0;
    }
  double t = t0;
  for (std::size_t i = 0; i < segments_.size(); ++i)
    {
      const double s1 = i + 1 < segments_.size() ? segments_[i + 1].t_start_s : std::numeric_limits<double>::infinity();
      if (s1 <= t)
        {
          continue;
        }
      const double rate = std::min(segments_[i].bandwidth_bps, rate_cap_bps);
      if (rate > 0.0)
        {
          const double finish = t + remaining / rate;
          if (finish <= s1)
            {
              return finish;
            }
          remaining -= (s1 - t) * rate;
        }
      t = s1;
    }
  return std::numeric_limits<double>::infinity();
}

LinkModel
LinkModel::scaled(double factor) const
{
  auto segs = segments_;
  for (auto& s : segs)
    {
      s.bandwidth_bps *= factor;
    }
  return LinkModel(std::move(segs), rtt_ms_);
}

} // namespace streamsim
