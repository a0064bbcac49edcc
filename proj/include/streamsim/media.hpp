#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace streamsim {

/// Instantaneous encoding rate from `t_s` (content time) until the next point.
struct RatePoint
{
  double t_s = 0.0;
  double rate_bps = 0.0;
};

/// A video as a byte <-> content-time map. CBR streams are linear; VBR streams
/// follow a piecewise-constant rate trace.
class StreamSpec
{
public:
  static StreamSpec cbr(double duration_s, double encoding_rate_bps);
  /// VBR stream; size defaults to the trace integral.
  static StreamSpec vbr(double duration_s, std::vector<RatePoint> trace,
                        std::optional<std::int64_t> size_bytes = std::nullopt);

  double duration_s() const { return duration_s_; }
  /// Average encoding rate.
  double encoding_rate_bps() const { return encoding_rate_bps_; }
  std::int64_t size_bytes() const { return size_bytes_; }
  const std::vector<RatePoint>& vbr_trace() const { return vbr_trace_; }
  bool is_vbr() const { return !vbr_trace_.empty(); }

  const std::optional<std::int64_t>& keyframe_interval_bytes() const { return keyframe_interval_bytes_; }
  StreamSpec& set_keyframe_interval_bytes(std::optional<std::int64_t> bytes);

  /// Bytes of content in [0, content_s], clamped to [0, size].
  double bytes_at(double content_s) const;
  /// Content seconds covered by the first `bytes` bytes.
  double content_at(double bytes) const;
  /// Encoding rate at a content position.
  double rate_at(double content_s) const;

  void validate() const;

private:
  StreamSpec() = default;
  void build_table();

  double duration_s_ = 0.0;
  double encoding_rate_bps_ = 0.0;
  std::int64_t size_bytes_ = 0;
  std::vector<RatePoint> vbr_trace_;
  std::optional<std::int64_t> keyframe_interval_bytes_;
  // Cumulative byte table at each trace breakpoint (VBR only).
  std::vector<double> cum_t_;
  std::vector<double> cum_bytes_;
  double byte_scale_ = 1.0;
};

struct LinkSegment
{
  double t_start_s = 0.0;
  double bandwidth_bps = 0.0;
};

/// Piecewise-constant available bandwidth plus a fixed round-trip time.
class LinkModel
{
public:
  LinkModel(std::vector<LinkSegment> segments, double rtt_ms);
  static LinkModel constant(double bandwidth_bps, double rtt_ms);

  const std::vector<LinkSegment>& segments() const { return segments_; }
  double rtt_ms() const { return rtt_ms_; }
  double rtt_s() const { return rtt_ms_ / 1000.0; }

  double bandwidth_at(double t_s) const;
  /// Bits the link can carry over [t0, t1].
  double bits_between(double t0, double t1) const;
  /// Time at which `bytes` have been delivered when sending from t0 at
  /// min(C(t), rate_cap_bps). Infinity when the link never delivers them.
  double time_to_deliver(double t0, double bytes, double rate_cap_bps) const;

  /// Returns a copy with every segment's bandwidth multiplied by `factor`.
  LinkModel scaled(double factor) const;

  void validate() const;

private:
  std::vector<LinkSegment> segments_;
  double rtt_ms_ = 0.0;
};

} // namespace streamsim
