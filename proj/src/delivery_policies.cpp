#include "delivery_engine.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>

namespace streamsim::detail {

namespace {

constexpr double kEps = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::int64_t
ceil_bytes(double b)
{
  return static_cast<std::int64_t>(std::ceil(b - 1e-6));
}

// Client keeps `target_s` of content ahead of the playhead; the link and an
// optional server-side rate cap limit the fill. Also covers fast caching
// (infinite target).
class BufferTargetPolicy : public Policy
{
public:
  BufferTargetPolicy(double target_s, std::optional<double> cap_bps) : target_s_(target_s), cap_bps_(cap_bps) {}

  void step(Engine& e) override
  {
    if (conn_ == 0)
      {
        conn_ = e.open();
      }
    if (!e.is_open(conn_) || !e.ready(conn_))
      {
        return;
      }
    if (e.stream_remaining() <= 0)
      {
        e.close(conn_);
        return;
      }
    const auto& s = e.stream();
    std::int64_t want = e.stream_remaining();
    if (std::isfinite(target_s_))
      {
        const double level = std::min(s.duration_s(), e.player().playhead_s() + e.dt() + target_s_);
        want = std::min(want, ceil_bytes(s.bytes_at(level)) - e.stream_offset());
      }
    if (cap_bps_)
      {
        want = std::min(want, cap_.allow(*cap_bps_, e.dt()));
      }
    e.deliver_stream(conn_, e.take(want));
  }

private:
  double target_s_;
  std::optional<double> cap_bps_;
  RateCap cap_;
  int conn_ = 0;
};

class ThrottlingPolicy : public Policy
{
public:
  ThrottlingPolicy(const Throttling& cfg, const Engine& e) : cfg_(cfg), rng_(e.options().seed)
  {
    const auto& s = e.stream();
    rate_Bps_ = cfg_.factor * s.encoding_rate_bps() / 8.0;
    fast_bytes_ = ceil_bytes(s.bytes_at(cfg_.faststart_target_s));
    if (cfg_.player_buffer_bytes)
      {
        if (!s.keyframe_interval_bytes())
          {
            throw ConfigError("stream.keyframe_interval_bytes",
                              "required when technique.player_buffer_bytes is set");
          }
        keyframe_ = *s.keyframe_interval_bytes();
        reopen_free_ = cfg_.reopen_free_bytes.value_or(keyframe_);
      }
    const double period = static_cast<double>(cfg_.chunk_bytes) / rate_Bps_;
    if (period < e.link().rtt_s())
      {
        spdlog::debug("throttle chunk period {:.3f} s is below the RTT; chunks coalesce", period);
      }
  }

  void step(Engine& e) override
  {
    const auto& player = e.player();
    if (keyframe_ > 0)
      {
        const double cap = static_cast<double>(*cfg_.player_buffer_bytes);
        const double slack = 2.0 * e.stream().encoding_rate_bps() * e.dt() / 8.0 + 1.0;
        if (conn_ != 0 && e.stream_remaining() > 0 && player.buffered_bytes() >= cap - slack)
          {
            e.close(conn_);
            conn_ = 0;
            const std::int64_t frag = e.stream_offset() % keyframe_;
            if (frag > 0)
              {
                const auto dropped = e.rewind_stream(frag);
                e.note("keyframe_waste", 0, dropped);
              }
          }
        if (conn_ == 0 && e.stream_remaining() > 0
            && cap - player.buffered_bytes() >= static_cast<double>(reopen_free_))
          {
            start_connection(e);
          }
      }
    else if (conn_ == 0 && !finished_)
      {
        start_connection(e);
      }
    if (conn_ == 0 || !e.ready(conn_))
      {
        return;
      }
    const std::int64_t remaining = e.stream_remaining();
    if (remaining <= 0)
      {
        e.close(conn_);
        conn_ = 0;
        finished_ = true;
        return;
      }
    std::int64_t want = 0;
    if (in_fast_ && conn_bytes_ >= fast_bytes_)
      {
        in_fast_ = false;
        next_release_ = e.now();
      }
    if (in_fast_)
      {
        want = fast_bytes_ - conn_bytes_;
      }
    else
      {
        while (next_release_ <= e.now() + kEps && queue_ < remaining)
          {
            const auto chunk = next_chunk();
            queue_ += chunk;
            next_release_ += static_cast<double>(chunk) / rate_Bps_;
          }
        want = queue_;
      }
    if (keyframe_ > 0)
      {
        const double room = static_cast<double>(*cfg_.player_buffer_bytes) - player.buffered_bytes();
        want = std::min<std::int64_t>(want, static_cast<std::int64_t>(std::max(0.0, std::floor(room))));
      }
    const auto got = e.take(std::min(want, remaining));
    e.deliver_stream(conn_, got);
    conn_bytes_ += got;
    if (!in_fast_)
      {
        queue_ -= got;
      }
  }

private:
  void start_connection(Engine& e)
  {
    conn_ = e.open();
    conn_bytes_ = 0;
    queue_ = 0;
    in_fast_ = true;
  }

  std::int64_t next_chunk()
  {
    if (!cfg_.chunk_jitter)
      {
        return cfg_.chunk_bytes;
      }
    std::uniform_real_distribution<double> u(0.5, 1.5);
    return std::max<std::int64_t>(1, std::llround(static_cast<double>(cfg_.chunk_bytes) * u(rng_)));
  }

  Throttling cfg_;
  std::mt19937_64 rng_;
  double rate_Bps_ = 0.0;
  std::int64_t fast_bytes_ = 0;
  std::int64_t keyframe_ = 0;
  std::int64_t reopen_free_ = 0;
  int conn_ = 0;
  bool finished_ = false;
  bool in_fast_ = true;
  std::int64_t conn_bytes_ = 0;
  std::int64_t queue_ = 0;
  double next_release_ = 0.0;
};

class OnOffSPolicy : public Policy
{
public:
  explicit OnOffSPolicy(const OnOffS& cfg) : cfg_(cfg) {}

  void step(Engine& e) override
  {
    if (conn_ == 0)
      {
        conn_ = e.open();
      }
    if (!e.is_open(conn_) || !e.ready(conn_))
      {
        return;
      }
    const auto& player = e.player();
    if (e.stream_remaining() <= 0)
      {
        e.close(conn_);
        return;
      }
    if (on_)
      {
        const bool full = player.buffered_bytes() >= static_cast<double>(cfg_.upper_bytes)
                          && player.buffered_s() >= std::min(cfg_.faststart_target_s, e.stream().duration_s());
        if (full)
          {
            on_ = false;
            off_start_ = e.now();
            e.control(conn_, EventKind::FlowControl, kAckBytes);
            e.note("off_start", conn_);
            reset_probes(e.now());
            next_keepalive_ = cfg_.keepalive_interval_s > 0.0 ? e.now() + cfg_.keepalive_interval_s : kInf;
            keepalive_left_ = 0;
            return;
          }
        e.deliver_stream(conn_, e.take(e.stream_remaining()));
        return;
      }

    const bool resume = cfg_.off_fixed_s ? e.now() >= off_start_ + *cfg_.off_fixed_s - kEps
                                         : player.buffered_s() <= cfg_.lower_s + kEps;
    if (resume)
      {
        on_ = true;
        e.control(conn_, EventKind::FlowControl, kAckBytes);
        e.note("on_start", conn_);
        e.set_ready_at(conn_, e.now() + e.link().rtt_s());
        return;
      }
    if (e.now() >= next_keepalive_ - kEps)
      {
        keepalive_left_ = cfg_.keepalive_bytes;
        keepalive_ready_ = e.now() + e.link().rtt_s();
        next_keepalive_ += cfg_.keepalive_interval_s;
        e.control(conn_, EventKind::FlowControl, kAckBytes);
        e.note("keepalive", conn_, cfg_.keepalive_bytes);
      }
    if (keepalive_left_ > 0)
      {
        if (e.now() >= keepalive_ready_ - kEps)
          {
            const auto got = e.take(std::min(keepalive_left_, e.stream_remaining()));
            e.deliver_stream(conn_, got);
            keepalive_left_ -= got;
            if (keepalive_left_ <= 0 || e.stream_remaining() <= 0)
              {
                keepalive_left_ = 0;
                reset_probes(e.now() + e.dt());
              }
          }
        return;
      }
    if (e.now() >= next_probe_ - kEps)
      {
        e.control(conn_, EventKind::PersistProbe, kProbeBytes);
        e.control(conn_, EventKind::FlowControl, kAckBytes);
        gap_ = std::min(2.0 * gap_, cfg_.persist_cap_s);
        next_probe_ = e.now() + gap_;
      }
  }

private:
  void reset_probes(double from)
  {
    gap_ = cfg_.persist_initial_s;
    next_probe_ = from + gap_;
  }

  OnOffS cfg_;
  int conn_ = 0;
  bool on_ = true;
  double off_start_ = 0.0;
  double gap_ = 0.0;
  double next_probe_ = kInf;
  double next_keepalive_ = kInf;
  double keepalive_ready_ = 0.0;
  std::int64_t keepalive_left_ = 0;
};

class OnOffMPolicy : public Policy
{
public:
  explicit OnOffMPolicy(const OnOffM& cfg) : cfg_(cfg) {}

  void step(Engine& e) override
  {
    const auto& player = e.player();
    if (done_)
      {
        return;
      }
    if (conn_ == 0)
      {
        bool go = false;
        if (first_)
          {
            go = true;
          }
        else if (cfg_.chunk_bytes)
          {
            go = player.buffered_bytes() <= close_level_ - static_cast<double>(*cfg_.chunk_bytes) + kEps;
          }
        else if (cfg_.off_fixed_s)
          {
            go = e.now() >= off_start_ + *cfg_.off_fixed_s - kEps;
          }
        else
          {
            go = player.buffered_s() <= cfg_.lower_s + kEps;
          }
        if (!go)
          {
            return;
          }
        conn_ = e.open();
        conn_bytes_ = 0;
        cap_.reset();
        if (!first_)
          {
            e.note("on_start", conn_);
          }
      }
    if (!e.ready(conn_))
      {
        return;
      }
    if (e.stream_remaining() <= 0)
      {
        e.close(conn_);
        done_ = true;
        return;
      }
    const auto& s = e.stream();
    std::int64_t want = e.stream_remaining();
    bool full = false;
    if (cfg_.chunk_bytes)
      {
        const std::int64_t quota = first_ ? cfg_.faststart_bytes : *cfg_.chunk_bytes;
        full = conn_bytes_ >= quota;
        want = std::min(want, quota - conn_bytes_);
      }
    else
      {
        full = player.buffered_s() >= cfg_.upper_s - kEps;
        const double level = std::min(s.duration_s(), player.playhead_s() + e.dt() + cfg_.upper_s);
        want = std::min(want, ceil_bytes(s.bytes_at(level)) - e.stream_offset());
      }
    if (full)
      {
        e.close(conn_);
        e.note("off_start", conn_);
        conn_ = 0;
        first_ = false;
        off_start_ = e.now();
        close_level_ = player.buffered_bytes();
        return;
      }
    const bool throttled = cfg_.rate_factor && !(first_ && player.buffered_s() < cfg_.faststart_target_s);
    if (throttled)
      {
        want = std::min(want, cap_.allow(*cfg_.rate_factor * s.encoding_rate_bps(), e.dt()));
      }
    const auto got = e.take(want);
    e.deliver_stream(conn_, got);
    conn_bytes_ += got;
  }

private:
  OnOffM cfg_;
  RateCap cap_;
  int conn_ = 0;
  bool first_ = true;
  bool done_ = false;
  double off_start_ = 0.0;
  double close_level_ = 0.0;
  std::int64_t conn_bytes_ = 0;
};

// One chunk fetch for the segment-based players.
struct Fetch
{
  int conn = 0;
  bool audio = false;
  std::size_t index = 0;
  std::size_t rung = 0;
  std::int64_t size = 0;
  std::int64_t got = 0;
  double c0 = 0.0;
  double c1 = 0.0;
  double ready_at = 0.0;
  double first_byte_t = -1.0;
};

// Pumps bytes for a fetch; returns true when it completed this tick.
bool
pump(Engine& e, Fetch& f)
{
  if (e.now() < f.ready_at - kEps || f.got >= f.size)
    {
      return false;
    }
  const auto b = e.take(f.size - f.got);
  if (b <= 0)
    {
      return false;
    }
  if (f.first_byte_t < 0.0)
    {
      f.first_byte_t = e.now();
    }
  const double span = f.c1 - f.c0;
  const double a0 = f.c0 + span * static_cast<double>(f.got) / static_cast<double>(f.size);
  f.got += b;
  const double a1 = f.got >= f.size ? f.c1 : f.c0 + span * static_cast<double>(f.got) / static_cast<double>(f.size);
  if (f.audio)
    {
      e.deliver_audio(f.conn, b, a0, a1);
    }
  else
    {
      e.deliver_video(f.conn, b, a0, a1);
    }
  return f.got >= f.size;
}

double
measured_bps(const Engine& e, const Fetch& f)
{
  const double span = e.now() + e.dt() - f.first_byte_t;
  return static_cast<double>(f.size) * 8.0 / std::max(span, e.dt());
}

// Consecutive-measurement rate switching shared by HLS and MSS.
class RungSwitch
{
public:
  RungSwitch(const std::vector<Rung>& ladder, std::size_t rung, int needed)
    : ladder_(ladder), rung_(rung), needed_(needed)
  {
  }

  std::size_t rung() const { return rung_; }
  void set(std::size_t r)
  {
    rung_ = r;
    up_ = down_ = 0;
  }

  /// +1 on an up-switch, -1 on a down-switch, 0 otherwise.
  int observe(double bps)
  {
    if (rung_ + 1 < ladder_.size() && bps > ladder_[rung_ + 1].rate_bps)
      {
        ++up_;
        down_ = 0;
      }
    else if (bps < ladder_[rung_].rate_bps)
      {
        ++down_;
        up_ = 0;
      }
    else
      {
        up_ = down_ = 0;
      }
    if (up_ >= needed_)
      {
        set(rung_ + 1);
        return 1;
      }
    if (down_ >= needed_ && rung_ > 0)
      {
        set(rung_ - 1);
        return -1;
      }
    return 0;
  }

private:
  const std::vector<Rung>& ladder_;
  std::size_t rung_;
  int needed_;
  int up_ = 0;
  int down_ = 0;
};

class HlsPolicy : public Policy
{
public:
  HlsPolicy(const Hls& cfg, const Engine& e)
    : cfg_(cfg), switch_(cfg_.ladder, cfg_.start_rung, cfg_.switch_chunks)
  {
    chunks_ = static_cast<std::size_t>(std::ceil(e.stream().duration_s() / cfg_.chunk_s - 1e-9));
    duration_ = e.stream().duration_s();
  }

  void step(Engine& e) override
  {
    const auto& player = e.player();
    if (completed_bps_)
      {
        // Last bytes of the finished chunk landed at the end of the previous
        // tick, so discards see the whole chunk.
        on_video_done(e, *completed_bps_);
        completed_bps_.reset();
      }
    if (!video_ && next_ < chunks_)
      {
        const bool fast = next_ < static_cast<std::size_t>(cfg_.initial_chunks) && !steady_;
        const double refill_at = (cfg_.initial_chunks - 1) * cfg_.chunk_s;
        if (fast || player.buffered_s() <= refill_at + kEps)
          {
            request_video(e);
          }
      }
    while (!audio_schedule_.empty() && audio_schedule_.front().first <= e.now() + kEps)
      {
        request_audio(e, audio_schedule_.front().second);
        audio_schedule_.pop_front();
      }

    while (!audio_.empty())
      {
        if (!pump(e, audio_.front()))
          {
            break;
          }
        audio_.pop_front();
      }
    if (video_ && pump(e, *video_))
      {
        completed_bps_ = measured_bps(e, *video_);
        video_.reset();
      }

    if (next_ >= chunks_ && !video_ && !completed_bps_ && audio_.empty() && audio_schedule_.empty() && !closed_)
      {
        closed_ = true;
        e.close(conn_v_);
        if (conn_a_ != 0)
          {
            e.close(conn_a_);
          }
      }
  }

private:
  Fetch make_fetch(std::size_t i, double rate_bps, bool audio) const
  {
    Fetch f;
    f.audio = audio;
    f.index = i;
    f.c0 = static_cast<double>(i) * cfg_.chunk_s;
    f.c1 = std::min(duration_, f.c0 + cfg_.chunk_s);
    f.size = std::max<std::int64_t>(1, std::llround((f.c1 - f.c0) * rate_bps / 8.0));
    return f;
  }

  void request_video(Engine& e)
  {
    Fetch f = make_fetch(next_, cfg_.ladder[switch_.rung()].rate_bps, false);
    f.rung = switch_.rung();
    if (conn_v_ == 0)
      {
        conn_v_ = e.open();
        f.ready_at = e.now() + e.link().rtt_s() + e.options().access_latency_s;
      }
    else
      {
        f.ready_at = e.request(conn_v_);
      }
    f.conn = conn_v_;
    if (cfg_.audio_video_split && f.index >= audio_requested_)
      {
        audio_schedule_.emplace_back(e.now() + cfg_.av_offset_s, f.index);
        audio_requested_ = f.index + 1;
      }
    video_ = f;
    ++next_;
  }

  void request_audio(Engine& e, std::size_t index)
  {
    Fetch f = make_fetch(index, cfg_.audio_rate_bps, true);
    if (conn_a_ == 0)
      {
        conn_a_ = e.open();
        f.ready_at = e.now() + e.link().rtt_s();
      }
    else
      {
        f.ready_at = e.request(conn_a_);
      }
    f.conn = conn_a_;
    audio_.push_back(f);
  }

  void on_video_done(Engine& e, double bps)
  {
    if (next_ >= static_cast<std::size_t>(cfg_.initial_chunks))
      {
        steady_ = true;
      }
    const int moved = switch_.observe(bps);
    if (moved == 0)
      {
        return;
      }
    e.note("quality_switch", conn_v_, static_cast<std::int64_t>(cfg_.ladder[switch_.rung()].rate_bps));
    if (moved > 0 && cfg_.discard_on_upswitch)
      {
        const auto playing = static_cast<std::size_t>(std::floor(e.player().playhead_s() / cfg_.chunk_s + 1e-9));
        const double cut = static_cast<double>(playing + 1) * cfg_.chunk_s;
        if (cut < e.player().video_frontier_s() - kEps)
          {
            const auto dropped = e.discard_video_after(cut);
            e.note("quality_discard", conn_v_, dropped);
            next_ = playing + 1;
          }
      }
  }

  Hls cfg_;
  RungSwitch switch_;
  std::size_t chunks_ = 0;
  double duration_ = 0.0;
  std::size_t next_ = 0;
  std::size_t audio_requested_ = 0;
  bool steady_ = false;
  bool closed_ = false;
  int conn_v_ = 0;
  int conn_a_ = 0;
  std::optional<Fetch> video_;
  std::optional<double> completed_bps_;
  std::deque<Fetch> audio_;
  std::deque<std::pair<double, std::size_t>> audio_schedule_;
};

class MssPolicy : public Policy
{
public:
  MssPolicy(const Mss& cfg, const Engine& e) : cfg_(cfg), switch_(cfg_.ladder, 0, cfg_.switch_chunks)
  {
    duration_ = e.stream().duration_s();
    video_chunks_ = static_cast<std::size_t>(std::ceil(duration_ / cfg_.video_chunk_s - 1e-9));
    audio_chunk_s_ = cfg_.video_chunk_s * cfg_.audio_every_n_video_chunks;
    audio_chunks_ = static_cast<std::size_t>(std::ceil(duration_ / audio_chunk_s_ - 1e-9));
  }

  void step(Engine& e) override
  {
    const auto& player = e.player();
    if (!current_)
      {
        const std::size_t n = static_cast<std::size_t>(cfg_.audio_every_n_video_chunks);
        const std::size_t audio_owed = next_video_ >= video_chunks_ ? audio_chunks_ : next_video_ / n;
        if (next_audio_ < audio_owed)
          {
            issue(e, true);
          }
        else if (next_video_ < video_chunks_ && player.buffered_s() <= cfg_.startup_buffer_s - cfg_.video_chunk_s + kEps)
          {
            issue(e, false);
          }
      }
    if (current_ && pump(e, *current_))
      {
        if (!current_->audio)
          {
            observe(e, measured_bps(e, *current_));
          }
        current_.reset();
      }
    if (!current_ && next_video_ >= video_chunks_ && next_audio_ >= audio_chunks_ && !closed_ && conn_ != 0)
      {
        closed_ = true;
        e.close(conn_);
      }
  }

private:
  void issue(Engine& e, bool audio)
  {
    Fetch f;
    f.audio = audio;
    if (audio)
      {
        f.index = next_audio_++;
        f.c0 = static_cast<double>(f.index) * audio_chunk_s_;
        f.c1 = std::min(duration_, f.c0 + audio_chunk_s_);
        f.size = std::max<std::int64_t>(1, std::llround((f.c1 - f.c0) * cfg_.audio_rate_bps / 8.0));
      }
    else
      {
        f.index = next_video_++;
        f.rung = switch_.rung();
        f.c0 = static_cast<double>(f.index) * cfg_.video_chunk_s;
        f.c1 = std::min(duration_, f.c0 + cfg_.video_chunk_s);
        f.size = std::max<std::int64_t>(1, std::llround((f.c1 - f.c0) * cfg_.ladder[f.rung].rate_bps / 8.0));
      }
    if (conn_ == 0)
      {
        conn_ = e.open();
        f.ready_at = e.now() + e.link().rtt_s() + e.options().access_latency_s;
      }
    else
      {
        f.ready_at = e.request(conn_);
      }
    f.conn = conn_;
    current_ = f;
  }

  void observe(Engine& e, double bps)
  {
    const auto before = switch_.rung();
    if (probe_chunks_ < cfg_.switch_chunks)
      {
        // Startup probing: jump straight to the highest rung the last chunk
        // could sustain.
        ++probe_chunks_;
        std::size_t best = 0;
        for (std::size_t r = 0; r < cfg_.ladder.size(); ++r)
          {
            if (cfg_.ladder[r].rate_bps + cfg_.audio_rate_bps <= bps)
              {
                best = r;
              }
          }
        switch_.set(best);
      }
    else
      {
        switch_.observe(bps);
      }
    if (switch_.rung() != before)
      {
        e.note("quality_switch", conn_, static_cast<std::int64_t>(cfg_.ladder[switch_.rung()].rate_bps));
      }
  }

  Mss cfg_;
  RungSwitch switch_;
  double duration_ = 0.0;
  double audio_chunk_s_ = 0.0;
  std::size_t video_chunks_ = 0;
  std::size_t audio_chunks_ = 0;
  std::size_t next_video_ = 0;
  std::size_t next_audio_ = 0;
  int probe_chunks_ = 0;
  bool closed_ = false;
  int conn_ = 0;
  std::optional<Fetch> current_;
};

template <class... Ts> struct Overloaded : Ts...
{
  using Ts::operator()...;
};
template <class... Ts> Overloaded(Ts...) -> Overloaded<Ts...>;

} // namespace

std::unique_ptr<Policy>
make_policy(const Technique& tech, const Engine& e)
{
  return std::visit(
    Overloaded{
      [](const EncodingRate& t) -> std::unique_ptr<Policy> {
        return std::make_unique<BufferTargetPolicy>(t.faststart_target_s, std::nullopt);
      },
      [&](const Throttling& t) -> std::unique_ptr<Policy> { return std::make_unique<ThrottlingPolicy>(t, e); },
      [](const OnOffS& t) -> std::unique_ptr<Policy> { return std::make_unique<OnOffSPolicy>(t); },
      [&](const OnOffM& t) -> std::unique_ptr<Policy> {
        if (!t.off_fixed_s && !t.chunk_bytes && t.lower_s >= t.upper_s)
          {
            std::optional<double> cap;
            if (t.rate_factor)
              {
                cap = *t.rate_factor * e.stream().encoding_rate_bps();
              }
            return std::make_unique<BufferTargetPolicy>(t.upper_s, cap);
          }
        return std::make_unique<OnOffMPolicy>(t);
      },
      [](const FastCaching&) -> std::unique_ptr<Policy> {
        return std::make_unique<BufferTargetPolicy>(kInf, std::nullopt);
      },
      [&](const Hls& t) -> std::unique_ptr<Policy> { return std::make_unique<HlsPolicy>(t, e); },
      [&](const Mss& t) -> std::unique_ptr<Policy> { return std::make_unique<MssPolicy>(t, e); },
    },
    tech);
}

} // namespace streamsim::detail
