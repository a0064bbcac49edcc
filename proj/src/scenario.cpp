#include "streamsim/scenario.hpp"

#include "streamsim/profiles.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace streamsim {

namespace {

std::string_view
trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    {
      return {};
    }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double
to_double(const std::string& key, std::string_view text)
{
  text = trim(text);
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v))
    {
      throw ConfigError(key, fmt::format("'{}' is not a number", text));
    }
  return v;
}

std::int64_t
to_int(const std::string& key, std::string_view text)
{
  const double v = to_double(key, text);
  if (v != std::floor(v) || std::abs(v) > 9.0e15)
    {
      throw ConfigError(key, fmt::format("'{}' is not an integer", text));
    }
  return static_cast<std::int64_t>(v);
}

bool
to_bool(const std::string& key, std::string_view text)
{
  text = trim(text);
  if (text == "true" || text == "yes" || text == "1" || text == "on")
    {
      return true;
    }
  if (text == "false" || text == "no" || text == "0" || text == "off")
    {
      return false;
    }
  throw ConfigError(key, fmt::format("'{}' is not a boolean", text));
}

// "t:v,t:v" pairs.
std::vector<std::pair<std::string, double>>
to_pairs(const std::string& key, std::string_view text)
{
  std::vector<std::pair<std::string, double>> out;
  std::size_t pos = 0;
  while (pos <= text.size())
    {
      auto comma = text.find(',', pos);
      if (comma == std::string_view::npos)
        {
          comma = text.size();
        }
      const auto item = trim(text.substr(pos, comma - pos));
      pos = comma + 1;
      if (item.empty())
        {
          if (comma == text.size())
            {
              break;
            }
          throw ConfigError(key, "empty list item");
        }
      const auto colon = item.find(':');
      if (colon == std::string_view::npos)
        {
          throw ConfigError(key, fmt::format("'{}' is not of the form a:b", item));
        }
      out.emplace_back(std::string(trim(item.substr(0, colon))), to_double(key, item.substr(colon + 1)));
    }
  if (out.empty())
    {
      throw ConfigError(key, "needs at least one a:b item");
    }
  return out;
}

class Reader
{
public:
  explicit Reader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  const std::string* get(const std::string& key)
  {
    auto it = kv_.find(key);
    if (it == kv_.end())
      {
        return nullptr;
      }
    used_.insert(key);
    return &it->second;
  }

  std::string str(const std::string& key, std::string fallback)
  {
    const auto* v = get(key);
    return v ? *v : fallback;
  }

  void num(const std::string& key, double& out)
  {
    if (const auto* v = get(key))
      {
        out = to_double(key, *v);
      }
  }
  void integer(const std::string& key, std::int64_t& out)
  {
    if (const auto* v = get(key))
      {
        out = to_int(key, *v);
      }
  }
  void integer(const std::string& key, int& out)
  {
    if (const auto* v = get(key))
      {
        out = static_cast<int>(to_int(key, *v));
      }
  }
  void flag(const std::string& key, bool& out)
  {
    if (const auto* v = get(key))
      {
        out = to_bool(key, *v);
      }
  }
  template <class T> void opt_num(const std::string& key, std::optional<T>& out)
  {
    if (const auto* v = get(key))
      {
        if constexpr (std::is_integral_v<T>)
          {
            out = to_int(key, *v);
          }
        else
          {
            out = to_double(key, *v);
          }
      }
  }

  void reject_unused() const
  {
    for (const auto& [k, v] : kv_)
      {
        if (!used_.count(k))
          {
            throw ConfigError(k, "unknown key for this scenario");
          }
      }
  }

private:
  std::map<std::string, std::string> kv_;
  std::set<std::string> used_;
};

std::vector<Rung>
to_ladder(const std::string& key, std::string_view text)
{
  std::vector<Rung> ladder;
  for (auto& [q, r] : to_pairs(key, text))
    {
      ladder.push_back({q, r});
    }
  return ladder;
}

Technique
read_technique(Reader& r)
{
  const std::string kind = r.str("technique.kind", "encoding_rate");
  const std::string p = "technique.";
  if (kind == "encoding_rate")
    {
      EncodingRate t;
      r.num(p + "faststart_target_s", t.faststart_target_s);
      return t;
    }
  if (kind == "throttling")
    {
      Throttling t;
      r.num(p + "factor", t.factor);
      r.integer(p + "chunk_bytes", t.chunk_bytes);
      r.num(p + "faststart_target_s", t.faststart_target_s);
      r.flag(p + "chunk_jitter", t.chunk_jitter);
      r.opt_num(p + "player_buffer_bytes", t.player_buffer_bytes);
      r.opt_num(p + "reopen_free_bytes", t.reopen_free_bytes);
      return t;
    }
  if (kind == "on_off_s")
    {
      OnOffS t;
      r.integer(p + "upper_bytes", t.upper_bytes);
      r.num(p + "lower_s", t.lower_s);
      r.num(p + "keepalive_interval_s", t.keepalive_interval_s);
      r.integer(p + "keepalive_bytes", t.keepalive_bytes);
      r.num(p + "persist_cap_s", t.persist_cap_s);
      r.num(p + "persist_initial_s", t.persist_initial_s);
      r.opt_num(p + "off_fixed_s", t.off_fixed_s);
      r.num(p + "faststart_target_s", t.faststart_target_s);
      return t;
    }
  if (kind == "on_off_m")
    {
      OnOffM t;
      r.num(p + "upper_s", t.upper_s);
      r.num(p + "lower_s", t.lower_s);
      r.opt_num(p + "off_fixed_s", t.off_fixed_s);
      r.opt_num(p + "chunk_bytes", t.chunk_bytes);
      r.integer(p + "faststart_bytes", t.faststart_bytes);
      r.opt_num(p + "rate_factor", t.rate_factor);
      r.num(p + "faststart_target_s", t.faststart_target_s);
      return t;
    }
  if (kind == "fast_caching")
    {
      return FastCaching{};
    }
  if (kind == "hls")
    {
      Hls t;
      t.ladder = {{"sd", 800'000.0}, {"hd", 2'000'000.0}};
      r.num(p + "chunk_s", t.chunk_s);
      r.integer(p + "initial_chunks", t.initial_chunks);
      if (const auto* v = r.get(p + "ladder"))
        {
          t.ladder = to_ladder(p + "ladder", *v);
        }
      std::int64_t start = 0;
      r.integer(p + "start_rung", start);
      if (start < 0)
        {
          throw ConfigError(p + "start_rung", "must be >= 0");
        }
      t.start_rung = static_cast<std::size_t>(start);
      r.flag(p + "discard_on_upswitch", t.discard_on_upswitch);
      r.flag(p + "audio_video_split", t.audio_video_split);
      r.num(p + "av_offset_s", t.av_offset_s);
      r.num(p + "audio_rate_bps", t.audio_rate_bps);
      r.integer(p + "switch_chunks", t.switch_chunks);
      return t;
    }
  if (kind == "mss")
    {
      Mss t;
      t.ladder = {{"low", 350'000.0}, {"mid", 1'000'000.0}, {"high", 2'500'000.0}};
      r.num(p + "video_chunk_s", t.video_chunk_s);
      r.integer(p + "audio_every_n_video_chunks", t.audio_every_n_video_chunks);
      r.num(p + "startup_buffer_s", t.startup_buffer_s);
      if (const auto* v = r.get(p + "ladder"))
        {
          t.ladder = to_ladder(p + "ladder", *v);
        }
      r.num(p + "audio_rate_bps", t.audio_rate_bps);
      r.integer(p + "switch_chunks", t.switch_chunks);
      return t;
    }
  throw ConfigError("technique.kind", fmt::format("unknown technique '{}'", kind));
}

RadioConfig
read_radio(Reader& r, const DeviceProfile* base)
{
  const auto tech = parse_technology(r.str("radio.tech", "hspa"));
  const std::string p = "radio.";
  switch (tech)
    {
    case Technology::Wifi:
      {
        WifiPsmConfig c = base ? base->wifi : WifiPsmConfig{};
        r.num(p + "listen_interval_ms", c.listen_interval_ms);
        r.num(p + "tail_ms", c.tail_ms);
        r.flag(p + "sleep_current_applies", c.sleep_current_applies);
        r.num(p + "beacon_wake_ms", c.beacon_wake_ms);
        r.num(p + "packet_active_ms", c.packet_active_ms);
        r.num(p + "burst_gap_ms", c.burst_gap_ms);
        c.validate();
        return c;
      }
    case Technology::Hspa:
      {
        HspaRrcConfig c = base ? base->hspa : HspaRrcConfig{};
        r.num(p + "t1_s", c.t1_s);
        r.num(p + "t2_s", c.t2_s);
        r.num(p + "t3_s", c.t3_s);
        r.flag(p + "fast_dormancy", c.fast_dormancy);
        r.num(p + "fd_timer_s", c.fd_timer_s);
        if (const auto* v = r.get(p + "fd_target"))
          {
            if (*v == "cell_pch" || *v == "CELL_PCH")
              {
                c.fd_target = DormancyTarget::CellPch;
              }
            else if (*v == "idle" || *v == "IDLE")
              {
                c.fd_target = DormancyTarget::Idle;
              }
            else
              {
                throw ConfigError(p + "fd_target", fmt::format("'{}' is neither cell_pch nor idle", *v));
              }
          }
        r.num(p + "promotion_latency_s", c.promotion_latency_s);
        r.num(p + "fach_promotion_latency_s", c.fach_promotion_latency_s);
        r.integer(p + "fach_max_bytes", c.fach_max_bytes);
        c.validate();
        return c;
      }
    case Technology::Lte:
      {
        LteDrxConfig c = base ? base->lte : LteDrxConfig{};
        r.num(p + "rrc_idle_s", c.rrc_idle_s);
        r.num(p + "drx_inactivity_ms", c.drx_inactivity_ms);
        r.num(p + "drx_cycle_ms", c.drx_cycle_ms);
        r.num(p + "drx_on_ms", c.drx_on_ms);
        r.num(p + "promotion_latency_ms", c.promotion_latency_ms);
        r.flag(p + "drx_enabled", c.drx_enabled);
        c.validate();
        return c;
      }
    }
  throw ConfigError("radio.tech", "unsupported technology");
}

void
read_profile_overrides(Reader& r, PowerProfile& pp)
{
  const std::string p = "profile.";
  const std::pair<const char*, double*> fields[] = {
    {"wifi_active", &pp.wifi_active},     {"wifi_idle_tail", &pp.wifi_idle_tail},
    {"wifi_sleep", &pp.wifi_sleep},       {"hspa_dch", &pp.hspa_dch},
    {"hspa_fach", &pp.hspa_fach},         {"hspa_pch", &pp.hspa_pch},
    {"hspa_idle", &pp.hspa_idle},         {"lte_rx", &pp.lte_rx},
    {"lte_drx_on", &pp.lte_drx_on},       {"lte_drx_sleep", &pp.lte_drx_sleep},
    {"lte_idle", &pp.lte_idle},           {"playback_mA", &pp.playback_mA},
    {"nominal_voltage_V", &pp.nominal_voltage_V}, {"drx_on_overstay_ms", &pp.drx_on_overstay_ms},
  };
  for (const auto& [name, field] : fields)
    {
      r.num(p + name, *field);
    }
}

std::uint64_t
fnv1a(std::string_view s)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s)
    {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  return h;
}

} // namespace

std::string
Scenario::fingerprint() const
{
  return fmt::format("{:016x}", fnv1a(canonical));
}

std::map<std::string, std::string>
parse_key_values(std::string_view text)
{
  std::map<std::string, std::string> kv;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size())
    {
      auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos)
        {
          nl = text.size();
        }
      auto line = text.substr(pos, nl - pos);
      pos = nl + 1;
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string_view::npos)
        {
          line = line.substr(0, hash);
        }
      line = trim(line);
      if (line.empty())
        {
          continue;
        }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        {
          throw ConfigError(fmt::format("line {}", line_no), fmt::format("expected key = value, got '{}'", line));
        }
      const std::string key(trim(line.substr(0, eq)));
      auto value = trim(line.substr(eq + 1));
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
        {
          value = value.substr(1, value.size() - 2);
        }
      if (key.empty())
        {
          throw ConfigError(fmt::format("line {}", line_no), "empty key");
        }
      if (!kv.emplace(key, std::string(value)).second)
        {
          throw ConfigError(key, fmt::format("duplicate key on line {}", line_no));
        }
    }
  return kv;
}

std::string
format_key_values(const std::map<std::string, std::string>& kv)
{
  std::string out;
  for (const auto& [k, v] : kv)
    {
      out += fmt::format("{} = {}\n", k, v);
    }
  return out;
}

Scenario
parse_scenario(std::string_view text)
{
  auto kv = parse_key_values(text);
  Scenario sc;
  sc.canonical = format_key_values(kv);
  Reader r(std::move(kv));

  sc.name = r.str("scenario.name", "scenario");

  // Stream.
  double duration = 600.0;
  double rate = 1'000'000.0;
  r.num("stream.duration_s", duration);
  r.num("stream.encoding_rate_bps", rate);
  std::optional<std::int64_t> size;
  r.opt_num("stream.size_bytes", size);
  if (const auto* trace = r.get("stream.vbr_trace"))
    {
      std::vector<RatePoint> pts;
      for (auto& [t, v] : to_pairs("stream.vbr_trace", *trace))
        {
          pts.push_back({to_double("stream.vbr_trace", t), v});
        }
      sc.stream = StreamSpec::vbr(duration, std::move(pts), size);
    }
  else
    {
      if (size)
        {
          rate = static_cast<double>(*size) * 8.0 / duration;
        }
      sc.stream = StreamSpec::cbr(duration, rate);
    }
  std::optional<std::int64_t> keyframe;
  r.opt_num("stream.keyframe_interval_bytes", keyframe);
  sc.stream.set_keyframe_interval_bytes(keyframe);

  // Link.
  double rtt = 50.0;
  r.num("link.rtt_ms", rtt);
  if (const auto* bw = r.get("link.bandwidth"))
    {
      std::vector<LinkSegment> segs;
      for (auto& [t, v] : to_pairs("link.bandwidth", *bw))
        {
          segs.push_back({to_double("link.bandwidth", t), v});
        }
      sc.link = LinkModel(std::move(segs), rtt);
    }
  else
    {
      double c = 4.0 * sc.stream.encoding_rate_bps();
      r.num("link.bandwidth_bps", c);
      if (r.has("link.capacity_ratio"))
        {
          double ratio = 4.0;
          r.num("link.capacity_ratio", ratio);
          c = ratio * sc.stream.encoding_rate_bps();
        }
      sc.link = LinkModel::constant(c, rtt);
    }

  sc.technique = read_technique(r);
  validate(sc.technique);

  // Device profile and radio.
  const DeviceProfile* base = nullptr;
  if (const auto* name = r.get("profile.name"))
    {
      base = &builtin_profile(*name);
      sc.profile = base->power;
    }
  else
    {
      sc.profile.device = "inline";
    }
  read_profile_overrides(r, sc.profile);
  sc.profile.validate();
  sc.radio = read_radio(r, base);
  if (const auto* lte = std::get_if<LteDrxConfig>(&sc.radio))
    {
      sc.profile.validate_against(*lte);
    }

  // Session.
  sc.session.access_latency_s = promotion_latency(sc.radio);
  std::optional<double> abandon;
  r.opt_num("session.abandon_at_s", abandon);
  sc.session.abandon_at_s = abandon;
  r.num("session.start_threshold_s", sc.session.start_threshold_s);
  r.num("session.resume_threshold_s", sc.session.resume_threshold_s);
  r.num("session.access_latency_s", sc.session.access_latency_s);
  std::int64_t seed = 1;
  r.integer("session.seed", seed);
  sc.session.seed = static_cast<std::uint64_t>(seed);
  if (abandon && (*abandon < 0.0 || *abandon > duration))
    {
      throw ConfigError("session.abandon_at_s", fmt::format("must lie within [0, {}]", duration));
    }

  r.reject_unused();
  return sc;
}

Scenario
load_scenario(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    {
      throw ConfigError("scenario", fmt::format("cannot read '{}'", path.string()));
    }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

ScenarioRun
run_scenario(const Scenario& sc)
{
  ScenarioRun run;
  run.session = simulate_session(sc.stream, sc.link, sc.technique, sc.session);
  run.radio = simulate_radio(run.session.events, run.session.wall_time_s, sc.radio, sc.profile);
  if (run.session.wall_time_s > 0.0)
    {
      run.radio.require_coverage(run.session.wall_time_s);
    }
  run.summary = summarize(run.session, run.radio, sc.profile, sc.radio);
  return run;
}

} // namespace streamsim
