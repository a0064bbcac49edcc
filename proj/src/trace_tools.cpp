#include "streamsim/trace_tools.hpp"

#include "streamsim/media.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

namespace streamsim {

namespace {

constexpr const char* kHeader = "t_s,bytes,connection_id,direction,flags";

std::string_view
trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

template <typename T>
bool
parse_number(std::string_view s, T& out)
{
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && p == end;
}

double
median(std::vector<double> v)
{
  if (v.empty())
    return 0.0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double
coeff_of_variation(const std::vector<double>& v)
{
  if (v.size() < 2)
    return INFINITY;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v)
    ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return mean > 0.0 ? sd / mean : INFINITY;
}

bool
is_payload(const FlowRecord& r)
{
  return r.direction == Direction::Down && r.flags == "-" && r.bytes > 0;
}

struct Burst
{
  double t_start = 0.0;
  double t_end = 0.0;
  double bytes = 0.0;
};

} // namespace

std::vector<FlowRecord>
to_flow_records(std::span<const PacketEvent> events)
{
  std::vector<FlowRecord> out;
  out.reserve(events.size());
  for (const auto& e : events)
    {
      FlowRecord r{e.t_s, e.bytes, e.connection_id, Direction::Down, "-"};
      switch (e.kind)
        {
        case EventKind::Data:
          break;
        case EventKind::Request:
          r.direction = Direction::Up;
          r.flags = "req";
          break;
        case EventKind::FlowControl:
          r.direction = Direction::Up;
          r.flags = "fc";
          break;
        case EventKind::PersistProbe:
          r.flags = "probe";
          break;
        }
      out.push_back(std::move(r));
    }
  return out;
}

std::vector<PacketEvent>
to_packet_events(std::span<const FlowRecord> records)
{
  std::vector<PacketEvent> out;
  out.reserve(records.size());
  for (const auto& r : records)
    {
      EventKind kind = EventKind::Data;
      if (r.flags == "req")
        kind = EventKind::Request;
      else if (r.flags == "fc")
        kind = EventKind::FlowControl;
      else if (r.flags == "probe")
        kind = EventKind::PersistProbe;
      out.push_back(PacketEvent{r.t_s, r.bytes, r.connection_id, kind});
    }
  return out;
}

std::vector<FlowRecord>
ingest(std::istream& in)
{
  std::vector<FlowRecord> out;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line))
    {
      ++lineno;
      const auto text = trim(line);
      if (text.empty())
        continue;
      if (!header_seen)
        {
          if (text != kHeader)
            {
              throw ConfigError(fmt::format("line {}", lineno), fmt::format("expected header '{}'", kHeader));
            }
          header_seen = true;
          continue;
        }
      std::vector<std::string_view> cols;
      std::size_t start = 0;
      while (true)
        {
          const auto comma = text.find(',', start);
          cols.push_back(trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                    : comma - start)));
          if (comma == std::string_view::npos)
            break;
          start = comma + 1;
        }
      const auto where = fmt::format("line {}", lineno);
      if (cols.size() != 5)
        {
          throw ConfigError(where, fmt::format("expected 5 columns, found {}", cols.size()));
        }
      FlowRecord r;
      if (!parse_number(cols[0], r.t_s) || !std::isfinite(r.t_s) || r.t_s < 0.0)
        throw ConfigError(where, fmt::format("bad t_s '{}'", cols[0]));
      if (!parse_number(cols[1], r.bytes) || r.bytes < 0)
        throw ConfigError(where, fmt::format("bad bytes '{}'", cols[1]));
      if (!parse_number(cols[2], r.connection_id))
        throw ConfigError(where, fmt::format("bad connection_id '{}'", cols[2]));
      if (cols[3] == "down")
        r.direction = Direction::Down;
      else if (cols[3] == "up")
        r.direction = Direction::Up;
      else
        throw ConfigError(where, fmt::format("direction must be down or up, got '{}'", cols[3]));
      r.flags = std::string(cols[4]);
      if (r.flags != "-" && r.flags != "req" && r.flags != "fc" && r.flags != "probe")
        throw ConfigError(where, fmt::format("unknown flags '{}'", cols[4]));
      out.push_back(std::move(r));
    }
  auto by_time = [](const FlowRecord& a, const FlowRecord& b) { return a.t_s < b.t_s; };
  if (!std::is_sorted(out.begin(), out.end(), by_time))
    {
      spdlog::warn("flow records were not in time order; sorted");
      std::stable_sort(out.begin(), out.end(), by_time);
    }
  return out;
}

std::vector<FlowRecord>
ingest(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    {
      throw ConfigError("trace", fmt::format("cannot open '{}'", path.string()));
    }
  return ingest(in);
}

void
write_flow_csv(std::ostream& out, std::span<const FlowRecord> records)
{
  out << kHeader << '\n';
  for (const auto& r : records)
    {
      out << fmt::format("{},{},{},{},{}\n", r.t_s, r.bytes, r.connection_id,
                         r.direction == Direction::Down ? "down" : "up", r.flags);
    }
}

Classification
classify(std::span<const FlowRecord> records, std::optional<double> encoding_rate_bps, const ClassifierConfig& cfg)
{
  std::vector<const FlowRecord*> payload;
  for (const auto& r : records)
    if (is_payload(r))
      payload.push_back(&r);
  const double span = records.empty() ? 0.0 : records.back().t_s - records.front().t_s;
  if (span < 10.0 || payload.empty())
    {
      throw ConfigError("trace", fmt::format("need at least 10 s of records with payload, got {:.3f} s", span));
    }

  Classification c;
  const double t0 = payload.front()->t_s;
  const double t1 = payload.back()->t_s;
  double total = 0.0;
  std::set<int> conns;
  for (const auto* r : payload)
    {
      total += static_cast<double>(r->bytes);
      conns.insert(r->connection_id);
    }
  c.connection_count = static_cast<int>(conns.size());
  c.mean_rate_bps = t1 > t0 ? total * 8.0 / (t1 - t0) : 0.0;
  {
    std::map<long, double> bins;
    for (const auto* r : payload)
      bins[static_cast<long>(std::floor(r->t_s))] += static_cast<double>(r->bytes);
    for (const auto& [k, b] : bins)
      c.peak_rate_bps = std::max(c.peak_rate_bps, b * 8.0);
  }

  // requests on persistent connections at a steady spacing
  std::vector<double> req_times;
  std::map<int, int> req_per_conn;
  for (const auto& r : records)
    {
      if (r.flags == "req")
        {
          req_times.push_back(r.t_s);
          ++req_per_conn[r.connection_id];
        }
    }
  bool rate_adaptive = false;
  if (static_cast<int>(req_times.size()) >= cfg.min_requests && !req_per_conn.empty())
    {
      const double per_conn = static_cast<double>(req_times.size()) / static_cast<double>(req_per_conn.size());
      std::vector<double> gaps;
      for (std::size_t i = req_times.size() / 2; i + 1 < req_times.size(); ++i)
        gaps.push_back(req_times[i + 1] - req_times[i]);
      if (!gaps.empty())
        c.request_interval_s = median(gaps);
      rate_adaptive = per_conn >= cfg.requests_per_connection;
    }

  // OFF periods: payload silence longer than gap_s
  int gaps_with_probes = 0;
  int gaps_with_new_conn = 0;
  {
    std::set<int> seen;
    std::size_t rec = 0;
    for (std::size_t i = 0; i < payload.size(); ++i)
      {
        if (i > 0)
          {
            const double a = payload[i - 1]->t_s, b = payload[i]->t_s;
            if (b - a > cfg.gap_s)
              {
                c.off_durations_s.push_back(b - a);
                while (rec < records.size() && records[rec].t_s <= a)
                  ++rec;
                bool probed = false;
                for (std::size_t k = rec; k < records.size() && records[k].t_s < b; ++k)
                  probed = probed || records[k].flags == "probe";
                gaps_with_probes += probed;
                gaps_with_new_conn += !seen.count(payload[i]->connection_id);
              }
          }
        seen.insert(payload[i]->connection_id);
      }
  }
  const auto n_gaps = static_cast<int>(c.off_durations_s.size());
  if (n_gaps > 0)
    c.median_off_s = median(c.off_durations_s);
  const bool on_off_s = n_gaps > 0 && 2 * gaps_with_probes > n_gaps;
  const bool on_off_m = n_gaps > 0 && 2 * gaps_with_new_conn > n_gaps;

  // bursts of payload separated by short idle periods
  std::vector<Burst> bursts;
  for (const auto* r : payload)
    {
      if (bursts.empty() || r->t_s - bursts.back().t_end > cfg.burst_gap_s)
        bursts.push_back(Burst{r->t_s, r->t_s, 0.0});
      bursts.back().t_end = r->t_s;
      bursts.back().bytes += static_cast<double>(r->bytes);
    }
  bool throttling = false;
  if (static_cast<int>(bursts.size()) > cfg.min_bursts)
    {
      // the first burst is the fast start; the last may be a partial chunk
      std::vector<double> periods;
      for (std::size_t i = 2; i + 1 < bursts.size(); ++i)
        periods.push_back(bursts[i].t_start - bursts[i - 1].t_start);
      const double period = median(periods);
      if (period > 0.0 && period < 1.0 && coeff_of_variation(periods) < cfg.periodic_cv)
        {
          throttling = true;
          c.chunk_period_s = period;
          if (encoding_rate_bps && *encoding_rate_bps > 0.0)
            {
              const auto last = bursts.size() - 1;
              double bytes = 0.0;
              for (std::size_t i = 1; i < last; ++i)
                bytes += bursts[i].bytes;
              const double secs = bursts[last].t_start - bursts[1].t_start;
              if (secs > 0.0)
                c.estimated_factor = bytes * 8.0 / secs / *encoding_rate_bps;
            }
        }
    }

  const bool fast_caching = n_gaps == 0 && !throttling && c.peak_rate_bps > 0.0 &&
                            c.mean_rate_bps >= cfg.sustained_ratio * c.peak_rate_bps &&
                            (!encoding_rate_bps || c.mean_rate_bps >= 1.5 * *encoding_rate_bps);

  struct Rule
  {
    bool fired;
    const char* name;
  };
  const Rule rules[] = {
      {rate_adaptive, "rate_adaptive"}, {on_off_s, "on_off_s"},         {on_off_m, "on_off_m"},
      {throttling, "throttling"},       {fast_caching, "fast_caching"},
  };
  for (const auto& r : rules)
    if (r.fired)
      c.rules_fired.emplace_back(r.name);

  if (c.rules_fired.empty())
    {
      c.technique = "encoding_rate";
      c.confidence = 0.8;
      if (encoding_rate_bps && *encoding_rate_bps > 0.0)
        {
          // steady rate over the second half of the trace
          const double mid = 0.5 * (t0 + t1);
          double late = 0.0;
          for (const auto* r : payload)
            if (r->t_s >= mid)
              late += static_cast<double>(r->bytes);
          const double ratio = late * 8.0 / std::max(t1 - mid, 1e-9) / *encoding_rate_bps;
          c.confidence = ratio >= 0.8 && ratio <= 1.3 ? 0.9 : 0.6;
        }
      return c;
    }
  c.technique = c.rules_fired.front();
  if (c.rules_fired.size() > 1)
    {
      c.confidence = 0.5;
      return c;
    }
  c.confidence = 0.9;
  if (c.technique == "on_off_s")
    c.confidence = 0.6 + 0.3 * gaps_with_probes / n_gaps;
  else if (c.technique == "on_off_m")
    c.confidence = 0.6 + 0.3 * gaps_with_new_conn / n_gaps;
  else if (c.technique == "throttling" && !c.estimated_factor)
    c.confidence = 0.8;
  return c;
}

nlohmann::json
to_json(const Classification& c)
{
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["technique"] = c.technique;
  j["confidence"] = c.confidence;
  j["evidence"] = {
      {"rules_fired", c.rules_fired},
      {"chunk_period_s", opt(c.chunk_period_s)},
      {"off_durations_s", c.off_durations_s},
      {"median_off_s", opt(c.median_off_s)},
      {"connection_count", c.connection_count},
      {"estimated_factor", opt(c.estimated_factor)},
      {"request_interval_s", opt(c.request_interval_s)},
      {"mean_rate_bps", c.mean_rate_bps},
      {"peak_rate_bps", c.peak_rate_bps},
  };
  return j;
}

BufferTimeline
estimate_buffer(std::span<const FlowRecord> records, double encoding_rate_bps)
{
  if (!(encoding_rate_bps > 0.0))
    {
      throw ConfigError("encoding_rate_bps", "must be positive");
    }
  std::vector<PacketEvent> arrivals;
  double total = 0.0;
  double join = INFINITY;
  const double start_bytes = kDefaultStartThresholdS * encoding_rate_bps / 8.0;
  for (const auto& r : records)
    {
      if (!is_payload(r))
        continue;
      arrivals.push_back(PacketEvent{r.t_s, r.bytes, r.connection_id, EventKind::Data});
      total += static_cast<double>(r.bytes);
      if (!std::isfinite(join) && total >= start_bytes)
        join = r.t_s;
    }
  if (arrivals.empty())
    {
      throw ConfigError("trace", "no downstream payload to reconstruct a buffer from");
    }
  if (!std::isfinite(join))
    join = arrivals.back().t_s;
  const auto stream = StreamSpec::cbr(total * 8.0 / encoding_rate_bps, encoding_rate_bps);
  return compute_buffer(arrivals, stream, join);
}

} // namespace streamsim
