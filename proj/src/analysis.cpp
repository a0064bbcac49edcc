#include "streamsim/analysis.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace streamsim {

namespace {

std::string
digest(const std::string& text)
{
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text)
    {
      h ^= c;
      h *= 1099511628211ULL;
    }
  return fmt::format("{:016x}", h);
}

std::string
grid_text(const std::vector<double>& xs)
{
  std::string s;
  for (double x : xs)
    {
      s += fmt::format("{:.17g},", x);
    }
  return s;
}

void
normalize(SweepResult& r)
{
  if (r.points.empty())
    {
      return;
    }
  const double ref = r.points.front().avg_current_mA;
  for (auto& p : r.points)
    {
      p.relative_power = ref > 0.0 ? p.avg_current_mA / ref : 0.0;
    }
}

SweepPoint
point_from(double x, const SessionSummary& s)
{
  SweepPoint p;
  p.x = x;
  p.avg_current_mA = s.avg_total_current_mA;
  p.bytes_wasted = s.bytes_wasted;
  p.stall_total_s = s.stall_total_s;
  return p;
}

std::vector<double>
sorted_unique(std::vector<double> xs)
{
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  return xs;
}

} // namespace

std::vector<SweepResult>
abandonment_sweep(const Scenario& scenario, const std::vector<double>& watch_fractions,
                  const std::vector<Technique>& techniques)
{
  const auto fractions = sorted_unique(watch_fractions);
  for (double f : fractions)
    {
      if (!(f > 0.0 && f <= 1.0))
        {
          throw ConfigError("watch_fractions", fmt::format("{} is outside (0, 1]", f));
        }
    }
  std::vector<SweepResult> out;
  for (const auto& tech : techniques)
    {
      SweepResult r;
      r.axis = "watched_fraction";
      r.series = technique_name(tech);
      Scenario sc = scenario;
      sc.technique = tech;
      for (double f : fractions)
        {
          sc.session.abandon_at_s.reset();
          if (f < 1.0)
            {
              sc.session.abandon_at_s = f * sc.stream.duration_s();
            }
          r.points.push_back(point_from(f, run_scenario(sc).summary));
        }
      normalize(r);
      r.fingerprint = digest(scenario.canonical + "\nabandon:" + r.series + ":" + grid_text(fractions));
      out.push_back(std::move(r));
    }
  return out;
}

std::vector<SweepResult>
buffer_size_sweep(const Scenario& scenario, const std::vector<double>& dynamic_buffer_sizes_s,
                  const std::vector<double>& c_over_s_ratios)
{
  const auto sizes = sorted_unique(dynamic_buffer_sizes_s);
  for (double s : sizes)
    {
      if (!(s > 0.0))
        {
          throw ConfigError("dynamic_buffer_sizes_s", fmt::format("{} is not positive", s));
        }
    }
  OnOffM base;
  if (const auto* m = std::get_if<OnOffM>(&scenario.technique))
    {
      base = *m;
    }
  base.off_fixed_s.reset();
  base.chunk_bytes.reset();

  std::vector<SweepResult> out;
  for (double ratio : c_over_s_ratios)
    {
      if (!(ratio > 0.0))
        {
          throw ConfigError("c_over_s_ratios", fmt::format("{} is not positive", ratio));
        }
      SweepResult r;
      r.axis = "dynamic_buffer_s";
      r.series = fmt::format("C/S={:g}", ratio);
      Scenario sc = scenario;
      sc.link = LinkModel::constant(ratio * scenario.stream.encoding_rate_bps(), scenario.link.rtt_ms());
      for (double size : sizes)
        {
          if (size > base.upper_s)
            {
              spdlog::warn("buffer sweep: size {:g} s exceeds the upper threshold {:g} s, skipped", size, base.upper_s);
              continue;
            }
          OnOffM m = base;
          m.lower_s = base.upper_s - size;
          sc.technique = m;
          r.points.push_back(point_from(size, run_scenario(sc).summary));
        }
      normalize(r);
      r.fingerprint = digest(scenario.canonical + "\nbuffer:" + r.series + ":" + grid_text(sizes));
      out.push_back(std::move(r));
    }
  return out;
}

std::optional<double>
crossover(const SweepResult& a, const SweepResult& b)
{
  const auto n = std::min(a.points.size(), b.points.size());
  if (n == 0 || !(a.points[0].avg_current_mA < b.points[0].avg_current_mA))
    {
      return std::nullopt;
    }
  for (std::size_t i = 1; i < n; ++i)
    {
      if (b.points[i].avg_current_mA <= a.points[i].avg_current_mA)
        {
          return a.points[i].x;
        }
    }
  return std::nullopt;
}

double
equivalent_seconds(std::int64_t buffer_bytes, double rate_bps)
{
  if (!(rate_bps > 0.0))
    {
      throw ConfigError("encoding_rate_bps", "must be positive");
    }
  return static_cast<double>(buffer_bytes) * 8.0 / rate_bps;
}

ThresholdAdvice
recommend_thresholds(const StreamSpec& stream, const LinkModel& link, Technology radio_tech)
{
  const double rate = stream.encoding_rate_bps();
  if (!(rate > 0.0))
    {
      throw ConfigError("stream.encoding_rate_bps", "must be positive");
    }
  ThresholdAdvice a;
  a.upper_s = 100.0;
  a.lower_s = 40.0;
  const double headroom = link.bandwidth_at(0.0) / rate;
  std::ostringstream why;
  why << "upper 100 s and lower 40 s of content; a 60 s dynamic buffer keeps OFF periods long enough for the "
      << to_string(radio_tech) << " radio to demote";
  if (headroom >= 2.0)
    {
      why << "; with " << fmt::format("{:.1f}", headroom) << "x link headroom a 30 s lower threshold also avoids stalls";
    }
  else if (headroom < 1.0)
    {
      why << "; link is slower than the encoding rate, stalls are expected regardless of thresholds";
    }
  a.upper_s = std::min(a.upper_s, stream.duration_s());
  a.lower_s = std::min(a.lower_s, a.upper_s);
  a.dynamic_s = a.upper_s - a.lower_s;
  a.upper_bytes = static_cast<std::int64_t>(std::llround(a.upper_s * rate / 8.0));
  a.lower_bytes = static_cast<std::int64_t>(std::llround(a.lower_s * rate / 8.0));
  why << fmt::format("; a 20 MB byte-sized buffer holds {:.0f} s at this rate",
                     equivalent_seconds(20'000'000, rate));
  a.rationale = why.str();
  return a;
}

void
write_sweep_csv(std::ostream& out, const SweepResult& result)
{
  out << "x,avg_current_mA,relative_power,bytes_wasted,stall_total_s\n";
  for (const auto& p : result.points)
    {
      out << fmt::format("{:.17g},{:.17g},{:.17g},{},{:.17g}\n", p.x, p.avg_current_mA, p.relative_power,
                         p.bytes_wasted, p.stall_total_s);
    }
}

std::string
render_svg(const std::vector<SweepResult>& results, const std::string& y_label)
{
  constexpr double W = 640, H = 400, L = 70, R = 20, T = 20, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  const bool relative = y_label.find("relative") != std::string::npos;
  auto yval = [&](const SweepPoint& p) { return relative ? p.relative_power : p.avg_current_mA; };
  for (const auto& r : results)
    {
      for (const auto& p : r.points)
        {
          x0 = std::min(x0, p.x);
          x1 = std::max(x1, p.x);
          y0 = std::min(y0, yval(p));
          y1 = std::max(y1, yval(p));
        }
    }
  if (!std::isfinite(x0))
    {
      x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    }
  if (x1 <= x0)
    x1 = x0 + 1;
  y0 = std::min(y0, 0.0);
  if (y1 <= y0)
    y1 = y0 + 1;
  auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto sy = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  std::string axis = results.empty() ? "x" : results.front().axis;
  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      W, H);
  s += fmt::format("<path d=\"M{} {} L{} {} L{} {}\" stroke=\"black\" fill=\"none\"/>\n", L, T, L, H - B, W - R,
                   H - B);
  for (int i = 0; i <= 4; ++i)
    {
      const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
      s += fmt::format("<text x=\"{:.1f}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{:.3g}</text>\n", sx(xv),
                       H - B + 16, xv);
      s += fmt::format("<text x=\"{}\" y=\"{:.1f}\" font-size=\"11\" text-anchor=\"end\">{:.3g}</text>\n", L - 6,
                       sy(yv) + 4, yv);
    }
  s += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n", (L + W - R) / 2,
                   H - 10, axis);
  s += fmt::format("<text x=\"14\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" "
                   "transform=\"rotate(-90 14 {})\">{}</text>\n",
                   (T + H - B) / 2, (T + H - B) / 2, y_label);
  for (std::size_t i = 0; i < results.size(); ++i)
    {
      const auto& r = results[i];
      const char* c = colors[i % std::size(colors)];
      std::string d;
      for (const auto& p : r.points)
        {
          d += fmt::format("{}{:.2f} {:.2f} ", d.empty() ? "M" : "L", sx(p.x), sy(yval(p)));
        }
      if (!d.empty())
        {
          s += fmt::format("<path d=\"{}\" stroke=\"{}\" stroke-width=\"2\" fill=\"none\"/>\n", d, c);
        }
      s += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{}\">{}</text>\n", W - R - 150,
                       T + 16 * (i + 1), c, r.series);
    }
  s += "</svg>\n";
  return s;
}

} // namespace streamsim
