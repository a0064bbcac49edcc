#pragma once

#include "streamsim/scenario.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace streamsim {

struct SweepPoint
{
  double x = 0.0;
  double avg_current_mA = 0.0;
  // avg_current_mA over the first point's value.
  double relative_power = 0.0;
  std::int64_t bytes_wasted = 0;
  double stall_total_s = 0.0;
};

struct SweepResult
{
  std::string axis;
  std::string series;
  std::string fingerprint;
  std::vector<SweepPoint> points;
};

/// Total current averaged over the watched wall time, one session per
/// fraction (0, 1] of the content watched, for each technique.
std::vector<SweepResult> abandonment_sweep(const Scenario& scenario,
                                           const std::vector<double>& watch_fractions,
                                           const std::vector<Technique>& techniques);

/// ON-OFF-M sessions with lower = upper - size for each dynamic buffer size
/// and each link capacity ratio C / r_s. The upper threshold comes from the
/// scenario's ON-OFF-M technique (or its defaults). Sizes above the upper
/// threshold are skipped.
std::vector<SweepResult> buffer_size_sweep(const Scenario& scenario,
                                           const std::vector<double>& dynamic_buffer_sizes_s,
                                           const std::vector<double>& c_over_s_ratios);

/// First fraction at which `b` becomes no more expensive than `a` after `a`
/// was strictly cheaper at every earlier point. Empty when `a` is not cheaper
/// at the first point or never loses its lead.
std::optional<double> crossover(const SweepResult& a, const SweepResult& b);

struct ThresholdAdvice
{
  double upper_s = 0.0;
  double lower_s = 0.0;
  double dynamic_s = 0.0;
  std::int64_t upper_bytes = 0;
  std::int64_t lower_bytes = 0;
  std::string rationale;
};

/// Content seconds held by a byte-sized buffer at encoding rate `rate_bps`.
double equivalent_seconds(std::int64_t buffer_bytes, double rate_bps);

ThresholdAdvice recommend_thresholds(const StreamSpec& stream, const LinkModel& link, Technology radio_tech);

void write_sweep_csv(std::ostream& out, const SweepResult& result);

/// Self-contained SVG line plot of one or more sweeps sharing an axis.
std::string render_svg(const std::vector<SweepResult>& results, const std::string& y_label);

} // namespace streamsim
