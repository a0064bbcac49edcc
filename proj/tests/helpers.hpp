#pragma once

#include "streamsim/profiles.hpp"
#include "streamsim/scenario.hpp"

#include <fmt/format.h>

#include <string>
#include <vector>

namespace helpers {

using namespace streamsim;

// 600 s CBR at 1 Mbps over a 4 Mbps link on the GS3-LTE profile.
inline std::string
base_text(const std::string& radio = "hspa")
{
  return fmt::format("stream.duration_s = 600\nstream.encoding_rate_bps = 1000000\nlink.capacity_ratio = 4\n"
                     "link.rtt_ms = 50\nprofile.name = gs3-lte\nradio.tech = {}\n",
                     radio);
}

inline Scenario
scenario(const std::string& radio, const std::string& extra)
{
  return parse_scenario(base_text(radio) + extra + "\n");
}

inline std::vector<PacketEvent>
data_at(const std::vector<double>& times, std::int64_t bytes = 1500)
{
  std::vector<PacketEvent> v;
  for (double t : times)
    v.push_back(PacketEvent{t, bytes, 1, EventKind::Data});
  return v;
}

inline std::vector<PacketEvent>
of_kind(const std::vector<PacketEvent>& ev, EventKind k)
{
  std::vector<PacketEvent> out;
  for (const auto& e : ev)
    if (e.kind == k)
      out.push_back(e);
  return out;
}

inline const PowerProfile&
gs3()
{
  return builtin_profile("gs3-lte").power;
}

} // namespace helpers
