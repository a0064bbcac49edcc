#include "streamsim/events.hpp"

#include <fmt/format.h>

#include <numeric>
#include <tuple>

namespace streamsim {

std::string_view
to_string(EventKind kind)
{
  switch (kind)
    {
    case EventKind::Data:
      return "data";
    case EventKind::FlowControl:
      return "flow_control";
    case EventKind::PersistProbe:
      return "persist_probe";
    case EventKind::Request:
      return "request";
    }
  return "data";
}

EventKind
parse_event_kind(std::string_view text)
{
  for (auto kind : {EventKind::Data, EventKind::FlowControl, EventKind::PersistProbe, EventKind::Request})
    {
      if (to_string(kind) == text)
        {
          return kind;
        }
    }
  throw ConfigError("kind", fmt::format("unknown event kind '{}'", text));
}

bool
event_before(const PacketEvent& a, const PacketEvent& b)
{
  return std::tie(a.t_s, a.connection_id, a.kind) < std::tie(b.t_s, b.connection_id, b.kind);
}

void
require_sorted(std::span<const PacketEvent> events)
{
  for (std::size_t i = 0; i < events.size(); ++i)
    {
      if (events[i].t_s < 0.0)
        {
          throw ConfigError("events", fmt::format("event {} has negative time {}", i, events[i].t_s));
        }
      if (i > 0 && events[i].t_s < events[i - 1].t_s)
        {
          throw ConfigError("events",
                            fmt::format("event {} at t={} precedes event {} at t={}; events must be sorted",
                                        i, events[i].t_s, i - 1, events[i - 1].t_s));
        }
    }
}

std::int64_t
data_bytes(std::span<const PacketEvent> events)
{
  return std::accumulate(events.begin(), events.end(), std::int64_t{0},
                         [](std::int64_t acc, const PacketEvent& e) {
                           return e.kind == EventKind::Data ? acc + e.bytes : acc;
                         });
}

} // namespace streamsim
