#include "streamsim/delivery_sim.hpp"

#include "delivery_engine.hpp"

#include <fmt/format.h>

#include <ostream>

namespace streamsim {

std::vector<const DeliveryLogEntry*>
DeliveryLog::find(std::string_view event) const
{
  std::vector<const DeliveryLogEntry*> out;
  for (const auto& e : entries)
    {
      if (e.event == event)
        {
          out.push_back(&e);
        }
    }
  return out;
}

void
write_delivery_log_csv(std::ostream& out, const DeliveryLog& log)
{
  out << "t_s,event,connection_id,bytes,buffer_s_after\n";
  for (const auto& e : log.entries)
    {
      out << fmt::format("{:.3f},{},{},{},{:.3f}\n", e.t_s, e.event, e.connection_id, e.bytes, e.buffer_s_after);
    }
}

SessionResult
simulate_session(const StreamSpec& stream, const LinkModel& link, const Technique& tech, const SessionOptions& options)
{
  stream.validate();
  link.validate();
  validate(tech);
  if (options.abandon_at_s && (*options.abandon_at_s < 0.0 || *options.abandon_at_s > stream.duration_s()))
    {
      throw ConfigError("session.abandon_at_s", fmt::format("must lie within [0, {}]", stream.duration_s()));
    }
  detail::Engine engine(stream, link, options);
  auto policy = detail::make_policy(tech, engine);
  return engine.run(*policy);
}

DeliveryLog
gen_multi_connection_waste(const StreamSpec& stream,
                           std::int64_t buffer_bytes,
                           const LinkModel& link,
                           std::optional<std::int64_t> reopen_free_bytes,
                           double throttle_factor,
                           const SessionOptions& options)
{
  if (!stream.keyframe_interval_bytes())
    {
      throw ConfigError("stream.keyframe_interval_bytes", "required for the keyframe-waste run");
    }
  Throttling t;
  t.factor = throttle_factor;
  t.player_buffer_bytes = buffer_bytes;
  t.reopen_free_bytes = reopen_free_bytes;
  return simulate_session(stream, link, t, options).log;
}

} // namespace streamsim
