#include "streamsim/techniques.hpp"

#include "streamsim/events.hpp"

#include <cmath>

namespace streamsim {

namespace {

template <class... Ts> struct Overloaded : Ts...
{
  using Ts::operator()...;
};
template <class... Ts> Overloaded(Ts...) -> Overloaded<Ts...>;

void
require(bool ok, const char* field, const char* what)
{
  if (!ok)
    {
      throw ConfigError(field, what);
    }
}

void
validate_ladder(const std::vector<Rung>& ladder)
{
  require(!ladder.empty(), "technique.ladder", "must list at least one rung");
  for (std::size_t i = 0; i < ladder.size(); ++i)
    {
      require(ladder[i].rate_bps > 0.0, "technique.ladder", "rung rates must be > 0");
      if (i > 0)
        {
          require(ladder[i].rate_bps > ladder[i - 1].rate_bps, "technique.ladder", "rungs must be in increasing rate order");
        }
    }
}

} // namespace

std::string_view
technique_name(const Technique& tech)
{
  return std::visit(Overloaded{
                      [](const EncodingRate&) { return std::string_view("encoding_rate"); },
                      [](const Throttling&) { return std::string_view("throttling"); },
                      [](const OnOffS&) { return std::string_view("on_off_s"); },
                      [](const OnOffM&) { return std::string_view("on_off_m"); },
                      [](const FastCaching&) { return std::string_view("fast_caching"); },
                      [](const Hls&) { return std::string_view("hls"); },
                      [](const Mss&) { return std::string_view("mss"); },
                    },
                    tech);
}

std::string_view
technique_class(const Technique& tech)
{
  if (std::holds_alternative<Hls>(tech) || std::holds_alternative<Mss>(tech))
    {
      return "rate_adaptive";
    }
  return technique_name(tech);
}

void
validate(const Technique& tech)
{
  std::visit(Overloaded{
               [](const EncodingRate& t) {
                 require(t.faststart_target_s > 0.0, "technique.faststart_target_s", "must be > 0");
               },
               [](const Throttling& t) {
                 require(t.factor > 1.0, "technique.factor", "must be > 1");
                 require(t.chunk_bytes > 0, "technique.chunk_bytes", "must be > 0");
                 require(t.faststart_target_s >= 0.0, "technique.faststart_target_s", "must be >= 0");
                 if (t.player_buffer_bytes)
                   {
                     require(*t.player_buffer_bytes > 0, "technique.player_buffer_bytes", "must be > 0");
                   }
                 if (t.reopen_free_bytes)
                   {
                     require(*t.reopen_free_bytes > 0, "technique.reopen_free_bytes", "must be > 0");
                   }
               },
               [](const OnOffS& t) {
                 require(t.upper_bytes > 0, "technique.upper_bytes", "must be > 0");
                 require(t.lower_s >= 0.0, "technique.lower_s", "must be >= 0");
                 require(t.keepalive_interval_s >= 0.0, "technique.keepalive_interval_s", "must be >= 0");
                 require(t.keepalive_bytes >= 0, "technique.keepalive_bytes", "must be >= 0");
                 require(t.persist_initial_s > 0.0, "technique.persist_initial_s", "must be > 0");
                 require(t.persist_cap_s >= t.persist_initial_s, "technique.persist_cap_s",
                         "must be >= persist_initial_s");
                 if (t.off_fixed_s)
                   {
                     require(*t.off_fixed_s > 0.0, "technique.off_fixed_s", "must be > 0");
                   }
               },
               [](const OnOffM& t) {
                 require(t.upper_s > 0.0, "technique.upper_s", "must be > 0");
                 require(t.lower_s >= 0.0, "technique.lower_s", "must be >= 0");
                 // lower == upper is accepted as the continuous-delivery limit.
                 require(t.lower_s <= t.upper_s, "technique.lower_s", "must not exceed upper_s");
                 if (t.off_fixed_s)
                   {
                     require(*t.off_fixed_s > 0.0, "technique.off_fixed_s", "must be > 0");
                   }
                 if (t.chunk_bytes)
                   {
                     require(*t.chunk_bytes > 0, "technique.chunk_bytes", "must be > 0");
                     require(t.faststart_bytes > 0, "technique.faststart_bytes", "must be > 0");
                   }
                 if (t.rate_factor)
                   {
                     require(*t.rate_factor > 1.0, "technique.rate_factor", "must be > 1");
                   }
               },
               [](const FastCaching&) {},
               [](const Hls& t) {
                 require(t.chunk_s > 0.0, "technique.chunk_s", "must be > 0");
                 require(t.initial_chunks >= 1, "technique.initial_chunks", "must be >= 1");
                 validate_ladder(t.ladder);
                 require(t.start_rung < t.ladder.size(), "technique.start_rung", "must index the ladder");
                 require(t.av_offset_s >= 0.0, "technique.av_offset_s", "must be >= 0");
                 require(t.audio_rate_bps > 0.0, "technique.audio_rate_bps", "must be > 0");
                 require(t.switch_chunks >= 1, "technique.switch_chunks", "must be >= 1");
               },
               [](const Mss& t) {
                 require(t.video_chunk_s > 0.0, "technique.video_chunk_s", "must be > 0");
                 require(t.audio_every_n_video_chunks >= 1, "technique.audio_every_n_video_chunks", "must be >= 1");
                 require(t.startup_buffer_s > 0.0, "technique.startup_buffer_s", "must be > 0");
                 validate_ladder(t.ladder);
                 require(t.audio_rate_bps > 0.0, "technique.audio_rate_bps", "must be > 0");
                 require(t.switch_chunks >= 1, "technique.switch_chunks", "must be >= 1");
               },
             },
             tech);
}

} // namespace streamsim
