#include "helpers.hpp"

#include "streamsim/scenario.hpp"

#include <doctest.h>

#include <filesystem>

using namespace streamsim;

#ifndef STREAMSIM_SCENARIO_DIR
#error "STREAMSIM_SCENARIO_DIR must point at the bundled scenarios"
#endif

namespace {

std::string
field_of(const std::string& text)
{
  try
    {
      parse_scenario(text);
    }
  catch (const ConfigError& e)
    {
      return e.field();
    }
  return "";
}

} // namespace

TEST_SUITE("scenario")
{
  TEST_CASE("defaults when nothing is given")
  {
    const auto sc = parse_scenario("");
    CHECK(sc.stream.duration_s() == 600.0);
    CHECK(std::holds_alternative<EncodingRate>(sc.technique));
    CHECK(sc.radio_tech() == Technology::Hspa);
  }

  TEST_CASE("errors name the offending field")
  {
    const auto base = helpers::base_text();
    CHECK(field_of(base + "technique.colour = red\n") == "technique.colour");
    CHECK(field_of(base + "link.rtt_ms = 10\n") == "link.rtt_ms");
    CHECK(field_of(base + "technique.kind = teleport\n") == "technique.kind");
    CHECK(field_of("profile.name = nokia-9000\n") == "profile.name");
    CHECK(field_of(base + "technique.kind = throttling\ntechnique.factor = 0.5\n") == "technique.factor");
    CHECK(field_of(base + "stream.duration_s = abc\n") == "stream.duration_s");
    CHECK(field_of(base + "session.abandon_at_s = 900\n") == "session.abandon_at_s");
    // keys belonging to a different technique are not silently ignored
    CHECK(field_of(base + "technique.kind = fast_caching\ntechnique.factor = 2\n") == "technique.factor");
    CHECK(field_of(base + "radio.drx_cycle_ms = 80\n") == "radio.drx_cycle_ms");
  }

  TEST_CASE("missing profile message names the profile")
  {
    CHECK_THROWS_WITH_AS(parse_scenario("profile.name = nokia-9000\n"), doctest::Contains("nokia-9000"), ConfigError);
  }

  TEST_CASE("comments and blank lines")
  {
    const auto a = parse_scenario("# header\n\nstream.duration_s = 120  # trailing\n   \n");
    CHECK(a.stream.duration_s() == 120.0);
    CHECK_THROWS_AS(parse_scenario("just some words\n"), ConfigError);
  }

  TEST_CASE("key/value text round-trips")
  {
    const std::string text = "b.y = 2\na.x = 1\n# c\nc.z = hello world\n";
    const auto kv = parse_key_values(text);
    CHECK(kv.size() == 3);
    CHECK(kv.at("c.z") == "hello world");
    CHECK(parse_key_values(format_key_values(kv)) == kv);
    CHECK(format_key_values(kv) == "a.x = 1\nb.y = 2\nc.z = hello world\n");
  }

  TEST_CASE("fingerprint ignores layout but not values")
  {
    const auto a = parse_scenario("stream.duration_s = 120\nlink.rtt_ms = 50\nlink.bandwidth_bps = 4000000\n");
    const auto b = parse_scenario("# same\nlink.bandwidth_bps=4000000\n\nlink.rtt_ms =   50\nstream.duration_s = 120\n");
    const auto c = parse_scenario("stream.duration_s = 121\nlink.rtt_ms = 50\nlink.bandwidth_bps = 4000000\n");
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(a.fingerprint() != c.fingerprint());
    CHECK(a.fingerprint().size() == 16);
  }

  TEST_CASE("radio config follows radio.tech")
  {
    CHECK(std::holds_alternative<WifiPsmConfig>(helpers::scenario("wifi", "").radio));
    CHECK(std::holds_alternative<LteDrxConfig>(helpers::scenario("lte", "").radio));
    const auto lte = helpers::scenario("lte", "radio.drx_cycle_ms = 640");
    CHECK(std::get<LteDrxConfig>(lte.radio).drx_cycle_ms == 640.0);
  }

  TEST_CASE("every bundled scenario loads and runs")
  {
    int n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(STREAMSIM_SCENARIO_DIR))
      {
        if (entry.path().extension() != ".scn")
          continue;
        INFO(entry.path().string());
        const auto sc = load_scenario(entry.path());
        CHECK(sc.name == entry.path().stem().string());
        const auto run = run_scenario(sc);
        CHECK(run.summary.bytes_downloaded > 0);
        CHECK(run.summary.avg_streaming_current_mA > 0.0);
        ++n;
      }
    CHECK(n >= 10);
  }

  TEST_CASE("unreadable scenario file")
  {
    CHECK_THROWS_AS(load_scenario("/nonexistent/x.scn"), ConfigError);
  }
}
