#include "helpers.hpp"

#include "streamsim/delivery_sim.hpp"
#include "streamsim/trace_tools.hpp"

#include <doctest.h>

#include <sstream>

using namespace streamsim;

namespace {

const double R = 1'000'000.0;

std::vector<FlowRecord>
flows_of(const Technique& t, double rate = R, double ratio = 4.0)
{
  SessionOptions o;
  o.access_latency_s = 2.0;
  const auto r = simulate_session(StreamSpec::cbr(600.0, rate), LinkModel::constant(ratio * rate, 50), t, o);
  return to_flow_records(r.events);
}

std::vector<FlowRecord>
parse(const std::string& text)
{
  std::istringstream in(text);
  return ingest(in);
}

} // namespace

TEST_SUITE("trace")
{
  TEST_CASE("ingest a well-formed file")
  {
    const auto r = parse("t_s,bytes,connection_id,direction,flags\n0.5,1500,1,down,-\n0.7,500,1,up,req\n"
                         "1.25,41,2,down,probe\n");
    REQUIRE(r.size() == 3);
    CHECK(r[1].direction == Direction::Up);
    CHECK(r[1].flags == "req");
    CHECK(r[2].connection_id == 2);
  }

  TEST_CASE("unsorted rows are sorted, stable on ties")
  {
    const auto r = parse("t_s,bytes,connection_id,direction,flags\n2,10,1,down,-\n1,20,1,down,-\n1,30,1,down,-\n");
    REQUIRE(r.size() == 3);
    CHECK(r[0].bytes == 20);
    CHECK(r[1].bytes == 30);
    CHECK(r[2].bytes == 10);
  }

  TEST_CASE("empty input gives no records")
  {
    CHECK(parse("").empty());
    CHECK(parse("t_s,bytes,connection_id,direction,flags\n").empty());
  }

  TEST_CASE("malformed rows name their line")
  {
    const std::string head = "t_s,bytes,connection_id,direction,flags\n";
    CHECK_THROWS_WITH_AS(parse(head + "1,10,1,down,-\n2,abc,1,down,-\n"), doctest::Contains("line 3"), ConfigError);
    CHECK_THROWS_WITH_AS(parse(head + "1,10,1,sideways,-\n"), doctest::Contains("line 2"), ConfigError);
    CHECK_THROWS_WITH_AS(parse(head + "1,-10,1,down,-\n"), doctest::Contains("line 2"), ConfigError);
    CHECK_THROWS_WITH_AS(parse(head + "1,10,1\n"), doctest::Contains("line 2"), ConfigError);
    CHECK_THROWS_AS(parse("time,size\n1,2\n"), ConfigError);
  }

  TEST_CASE("simulator events round-trip through the flow CSV")
  {
    for (const Technique& t : {Technique{OnOffS{}}, Technique{OnOffM{}}, Technique{Throttling{}}})
      {
        SessionOptions o;
        const auto r = simulate_session(StreamSpec::cbr(300.0, R), LinkModel::constant(4 * R, 50), t, o);
        const auto flows = to_flow_records(r.events);
        std::ostringstream out;
        write_flow_csv(out, flows);
        const auto back = parse(out.str());
        CHECK(back == flows);
        CHECK(to_packet_events(back) == r.events);
      }
  }

  TEST_CASE("closed loop: every built-in technique is recognized")
  {
    Hls hls;
    hls.ladder = {Rung{"sd", 800e3}, Rung{"hd", 2e6}};
    Mss mss;
    mss.ladder = hls.ladder;
    OnOffM youtube;
    youtube.off_fixed_s = 60.0;
    const std::pair<Technique, const char*> cases[] = {
        {EncodingRate{}, "encoding_rate"}, {Throttling{}, "throttling"}, {OnOffS{}, "on_off_s"},
        {OnOffM{}, "on_off_m"},           {youtube, "on_off_m"},        {FastCaching{}, "fast_caching"},
        {hls, "rate_adaptive"},           {mss, "rate_adaptive"},
    };
    for (const auto& [t, want] : cases)
      {
        const auto c = classify(flows_of(t), R);
        INFO(want << " got " << c.technique);
        CHECK(c.technique == want);
        CHECK(c.confidence >= 0.8);
        CHECK(c.confidence <= 1.0);
      }
  }

  TEST_CASE("throttle factor estimates")
  {
    for (double f : {1.25, 2.0})
      for (double ratio : {4.0, 8.0})
        {
          Throttling t;
          t.factor = f;
          const auto c = classify(flows_of(t, R, ratio), R);
          REQUIRE(c.technique == "throttling");
          REQUIRE(c.estimated_factor);
          CHECK(*c.estimated_factor == doctest::Approx(f).epsilon(0.1));
          CHECK(c.chunk_period_s);
        }
    Throttling t;
    t.factor = 1.25;
    const auto c = classify(flows_of(t), R);
    CHECK(*c.estimated_factor >= 1.15);
    CHECK(*c.estimated_factor <= 1.35);
    // without the encoding rate no factor can be estimated
    CHECK(!classify(flows_of(t)).estimated_factor);
  }

  TEST_CASE("on-off-m evidence: median OFF 60 s and one connection per ON period")
  {
    OnOffM t;
    t.off_fixed_s = 60.0;
    const auto c = classify(flows_of(t));
    CHECK(c.technique == "on_off_m");
    REQUIRE(c.median_off_s);
    CHECK(*c.median_off_s == doctest::Approx(60.0).epsilon(2.0 / 60.0));
    CHECK(c.connection_count > 2);
    CHECK(static_cast<int>(c.off_durations_s.size()) == c.connection_count - 1);
  }

  TEST_CASE("constant-rate trace at the encoding rate is encoding_rate")
  {
    std::vector<FlowRecord> r;
    for (int i = 0; i < 6000; ++i)
      r.push_back(FlowRecord{0.01 * i, 1250, 1, Direction::Down, "-"});
    const auto c = classify(r, R);
    CHECK(c.technique == "encoding_rate");
    CHECK(c.confidence >= 0.8);
    CHECK(c.mean_rate_bps == doctest::Approx(R).epsilon(0.01));
  }

  TEST_CASE("short traces are rejected")
  {
    std::vector<FlowRecord> r;
    for (int i = 0; i < 50; ++i)
      r.push_back(FlowRecord{0.1 * i, 1250, 1, Direction::Down, "-"});
    CHECK_THROWS_AS(classify(r), ConfigError);
  }

  TEST_CASE("classification JSON carries the evidence")
  {
    const auto j = to_json(classify(flows_of(OnOffS{})));
    CHECK(j["technique"] == "on_off_s");
    CHECK(j["confidence"].get<double>() > 0.0);
    CHECK(j.contains("evidence"));
    CHECK(j["evidence"].contains("off_durations_s"));
    CHECK(j["evidence"].contains("connection_count"));
  }

  TEST_CASE("estimated buffer matches the simulator's own buffer for encoding-rate delivery")
  {
    const auto r = simulate_session(StreamSpec::cbr(600.0, R), LinkModel::constant(4 * R, 50), EncodingRate{}, {});
    const auto est = estimate_buffer(to_flow_records(r.events), R);
    for (double t : {100.0, 300.0, 500.0})
      CHECK(est.at(t).buffered_seconds == doctest::Approx(r.buffer.at(t).buffered_seconds).epsilon(0.02));
  }
}
