#include "streamsim/analysis.hpp"
#include "streamsim/profiles.hpp"
#include "streamsim/scenario.hpp"
#include "streamsim/trace_tools.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace streamsim;

namespace {

void
write_atomic(const fs::path& path, const std::string& content)
{
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      {
        throw std::runtime_error(fmt::format("cannot write '{}'", tmp.string()));
      }
    out << content;
    if (!out.flush())
      {
        throw std::runtime_error(fmt::format("write to '{}' failed", tmp.string()));
      }
  }
  fs::rename(tmp, path);
}

template <typename Fn>
std::string
render(Fn&& fn)
{
  std::ostringstream s;
  fn(s);
  return s.str();
}

std::vector<double>
parse_grid(const std::string& text, const char* field)
{
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size())
    {
      auto comma = text.find(',', start);
      if (comma == std::string::npos)
        comma = text.size();
      auto item = text.substr(start, comma - start);
      while (!item.empty() && item.front() == ' ')
        item.erase(item.begin());
      while (!item.empty() && item.back() == ' ')
        item.pop_back();
      if (!item.empty())
        {
          double v = 0.0;
          auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
          if (ec != std::errc{} || p != item.data() + item.size())
            {
              throw ConfigError(field, fmt::format("'{}' is not a number", item));
            }
          out.push_back(v);
        }
      start = comma + 1;
    }
  if (out.empty())
    {
      throw ConfigError(field, "empty grid");
    }
  return out;
}

fs::path
prepare_out(const std::string& dir)
{
  fs::path out(dir);
  fs::create_directories(out);
  return out;
}

std::string
file_safe(std::string s)
{
  for (auto& c : s)
    {
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.')
        c = '_';
    }
  return s;
}

void
emit_sweep(const fs::path& out, const std::string& prefix, const std::vector<SweepResult>& results,
           const std::string& format, const std::string& y_label, nlohmann::json extra)
{
  if (format == "json")
    {
      nlohmann::json j = std::move(extra);
      for (const auto& r : results)
        {
          nlohmann::json pts = nlohmann::json::array();
          for (const auto& p : r.points)
            {
              pts.push_back({{"x", p.x},
                             {"avg_current_mA", p.avg_current_mA},
                             {"relative_power", p.relative_power},
                             {"bytes_wasted", p.bytes_wasted},
                             {"stall_total_s", p.stall_total_s}});
            }
          j["series"].push_back({{"name", r.series}, {"axis", r.axis}, {"fingerprint", r.fingerprint}, {"points", pts}});
        }
      write_atomic(out / (prefix + ".json"), j.dump(2) + "\n");
    }
  else
    {
      for (const auto& r : results)
        {
          write_atomic(out / (prefix + "_" + file_safe(r.series) + ".csv"),
                       render([&](std::ostream& s) { write_sweep_csv(s, r); }));
        }
    }
  write_atomic(out / "plot.svg", render_svg(results, y_label));
}

} // namespace

int
main(int argc, char** argv)
{
  CLI::App app{"Streaming delivery and radio energy simulator"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::string scenario_path, out_dir, grid, ratios, format = "csv", analyze_format = "json", trace_path;
  std::optional<double> encoding_rate;

  auto* sim = app.add_subcommand("simulate", "Run one scenario and write its artifacts");
  sim->add_option("--scenario", scenario_path, "Scenario file")->required();
  sim->add_option("--out", out_dir, "Output directory")->required();
  sim->add_option("--format", format, "Also print the summary to stdout when json")
      ->check(CLI::IsMember({"csv", "json"}));

  auto* ab = app.add_subcommand("sweep-abandon", "Average current against watched fraction");
  ab->add_option("--scenario", scenario_path, "Scenario file")->required();
  ab->add_option("--out", out_dir, "Output directory")->required();
  ab->add_option("--grid", grid, "Watched fractions, comma separated")
      ->default_val("0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95,1");
  ab->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  auto* bs = app.add_subcommand("sweep-buffer", "Relative power against dynamic buffer size");
  bs->add_option("--scenario", scenario_path, "Scenario file")->required();
  bs->add_option("--out", out_dir, "Output directory")->required();
  bs->add_option("--grid", grid, "Dynamic buffer sizes in seconds")->default_val("10,20,30,40,50,60,80,100,150,200");
  bs->add_option("--ratios", ratios, "Link capacity over encoding rate")->default_val("2,4,8");
  bs->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  auto* an = app.add_subcommand("analyze", "Classify the delivery technique of a flow trace");
  an->add_option("--trace,trace", trace_path, "Flow CSV")->required();
  an->add_option("--encoding-rate", encoding_rate, "Encoding rate in bit/s, enables factor estimation");
  an->add_option("--format", analyze_format, "json or csv")->check(CLI::IsMember({"csv", "json"}));

  auto* pr = app.add_subcommand("profiles", "List built-in device profiles");
  pr->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  try
    {
      app.parse(argc, argv);
    }
  catch (const CLI::ParseError& e)
    {
      const int rc = app.exit(e);
      return rc == 0 ? 0 : 2;
    }
  spdlog::set_default_logger(spdlog::stderr_logger_mt("streamsim"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  try
    {
      if (*sim)
        {
          const auto sc = load_scenario(scenario_path);
          const auto run = run_scenario(sc);
          const auto out = prepare_out(out_dir);
          auto summary = to_json(run.summary);
          summary["scenario"] = sc.name;
          summary["fingerprint"] = sc.fingerprint();
          summary["truncated"] = run.session.truncated;
          write_atomic(out / "session_summary.json", summary.dump(2) + "\n");
          write_atomic(out / "buffer.csv", render([&](std::ostream& s) { write_buffer_csv(s, run.session.buffer); }));
          write_atomic(out / "radio_timeline.csv",
                       render([&](std::ostream& s) { write_radio_timeline_csv(s, run.radio); }));
          write_atomic(out / "delivery_log.csv",
                       render([&](std::ostream& s) { write_delivery_log_csv(s, run.session.log); }));
          const auto flows = to_flow_records(run.session.events);
          write_atomic(out / "flows.csv", render([&](std::ostream& s) { write_flow_csv(s, flows); }));
          if (format == "json")
            {
              std::cout << summary.dump(2) << "\n";
            }
        }
      else if (*ab)
        {
          const auto sc = load_scenario(scenario_path);
          const auto fractions = parse_grid(grid, "grid");
          Technique other = sc.technique;
          if (std::holds_alternative<FastCaching>(other))
            {
              other = OnOffM{};
            }
          const auto results = abandonment_sweep(sc, fractions, {FastCaching{}, other});
          nlohmann::json extra;
          const auto w = crossover(results[1], results[0]);
          extra["crossover_fraction"] = w ? nlohmann::json(*w) : nlohmann::json(nullptr);
          emit_sweep(prepare_out(out_dir), "abandon", results, format, "avg current (mA)", extra);
        }
      else if (*bs)
        {
          const auto sc = load_scenario(scenario_path);
          const auto sizes = parse_grid(grid, "grid");
          const auto cs = parse_grid(ratios, "ratios");
          const auto results = buffer_size_sweep(sc, sizes, cs);
          emit_sweep(prepare_out(out_dir), "buffer", results, format, "relative power", nlohmann::json::object());
        }
      else if (*an)
        {
          const auto records = ingest(fs::path(trace_path));
          const auto c = classify(records, encoding_rate);
          if (analyze_format == "csv")
            {
              std::cout << "technique,confidence\n" << c.technique << "," << c.confidence << "\n";
            }
          else
            {
              std::cout << to_json(c).dump(2) << "\n";
            }
        }
      else if (*pr)
        {
          nlohmann::json j = nlohmann::json::array();
          for (const auto& d : builtin_profiles())
            {
              const auto& p = d.power;
              j.push_back({{"name", p.device},
                           {"wifi_active", p.wifi_active},
                           {"hspa_dch", p.hspa_dch},
                           {"lte_rx", p.lte_rx},
                           {"playback_mA", p.playback_mA}});
            }
          if (format == "json")
            {
              std::cout << j.dump(2) << "\n";
            }
          else
            {
              std::cout << "name,wifi_active,hspa_dch,lte_rx,playback_mA\n";
              for (const auto& e : j)
                {
                  std::cout << fmt::format("{},{},{},{},{}\n", e["name"].get<std::string>(),
                                           e["wifi_active"].get<double>(), e["hspa_dch"].get<double>(),
                                           e["lte_rx"].get<double>(), e["playback_mA"].get<double>());
                }
            }
        }
    }
  catch (const ConfigError& e)
    {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  catch (const std::exception& e)
    {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  return 0;
}
