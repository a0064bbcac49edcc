#pragma once

#include "streamsim/delivery_sim.hpp"
#include "streamsim/energy.hpp"
#include "streamsim/media.hpp"
#include "streamsim/radio_models.hpp"
#include "streamsim/techniques.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace streamsim {

/// One streaming session, fully specified.
struct Scenario
{
  std::string name = "scenario";
  StreamSpec stream = StreamSpec::cbr(600.0, 1'000'000.0);
  LinkModel link = LinkModel::constant(4'000'000.0, 50.0);
  Technique technique = EncodingRate{};
  RadioConfig radio = HspaRrcConfig{};
  PowerProfile profile;
  SessionOptions session;
  // Normalized key/value text the scenario was built from.
  std::string canonical;

  Technology radio_tech() const { return technology_of(radio); }
  /// Stable 64-bit hex digest of `canonical`.
  std::string fingerprint() const;
};

/// Parses flat `key = value` text with dotted keys. `#` starts a comment.
/// Throws ConfigError naming the offending key.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

/// Key/value pairs of a scenario file without interpretation. Duplicate keys
/// are rejected.
std::map<std::string, std::string> parse_key_values(std::string_view text);

/// Serializes pairs back to scenario text (sorted by key).
std::string format_key_values(const std::map<std::string, std::string>& kv);

struct ScenarioRun
{
  SessionResult session;
  RadioTimeline radio;
  SessionSummary summary;
};

ScenarioRun run_scenario(const Scenario& scenario);

} // namespace streamsim
