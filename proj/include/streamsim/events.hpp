#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace streamsim {

/// Raised when a scenario, config or input record is invalid. `field()` names
/// the offending key so the CLI can report it.
class ConfigError : public std::runtime_error
{
public:
  ConfigError(std::string field, const std::string& what)
    : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field))
  {
  }

  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

/// Raised when a simulation invariant is violated at run time (coverage gap,
/// byte conservation breach).
class InvariantError : public std::logic_error
{
public:
  using std::logic_error::logic_error;
};

enum class EventKind : std::uint8_t
{
  Data,
  FlowControl,
  PersistProbe,
  Request,
};

std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view text);

// Control traffic never exceeds this many bytes per event.
inline constexpr std::int64_t kMaxControlBytes = 100;

/// One delivery event on the wire.
struct PacketEvent
{
  double t_s = 0.0;
  std::int64_t bytes = 0;
  int connection_id = 0;
  EventKind kind = EventKind::Data;

  friend bool operator==(const PacketEvent&, const PacketEvent&) = default;
};

/// Canonical event order: time, then connection id, then kind.
bool event_before(const PacketEvent& a, const PacketEvent& b);

/// Throws ConfigError("events", ...) naming the first out-of-order or
/// negative-time event.
void require_sorted(std::span<const PacketEvent> events);

std::int64_t data_bytes(std::span<const PacketEvent> events);

} // namespace streamsim
