#pragma once

#include "streamsim/radio_models.hpp"

#include <span>
#include <string_view>

namespace streamsim {

/// Built-in device: current draws plus the radio settings the device/network
/// combination used in the measurement campaign.
struct DeviceProfile
{
  PowerProfile power;
  WifiPsmConfig wifi;
  HspaRrcConfig hspa;
  LteDrxConfig lte;

  RadioConfig radio_config(Technology tech) const;
};

std::span<const DeviceProfile> builtin_profiles();

/// Throws ConfigError("profile.name", ...) for unknown names.
const DeviceProfile& builtin_profile(std::string_view name);

} // namespace streamsim
