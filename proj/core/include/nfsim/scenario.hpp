#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nfsim/config.hpp"

namespace nfsim {

// Parses a scenario document; overrides are "dotted.key=value" strings applied before
// validation. Values parse as JSON when possible and as plain strings otherwise.
SystemConfig parse_scenario(const std::string& text, const std::vector<std::string>& overrides = {});
SystemConfig load_scenario(const std::filesystem::path& path,
                           const std::vector<std::string>& overrides = {});

// Canonical document: every field explicit, wavelength in meters.
std::string scenario_to_json(const SystemConfig& config, int indent = 2);

std::uint64_t scenario_hash(const SystemConfig& config);
std::string scenario_hash_hex(const SystemConfig& config);

}  // namespace nfsim
