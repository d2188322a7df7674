#pragma once

#include <string>

#include "rvm/core_types.hpp"

namespace rvm {

// INI text: [section] headers, key = value lines, whole-line comments with # or ;.
// Unknown sections or keys and malformed values throw ConfigError; absent keys keep defaults.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
// every key, in schema order, with round-trip precision
std::string serialize_config(const RunConfig& cfg);
// FNV-1a of the serialized form
std::string config_hash(const RunConfig& cfg);

}  // namespace rvm
