#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "upacrl/harness.hpp"

namespace upacrl::config {

/// Flat "section.key" -> raw value map, ordered by key.
using KeyValues = std::map<std::string, std::string>;

/// Parses the run-config text format:
///
///     # comment
///     track = bandit
///     T = 10000
///     [bandit]
///     dim = 5
///
/// Keys after a `[section]` header are stored as "section.key". Valid
/// sections are bandit, mdp and sweep. Throws ConfigError with the line number
/// on malformed lines, unknown sections and duplicate keys.
KeyValues parse_key_values(std::string_view text, const std::string& origin = "<config>");
KeyValues load_key_values(const std::filesystem::path& path);

/// Applies a "key=value" override on top of parsed values.
void apply_override(KeyValues& values, std::string_view assignment);

/// Every key a run config accepts (sweep.* keys excluded).
const std::vector<std::string>& known_keys();

/// Unknown keys and unparsable values raise ConfigError naming the key.
/// Keys under "sweep." must be removed beforehand.
harness::RunConfig to_run_config(const KeyValues& values);

/// Inverse of to_run_config for echoing; omits output paths so that echoes
/// of identical runs written to different directories are identical.
KeyValues to_key_values(const harness::RunConfig& config);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

}  // namespace upacrl::config
