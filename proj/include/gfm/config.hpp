#pragma once

// YAML scenario and sweep files.
//
// A config file is a tree whose leaves become dotted parameter keys:
//
//   schema_version: 1
//   scenario: ib_fault
//   preset: vsc_208V_2kW
//   controller:
//     rho: 1
//     n_it: 10
//
// A sweep file adds `sweep:` (dotted key -> list of values, full grid) and an
// optional `metrics:` list naming the report fields to tabulate.

#include <map>
#include <string>
#include <vector>

namespace gfm {

inline constexpr int kSchemaVersion = 1;

struct ConfigFile {
  std::string scenario;  ///< empty when absent
  std::string preset;    ///< empty when absent
  std::vector<std::pair<std::string, std::string>> values;  ///< dotted key -> text, file order
  std::vector<std::pair<std::string, std::vector<std::string>>> sweep;
  std::vector<std::string> metrics;
};

/// Parses YAML text. Throws ConfigError on malformed input or a schema mismatch.
ConfigFile parse_config(const std::string& yaml_text);

/// Reads and parses a file. Throws ConfigError when unreadable.
ConfigFile load_config(const std::string& path);

}  // namespace gfm
