#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "beable/io.hpp"
#include "beable/scenarios.hpp"

namespace beable::cli {

inline constexpr int kSchemaVersion = 1;

/// Run settings; command-line flags override the "run" block of a config.
struct RunConfig {
  std::string scenario;
  Json parameters = Json::object();
  std::uint64_t seed = 1;
  // Unset fields take the scenario defaults.
  std::optional<std::size_t> trajectories;
  std::optional<double> dt;
  std::optional<double> t_final;
  std::string output;            // directory; empty means summary only
  std::string format = "csv";
  std::string family;            // empty: scenario default
  unsigned threads = 0;

  /// ConfigError unless all fields are set, trajectories > 0, dt > 0 and the format is known.
  void validate() const;
};

/// Parses {"schemaVersion", "scenario", "parameters", "run"}.
RunConfig parse_config(const Json& doc);
RunConfig load_config(const std::string& path);

/// Builds the scenario named in the config; relative file references in
/// "simulate" parameters resolve against `base_dir`.
ScenarioSpec build_scenario(const RunConfig& config, const std::string& base_dir = ".");

/// Fills unset dt, t_final and trajectories from the scenario defaults.
void apply_defaults(RunConfig& config, const ScenarioSpec& spec);

}  // namespace beable::cli
