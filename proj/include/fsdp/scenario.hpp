#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "fsdp/sim.hpp"
#include "fsdp/synthetic.hpp"

namespace fsdp {

/// One scenario file. Paths inside the file resolve against its directory.
struct ScenarioConfig {
  std::filesystem::path source;  // the file it came from, if any
  std::filesystem::path track;
  EpisodeConfig episode{};
  EpisodeSetup setup{};
  SyntheticOpponentConfig bench{};
  std::filesystem::path output_dir = "out";
  int episodes = 10;
  std::uint64_t seed_base = 0;
  int jobs = 0;  // 0: one per hardware thread

  /// Cross-field checks and file existence. Raises config.
  void validate() const;
};

/// Parses and validates. Unknown keys, wrong types and out-of-range values
/// raise config with "<file>:<line>:<column>: <message>".
ScenarioConfig parse_scenario(const std::string& text, const std::filesystem::path& source = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);

}  // namespace fsdp
