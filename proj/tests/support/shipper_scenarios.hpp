#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

// Scripted shipper runs checked against the delivery contract. Each returns
// the list of violations; empty means the contract held.
namespace stormlog::testing {

struct ScenarioReport {
  std::vector<std::string> violations;
  std::size_t lines_written = 0;
  std::size_t deliveries = 0;
  std::size_t duplicates = 0;

  bool ok() const { return violations.empty(); }
};

// Ship a file, rotate it by rename, write a fresh file under the old name,
// then truncate that one in place. Every line is expected exactly once.
ScenarioReport run_rotation_scenario(const std::filesystem::path& dir);

// Several shipper runs over growing files; most runs crash after a random
// number of deliveries, before the registry is checkpointed. Checks
// at-least-once delivery, duplicates confined to unacknowledged records,
// per-file order, and the final registry reload.
ScenarioReport run_crash_scenario(const std::filesystem::path& dir, std::uint64_t seed);

}  // namespace stormlog::testing
