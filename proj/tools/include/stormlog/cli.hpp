#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace stormlog::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitDataError = 2,
  kExitInternal = 3,
};

// Entry point of the `stormlog` binary; never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Store directory layout.
std::filesystem::path indices_dir(const std::filesystem::path& store);
std::filesystem::path registry_path(const std::filesystem::path& store);
std::filesystem::path dead_letters_path(const std::filesystem::path& store);

struct IngestSummary {
  std::size_t lines_read = 0;
  std::size_t indexed = 0;
  std::size_t dead_lettered = 0;
  std::size_t dropped = 0;
  std::vector<std::string> indices_created;
};

struct IngestOptions {
  std::filesystem::path store;
  std::vector<std::string> paths;
  std::optional<std::filesystem::path> pipeline_config;  // bundled default when empty
  std::optional<std::filesystem::path> registry;         // inside the store when empty
  std::string beat_name = "stormlog";
  std::size_t batch_size = 1000;
  std::optional<std::int64_t> base_day_ms;
  std::size_t workers = 1;
};

// Shipper -> pipeline -> index store for every complete line not yet shipped.
// The store and dead letters are persisted before the registry.
IngestSummary ingest(const IngestOptions& options);

}  // namespace stormlog::cli
