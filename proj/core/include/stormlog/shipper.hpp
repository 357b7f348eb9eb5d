#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stormlog/storm_codecs.hpp"

// File tailing with a persisted offset registry (the Filebeat analog).
//
// Delivery is at-least-once: a consumer acknowledges by checkpointing the
// registry returned together with a batch. Anything delivered after the last
// checkpoint is shipped again by the next run.
namespace stormlog::ship {

class ShipError : public Error {
 public:
  using Error::Error;
};

class RegistryError : public ShipError {
 public:
  using ShipError::ShipError;
};

class FrameError : public ShipError {
 public:
  FrameError(std::string message, std::size_t line)
      : ShipError(std::move(message) + " (frame line " + std::to_string(line) + ")"),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct FileIdentity {
  std::uint64_t device = 0;
  std::uint64_t inode = 0;

  friend bool operator==(const FileIdentity&, const FileIdentity&) = default;
};

struct TailState {
  std::int64_t offset = 0;
  FileIdentity identity;
  std::int64_t last_read_ms = 0;
  // Date context for time-of-day-only logs: the UTC day of the next line and
  // the time of day of the previous one (-1 before the first line).
  std::int64_t context_day_ms = 0;
  std::int64_t last_tod_ms = -1;

  friend bool operator==(const TailState&, const TailState&) = default;
};

struct TailRegistry {
  std::map<std::string, TailState> entries;
  std::uint64_t next_batch_id = 1;

  friend bool operator==(const TailRegistry&, const TailRegistry&) = default;
};

struct RawRecord {
  std::string line;
  std::string source;
  std::int64_t offset = 0;
  std::string beat_name;
  std::string doc_type = "log";
  storm::LogKind kind = storm::LogKind::FrontendServer;
  std::int64_t context_day_ms = 0;

  friend bool operator==(const RawRecord&, const RawRecord&) = default;
};

struct Batch {
  std::uint64_t batch_id = 0;
  std::vector<RawRecord> records;

  friend bool operator==(const Batch&, const Batch&) = default;
};

struct TailOptions {
  std::string beat_name = "localhost";
  std::size_t max_records = 1000;
  // Date context for a time-of-day log seen for the first time. Falls back
  // to the rotation suffix date, then the file's modification day.
  std::optional<std::int64_t> base_day_ms;
};

struct TailResult {
  Batch batch;
  TailRegistry registry;
};

// Reads up to `max_records` complete lines starting at the stored offset. A
// trailing partial line stays unread. A changed file identity or a file
// shorter than the stored offset restarts from offset 0.
TailResult tail_once(const TailRegistry& registry, const std::string& path,
                     const TailOptions& options);

// Atomic write-then-rename.
void checkpoint(const TailRegistry& registry, const std::filesystem::path& store);

// A missing file yields an empty registry; unreadable content throws
// RegistryError.
TailRegistry load_registry(const std::filesystem::path& store);

std::string registry_to_text(const TailRegistry& registry);
TailRegistry registry_from_text(std::string_view text);

// Newline-delimited JSON: one header line {"batch_id","count"} followed by
// one line per record with keys line, source, offset, beat.name, type, kind,
// context_date, in that order.
std::string frame_batch(const Batch& batch);
// One record line of the frame format, without the trailing newline.
std::string record_to_text(const RawRecord& record);
RawRecord record_from_text(std::string_view line);
Batch unframe_batch(std::string_view bytes);

// Ordered in-process hand-off between a shipper and a pipeline worker.
class InProcessChannel {
 public:
  void push(Batch batch);
  // Blocks until a batch is available or the channel is closed and drained.
  std::optional<Batch> pop();
  void close();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Batch> queue_;
  bool closed_ = false;
};

// Writes framed batches to a file descriptor (pipe, socket, file). Each frame
// is prefixed with its byte length on its own line.
class FdBatchWriter {
 public:
  explicit FdBatchWriter(int fd) : fd_(fd) {}
  void write(const Batch& batch);

 private:
  int fd_;
};

class FdBatchReader {
 public:
  explicit FdBatchReader(int fd) : fd_(fd) {}
  // Absent at clean end of stream.
  std::optional<Batch> read();

 private:
  bool fill();

  int fd_;
  std::string buffer_;
  bool eof_ = false;
};

struct ShipperConfig {
  std::filesystem::path registry_path;
  TailOptions tail;
  // When false the caller acknowledges with commit().
  bool checkpoint_after_delivery = true;
};

class Shipper {
 public:
  explicit Shipper(ShipperConfig config);

  // Ships every complete line currently available in `paths`, in file
  // order, one batch at a time. Returns the number of records delivered.
  std::size_t drain(std::span<const std::string> paths,
                    const std::function<void(const Batch&)>& deliver);

  // Persists the in-memory registry.
  void commit();

  const TailRegistry& registry() const { return registry_; }

 private:
  ShipperConfig config_;
  TailRegistry registry_;
};

}  // namespace stormlog::ship
