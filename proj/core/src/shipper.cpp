#include "stormlog/shipper.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "stormlog/time.hpp"

namespace stormlog::ship {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::size_t kReadChunk = 1 << 20;

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

class Fd {
 public:
  explicit Fd(int fd) : fd_(fd) {}
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const { return fd_; }

 private:
  int fd_;
};

std::int64_t initial_day(const std::string& path, const struct stat& st,
                         const TailOptions& options) {
  if (options.base_day_ms) return time::day_start(*options.base_day_ms);
  if (auto d = storm::rotation_date(path)) return *d;
  return time::day_start(static_cast<std::int64_t>(st.st_mtime) * 1000);
}

// Advances the date context across midnight: a time of day more than 12 hours
// earlier than the previous line's means the next day.
void track_day(TailState& state, std::string_view line) {
  if (line.size() < 12) return;
  auto tod = time::parse_time_of_day(line.substr(0, 12));
  if (!tod) return;
  if (state.last_tod_ms >= 0 && *tod + 12 * time::kMillisPerHour < state.last_tod_ms) {
    state.context_day_ms += time::kMillisPerDay;
  }
  state.last_tod_ms = *tod;
}

ordered_json record_to_json(const RawRecord& r) {
  ordered_json j;
  j["line"] = r.line;
  j["source"] = r.source;
  j["offset"] = r.offset;
  j["beat.name"] = r.beat_name;
  j["type"] = r.doc_type;
  j["kind"] = std::string(storm::slug(r.kind));
  j["context_date"] = time::format_date(r.context_day_ms);
  return j;
}

RawRecord record_from_json(const json& j, std::size_t line_no) {
  try {
    RawRecord r;
    if (!j.is_object() || j.size() != 7) throw FrameError("record must have 7 keys", line_no);
    r.line = j.at("line").get<std::string>();
    r.source = j.at("source").get<std::string>();
    r.offset = j.at("offset").get<std::int64_t>();
    r.beat_name = j.at("beat.name").get<std::string>();
    r.doc_type = j.at("type").get<std::string>();
    auto kind = storm::parse_slug(j.at("kind").get<std::string>());
    if (!kind) throw FrameError("unknown kind", line_no);
    r.kind = *kind;
    auto day = time::parse_date(j.at("context_date").get<std::string>());
    if (!day) throw FrameError("bad context_date", line_no);
    r.context_day_ms = *day;
    if (r.offset < 0) throw FrameError("negative offset", line_no);
    if (r.beat_name.empty()) throw FrameError("empty beat.name", line_no);
    return r;
  } catch (const json::exception& e) {
    throw FrameError(std::string("malformed record: ") + e.what(), line_no);
  }
}

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ShipError(std::string("write failed: ") + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

}  // namespace

TailResult tail_once(const TailRegistry& registry, const std::string& path,
                     const TailOptions& options) {
  Fd fd(::open(path.c_str(), O_RDONLY | O_CLOEXEC));
  if (fd.get() < 0) {
    throw ShipError("cannot open '" + path + "': " + std::strerror(errno));
  }
  struct stat st {};
  if (::fstat(fd.get(), &st) != 0) {
    throw ShipError("cannot stat '" + path + "': " + std::strerror(errno));
  }
  const storm::LogKind kind = storm::classify_file(path);
  const FileIdentity identity{static_cast<std::uint64_t>(st.st_dev),
                              static_cast<std::uint64_t>(st.st_ino)};
  const auto size = static_cast<std::int64_t>(st.st_size);

  TailResult result{{}, registry};
  result.batch.batch_id = registry.next_batch_id;

  TailState state;
  auto it = registry.entries.find(path);
  if (it != registry.entries.end() && it->second.identity == identity &&
      it->second.offset <= size) {
    state = it->second;
  } else {
    state.offset = 0;
    state.identity = identity;
    state.context_day_ms = initial_day(path, st, options);
    state.last_tod_ms = -1;
  }
  const bool reset = it == registry.entries.end() || !(state == it->second);

  std::int64_t offset = state.offset;
  std::string carry;
  std::vector<char> buf(kReadChunk);
  while (result.batch.records.size() < options.max_records && offset < size) {
    ssize_t n = ::pread(fd.get(), buf.data(), buf.size(),
                        offset + static_cast<std::int64_t>(carry.size()));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ShipError("read failed on '" + path + "': " + std::strerror(errno));
    }
    if (n == 0) break;
    carry.append(buf.data(), static_cast<std::size_t>(n));
    std::size_t start = 0;
    while (result.batch.records.size() < options.max_records) {
      auto nl = carry.find('\n', start);
      if (nl == std::string::npos) break;
      RawRecord rec;
      rec.line = carry.substr(start, nl - start);
      rec.source = path;
      rec.offset = offset + static_cast<std::int64_t>(start);
      rec.beat_name = options.beat_name;
      rec.kind = kind;
      if (!storm::has_calendar_date(kind)) track_day(state, rec.line);
      rec.context_day_ms = state.context_day_ms;
      result.batch.records.push_back(std::move(rec));
      start = nl + 1;
    }
    offset += static_cast<std::int64_t>(start);
    carry.erase(0, start);
    if (carry.size() > (64u << 20)) {
      throw ShipError("line longer than 64 MiB in '" + path + "'");
    }
  }

  if (!result.batch.records.empty()) {
    state.offset = offset;
    state.last_read_ms = now_ms();
    result.registry.entries[path] = state;
    ++result.registry.next_batch_id;
  } else if (reset) {
    result.registry.entries[path] = state;
  }
  return result;
}

std::string registry_to_text(const TailRegistry& registry) {
  ordered_json j;
  j["version"] = 1;
  j["next_batch_id"] = registry.next_batch_id;
  ordered_json entries = ordered_json::object();
  for (const auto& [path, s] : registry.entries) {
    ordered_json e;
    e["offset"] = s.offset;
    e["device"] = s.identity.device;
    e["inode"] = s.identity.inode;
    e["last_read_ms"] = s.last_read_ms;
    e["context_day_ms"] = s.context_day_ms;
    e["last_tod_ms"] = s.last_tod_ms;
    entries[path] = e;
  }
  j["entries"] = entries;
  return j.dump(2) + "\n";
}

TailRegistry registry_from_text(std::string_view text) {
  try {
    auto j = json::parse(text);
    if (j.at("version").get<int>() != 1) throw RegistryError("unsupported registry version");
    TailRegistry r;
    r.next_batch_id = j.at("next_batch_id").get<std::uint64_t>();
    for (const auto& [path, e] : j.at("entries").items()) {
      TailState s;
      s.offset = e.at("offset").get<std::int64_t>();
      s.identity.device = e.at("device").get<std::uint64_t>();
      s.identity.inode = e.at("inode").get<std::uint64_t>();
      s.last_read_ms = e.at("last_read_ms").get<std::int64_t>();
      s.context_day_ms = e.at("context_day_ms").get<std::int64_t>();
      s.last_tod_ms = e.at("last_tod_ms").get<std::int64_t>();
      if (s.offset < 0) throw RegistryError("negative offset for '" + path + "'");
      r.entries.emplace(path, s);
    }
    return r;
  } catch (const json::exception& e) {
    throw RegistryError(std::string("corrupt registry: ") + e.what());
  }
}

void checkpoint(const TailRegistry& registry, const std::filesystem::path& store) {
  auto tmp = store;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ShipError("cannot write registry '" + tmp.string() + "'");
    out << registry_to_text(registry);
    out.flush();
    if (!out) throw ShipError("cannot write registry '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, store, ec);
  if (ec) throw ShipError("cannot replace registry '" + store.string() + "': " + ec.message());
}

TailRegistry load_registry(const std::filesystem::path& store) {
  std::ifstream in(store, std::ios::binary);
  if (!in) return {};
  std::stringstream ss;
  ss << in.rdbuf();
  return registry_from_text(ss.str());
}

std::string frame_batch(const Batch& batch) {
  ordered_json header;
  header["batch_id"] = batch.batch_id;
  header["count"] = batch.records.size();
  std::string out = header.dump() + "\n";
  for (const auto& r : batch.records) out += record_to_json(r).dump() + "\n";
  return out;
}

Batch unframe_batch(std::string_view bytes) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) throw FrameError("missing final newline", lines.size() + 1);
    lines.push_back(bytes.substr(pos, nl - pos));
    pos = nl + 1;
  }
  if (lines.empty()) throw FrameError("missing header", 1);
  Batch batch;
  std::size_t count = 0;
  try {
    auto header = json::parse(lines[0]);
    if (!header.is_object() || header.size() != 2) throw FrameError("bad header", 1);
    batch.batch_id = header.at("batch_id").get<std::uint64_t>();
    count = header.at("count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FrameError(std::string("malformed header: ") + e.what(), 1);
  }
  if (count != lines.size() - 1) throw FrameError("record count mismatch", lines.size());
  batch.records.reserve(count);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    json j;
    try {
      j = json::parse(lines[i]);
    } catch (const json::exception& e) {
      throw FrameError(std::string("malformed record: ") + e.what(), i + 1);
    }
    batch.records.push_back(record_from_json(j, i + 1));
  }
  return batch;
}

std::string record_to_text(const RawRecord& record) { return record_to_json(record).dump(); }

RawRecord record_from_text(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw FrameError(std::string("malformed record: ") + e.what(), 1);
  }
  return record_from_json(j, 1);
}

void InProcessChannel::push(Batch batch) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) throw ShipError("push on closed channel");
    queue_.push_back(std::move(batch));
  }
  cv_.notify_one();
}

std::optional<Batch> InProcessChannel::pop() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return !queue_.empty() || closed_; });
  if (queue_.empty()) return std::nullopt;
  Batch b = std::move(queue_.front());
  queue_.pop_front();
  return b;
}

void InProcessChannel::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

void FdBatchWriter::write(const Batch& batch) {
  std::string body = frame_batch(batch);
  write_all(fd_, std::to_string(body.size()) + "\n");
  write_all(fd_, body);
}

bool FdBatchReader::fill() {
  if (eof_) return false;
  char buf[65536];
  while (true) {
    ssize_t n = ::read(fd_, buf, sizeof(buf));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ShipError(std::string("read failed: ") + std::strerror(errno));
    }
    if (n == 0) {
      eof_ = true;
      return false;
    }
    buffer_.append(buf, static_cast<std::size_t>(n));
    return true;
  }
}

std::optional<Batch> FdBatchReader::read() {
  std::size_t nl;
  while ((nl = buffer_.find('\n')) == std::string::npos) {
    if (!fill()) {
      if (buffer_.empty()) return std::nullopt;
      throw FrameError("truncated length prefix", 0);
    }
  }
  std::size_t length = 0;
  try {
    length = std::stoull(buffer_.substr(0, nl));
  } catch (const std::exception&) {
    throw FrameError("bad length prefix", 0);
  }
  while (buffer_.size() < nl + 1 + length) {
    if (!fill()) throw FrameError("truncated frame", 0);
  }
  Batch b = unframe_batch(std::string_view(buffer_).substr(nl + 1, length));
  buffer_.erase(0, nl + 1 + length);
  return b;
}

Shipper::Shipper(ShipperConfig config) : config_(std::move(config)) {
  if (!config_.registry_path.empty()) registry_ = load_registry(config_.registry_path);
}

std::size_t Shipper::drain(std::span<const std::string> paths,
                           const std::function<void(const Batch&)>& deliver) {
  std::size_t delivered = 0;
  for (const auto& path : paths) {
    while (true) {
      auto result = tail_once(registry_, path, config_.tail);
      if (result.batch.records.empty()) {
        // A tail that delivers nothing can still register a file or a rotation.
        const bool changed = result.registry != registry_;
        registry_ = std::move(result.registry);
        if (changed && config_.checkpoint_after_delivery) commit();
        break;
      }
      deliver(result.batch);
      delivered += result.batch.records.size();
      registry_ = std::move(result.registry);
      if (config_.checkpoint_after_delivery) commit();
    }
  }
  return delivered;
}

void Shipper::commit() {
  if (!config_.registry_path.empty()) checkpoint(registry_, config_.registry_path);
}

}  // namespace stormlog::ship
