#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace fleetwarden {

/// Resumption point inside one stream. `file_id` identifies the physical
/// generation (inode for files) so a reader notices rotation; 0 means
/// "from the start of retained history".
struct StreamPosition {
  std::uint64_t file_id = 0;
  std::uint64_t offset = 0;

  friend bool operator==(const StreamPosition&, const StreamPosition&) = default;
};

struct ReadChunk {
  std::vector<std::string> lines;  // complete lines, newline stripped
  StreamPosition next;
  bool torn_tail = false;  // trailing bytes without a newline were left unread
};

/// Append-only storage of newline-terminated records, grouped in named
/// streams ("commands", "status/<agent-id>").
class LineStore {
 public:
  /// Runs while the stream is exclusively locked for appending, before the
  /// write. Throwing aborts the append.
  using AppendGuard = std::function<void()>;

  virtual ~LineStore() = default;

  /// Appends `line` plus '\n' as one atomic write; returns the record start.
  virtual StreamPosition append(const std::string& stream, std::string_view line,
                                const AppendGuard& guard = {}) = 0;
  virtual ReadChunk read(const std::string& stream, StreamPosition from) const = 0;
  /// All stream names currently present, sorted.
  virtual std::vector<std::string> streams() const = 0;
};

inline constexpr std::string_view kCommandsStream = "commands";
std::string status_stream(std::string_view agent_id);

/// Splits `bytes` into complete lines; returns the count of bytes consumed.
std::size_t split_lines(std::string_view bytes, std::vector<std::string>& out);

class MemoryLineStore final : public LineStore {
 public:
  using Observer = std::function<void(const std::string& stream, std::string_view line)>;

  StreamPosition append(const std::string& stream, std::string_view line,
                        const AppendGuard& guard = {}) override;
  ReadChunk read(const std::string& stream, StreamPosition from) const override;
  std::vector<std::string> streams() const override;

  /// Writes raw bytes with no framing; used to model torn or corrupt writes.
  void append_raw(const std::string& stream, std::string_view bytes);
  /// Called after every successful append, still inside the append lock.
  void set_observer(Observer observer);

 private:
  mutable std::shared_mutex data_mutex_;
  std::mutex append_mutex_;
  std::map<std::string, std::string> data_;
  Observer observer_;
};

struct FileLineStoreOptions {
  /// Status files larger than this are rotated to `<id>.log.1` (one
  /// generation kept). 0 disables rotation. The command log never rotates.
  std::uint64_t rotate_status_bytes = 16ull << 20;
};

/// Shared-directory layout: `<root>/status/<agent-id>.log` and
/// `<root>/commands.log`. Appends take an exclusive flock so writers in
/// different processes never interleave; readers take no lock.
class FileLineStore final : public LineStore {
 public:
  explicit FileLineStore(std::filesystem::path root, FileLineStoreOptions options = {});

  StreamPosition append(const std::string& stream, std::string_view line,
                        const AppendGuard& guard = {}) override;
  ReadChunk read(const std::string& stream, StreamPosition from) const override;
  std::vector<std::string> streams() const override;

  std::filesystem::path path_for(const std::string& stream) const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  FileLineStoreOptions options_;
  std::mutex mutex_;
};

}  // namespace fleetwarden
