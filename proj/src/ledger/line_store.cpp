#include "fleetwarden/ledger/line_store.hpp"

#include "fleetwarden/core/error.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

namespace fleetwarden {

namespace fs = std::filesystem;

std::string status_stream(std::string_view agent_id) { return "status/" + std::string(agent_id); }

std::size_t split_lines(std::string_view bytes, std::vector<std::string>& out) {
  std::size_t start = 0;
  while (start < bytes.size()) {
    const auto nl = bytes.find('\n', start);
    if (nl == std::string_view::npos) break;
    out.emplace_back(bytes.substr(start, nl - start));
    start = nl + 1;
  }
  return start;
}

// ---------------------------------------------------------------------------

StreamPosition MemoryLineStore::append(const std::string& stream, std::string_view line,
                                       const AppendGuard& guard) {
  if (line.find('\n') != std::string_view::npos) {
    throw Error(ErrorCode::kValidation, "record contains a newline");
  }
  std::lock_guard append_lock(append_mutex_);
  if (guard) guard();
  StreamPosition pos;
  {
    std::unique_lock lock(data_mutex_);
    auto& buf = data_[stream];
    // Terminate a torn tail so it stays a separate (skipped) line.
    if (!buf.empty() && buf.back() != '\n') buf.push_back('\n');
    pos.offset = buf.size();
    buf.append(line);
    buf.push_back('\n');
  }
  if (observer_) observer_(stream, line);
  return pos;
}

void MemoryLineStore::append_raw(const std::string& stream, std::string_view bytes) {
  std::lock_guard append_lock(append_mutex_);
  std::unique_lock lock(data_mutex_);
  data_[stream].append(bytes);
}

void MemoryLineStore::set_observer(Observer observer) {
  std::lock_guard append_lock(append_mutex_);
  observer_ = std::move(observer);
}

ReadChunk MemoryLineStore::read(const std::string& stream, StreamPosition from) const {
  ReadChunk chunk;
  chunk.next = from;
  std::shared_lock lock(data_mutex_);
  auto it = data_.find(stream);
  if (it == data_.end() || from.offset >= it->second.size()) return chunk;
  std::string_view rest(it->second);
  rest.remove_prefix(from.offset);
  const auto consumed = split_lines(rest, chunk.lines);
  chunk.next.offset += consumed;
  chunk.torn_tail = consumed < rest.size();
  return chunk;
}

std::vector<std::string> MemoryLineStore::streams() const {
  std::shared_lock lock(data_mutex_);
  std::vector<std::string> names;
  names.reserve(data_.size());
  for (const auto& [name, _] : data_) names.push_back(name);
  return names;
}

// ---------------------------------------------------------------------------

namespace {

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

[[noreturn]] void io_error(const std::string& what, const fs::path& path) {
  throw Error(ErrorCode::kTransportUnavailable, what + " " + path.string() + ": " + std::strerror(errno));
}

std::uint64_t inode_of(const fs::path& path) {
  struct stat st {};
  if (::stat(path.c_str(), &st) != 0) return 0;
  return static_cast<std::uint64_t>(st.st_ino);
}

// Reads [offset, EOF) of a file into `chunk`, advancing chunk.next.offset
// past complete lines only.
void read_file_from(const fs::path& path, std::uint64_t offset, ReadChunk& chunk) {
  Fd fd(::open(path.c_str(), O_RDONLY | O_CLOEXEC));
  if (fd.get() < 0) {
    if (errno == ENOENT) return;
    io_error("cannot open", path);
  }
  struct stat st {};
  if (::fstat(fd.get(), &st) != 0) io_error("cannot stat", path);
  const auto size = static_cast<std::uint64_t>(st.st_size);
  if (offset >= size) return;
  std::string bytes(size - offset, '\0');
  std::size_t got = 0;
  while (got < bytes.size()) {
    const auto n = ::pread(fd.get(), bytes.data() + got, bytes.size() - got, static_cast<off_t>(offset + got));
    if (n < 0) {
      if (errno == EINTR) continue;
      io_error("cannot read", path);
    }
    if (n == 0) break;
    got += static_cast<std::size_t>(n);
  }
  bytes.resize(got);
  const auto consumed = split_lines(bytes, chunk.lines);
  chunk.next.offset = offset + consumed;
  chunk.torn_tail = consumed < bytes.size();
}

}  // namespace

FileLineStore::FileLineStore(fs::path root, FileLineStoreOptions options)
    : root_(std::move(root)), options_(options) {
  std::error_code ec;
  fs::create_directories(root_ / "status", ec);
  if (ec) throw Error(ErrorCode::kTransportUnavailable, "cannot create ledger root " + root_.string() + ": " + ec.message());
}

fs::path FileLineStore::path_for(const std::string& stream) const {
  if (stream == kCommandsStream) return root_ / "commands.log";
  constexpr std::string_view prefix = "status/";
  if (stream.rfind(prefix, 0) == 0) return root_ / "status" / (stream.substr(prefix.size()) + ".log");
  throw Error(ErrorCode::kInvalidArgument, "unknown ledger stream " + stream);
}

StreamPosition FileLineStore::append(const std::string& stream, std::string_view line, const AppendGuard& guard) {
  if (line.find('\n') != std::string_view::npos) {
    throw Error(ErrorCode::kValidation, "record contains a newline");
  }
  const auto path = path_for(stream);
  std::lock_guard lock(mutex_);

  Fd fd(::open(path.c_str(), O_RDWR | O_APPEND | O_CREAT | O_CLOEXEC, 0644));
  if (fd.get() < 0) io_error("cannot open", path);
  while (::flock(fd.get(), LOCK_EX) != 0) {
    if (errno != EINTR) io_error("cannot lock", path);
  }
  // The lock is released when fd closes.
  if (guard) guard();

  struct stat st {};
  if (::fstat(fd.get(), &st) != 0) io_error("cannot stat", path);
  std::string framed;
  if (st.st_size > 0) {
    // Terminate a torn tail so it stays a separate (skipped) line.
    char last = '\n';
    if (::pread(fd.get(), &last, 1, st.st_size - 1) == 1 && last != '\n') {
      framed.push_back('\n');
    }
  }
  const auto lead = framed.size();
  framed.append(line);
  framed.push_back('\n');

  const bool is_status = stream != kCommandsStream;
  if (is_status && options_.rotate_status_bytes > 0 && st.st_size > 0 &&
      static_cast<std::uint64_t>(st.st_size) + framed.size() > options_.rotate_status_bytes) {
    auto rotated = path;
    rotated += ".1";
    std::error_code ec;
    fs::rename(path, rotated, ec);
    if (ec) throw Error(ErrorCode::kTransportUnavailable, "cannot rotate " + path.string() + ": " + ec.message());
    Fd fresh(::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644));
    if (fresh.get() < 0) io_error("cannot open", path);
    if (::fstat(fresh.get(), &st) != 0) io_error("cannot stat", path);
    framed.erase(0, lead);
    if (::write(fresh.get(), framed.data(), framed.size()) != static_cast<ssize_t>(framed.size())) {
      io_error("short write to", path);
    }
    return {static_cast<std::uint64_t>(st.st_ino), 0};
  }

  const StreamPosition pos{static_cast<std::uint64_t>(st.st_ino), static_cast<std::uint64_t>(st.st_size) + lead};
  if (::write(fd.get(), framed.data(), framed.size()) != static_cast<ssize_t>(framed.size())) {
    io_error("short write to", path);
  }
  return pos;
}

ReadChunk FileLineStore::read(const std::string& stream, StreamPosition from) const {
  const auto path = path_for(stream);
  auto rotated = path;
  rotated += ".1";
  const auto current_id = inode_of(path);

  ReadChunk chunk;
  chunk.next = from;
  if (from.file_id == 0 || from.file_id != current_id) {
    // Either a fresh reader or the file rotated underneath it: drain the
    // retained previous generation first.
    const auto rotated_id = inode_of(rotated);
    if (rotated_id != 0 && (from.file_id == 0 || from.file_id == rotated_id)) {
      read_file_from(rotated, from.file_id == 0 ? 0 : from.offset, chunk);
    }
    chunk.torn_tail = false;
    chunk.next = {current_id, 0};
    if (current_id == 0) return chunk;
    read_file_from(path, 0, chunk);
    chunk.next.file_id = current_id;
    return chunk;
  }
  read_file_from(path, from.offset, chunk);
  return chunk;
}

std::vector<std::string> FileLineStore::streams() const {
  std::vector<std::string> names;
  std::error_code ec;
  if (fs::exists(root_ / "commands.log", ec)) names.emplace_back(kCommandsStream);
  for (fs::directory_iterator it(root_ / "status", ec), end; !ec && it != end; it.increment(ec)) {
    const auto name = it->path().filename().string();
    constexpr std::string_view suffix = ".log";
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      names.push_back(status_stream(name.substr(0, name.size() - suffix.size())));
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace fleetwarden
