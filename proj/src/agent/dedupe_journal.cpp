#include "fleetwarden/agent/dedupe_journal.hpp"

#include "fleetwarden/core/error.hpp"

#include <nlohmann/json.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

namespace fleetwarden {

namespace fs = std::filesystem;
using nlohmann::json;

std::optional<JournalRecord> MemoryDedupeJournal::find(std::string_view command_id) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(command_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void MemoryDedupeJournal::record_intent(const std::string& command_id, Timestamp expires_at) {
  std::lock_guard lock(mutex_);
  if (fail_writes_) throw Error(ErrorCode::kStorage, "journal write failed");
  entries_[command_id] = JournalRecord{expires_at, std::nullopt};
}

void MemoryDedupeJournal::record_outcome(const std::string& command_id, const ActionOutcome& outcome) {
  std::lock_guard lock(mutex_);
  if (fail_writes_) throw Error(ErrorCode::kStorage, "journal write failed");
  entries_[command_id].outcome = outcome;
}

void MemoryDedupeJournal::prune(Timestamp now) {
  std::lock_guard lock(mutex_);
  std::erase_if(entries_, [now](const auto& kv) { return kv.second.expires_at < now; });
}

std::size_t MemoryDedupeJournal::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void MemoryDedupeJournal::set_fail_writes(bool fail) {
  std::lock_guard lock(mutex_);
  fail_writes_ = fail;
}

// ---------------------------------------------------------------------------

namespace {

void apply_line(std::map<std::string, JournalRecord, std::less<>>& entries, const std::string& line) {
  auto j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return;  // torn tail
  const auto op = j.value("op", "");
  const auto id = j.value("id", "");
  if (id.empty()) return;
  if (op == "intent") {
    entries[id] = JournalRecord{j.value("expires_at", Timestamp{0}), std::nullopt};
  } else if (op == "outcome") {
    entries[id].outcome = ActionOutcome{j.value("ok", false), j.value("detail", "")};
  }
}

json intent_json(const std::string& id, Timestamp expires_at) {
  return {{"op", "intent"}, {"id", id}, {"expires_at", expires_at}};
}

json outcome_json(const std::string& id, const ActionOutcome& o) {
  return {{"op", "outcome"}, {"id", id}, {"ok", o.ok}, {"detail", o.detail}};
}

void write_all_synced(const fs::path& path, const std::string& bytes, int flags) {
  const int fd = ::open(path.c_str(), flags | O_CLOEXEC, 0600);
  if (fd < 0) throw Error(ErrorCode::kStorage, "cannot open journal " + path.string() + ": " + std::strerror(errno));
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      throw Error(ErrorCode::kStorage, "journal write failed: " + std::string(std::strerror(errno)));
    }
    done += static_cast<std::size_t>(n);
  }
  const int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) throw Error(ErrorCode::kStorage, "journal fsync failed");
}

}  // namespace

FileDedupeJournal::FileDedupeJournal(fs::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  for (std::string line; std::getline(in, line);) apply_line(entries_, line);
}

std::optional<JournalRecord> FileDedupeJournal::find(std::string_view command_id) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(command_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void FileDedupeJournal::write_line(const std::string& line) {
  write_all_synced(path_, line + "\n", O_WRONLY | O_APPEND | O_CREAT);
}

void FileDedupeJournal::record_intent(const std::string& command_id, Timestamp expires_at) {
  std::lock_guard lock(mutex_);
  write_line(intent_json(command_id, expires_at).dump());
  entries_[command_id] = JournalRecord{expires_at, std::nullopt};
}

void FileDedupeJournal::record_outcome(const std::string& command_id, const ActionOutcome& outcome) {
  std::lock_guard lock(mutex_);
  write_line(outcome_json(command_id, outcome).dump());
  entries_[command_id].outcome = outcome;
}

void FileDedupeJournal::prune(Timestamp now) {
  std::lock_guard lock(mutex_);
  const auto before = entries_.size();
  std::erase_if(entries_, [now](const auto& kv) { return kv.second.expires_at < now; });
  if (entries_.size() == before) return;
  std::string bytes;
  for (const auto& [id, rec] : entries_) {
    bytes += intent_json(id, rec.expires_at).dump() + "\n";
    if (rec.outcome) bytes += outcome_json(id, *rec.outcome).dump() + "\n";
  }
  auto tmp = path_;
  tmp += ".tmp";
  write_all_synced(tmp, bytes, O_WRONLY | O_CREAT | O_TRUNC);
  std::error_code ec;
  fs::rename(tmp, path_, ec);
  if (ec) throw Error(ErrorCode::kStorage, "cannot replace journal: " + ec.message());
}

std::size_t FileDedupeJournal::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

}  // namespace fleetwarden
