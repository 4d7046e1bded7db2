#pragma once

#include "fleetwarden/agent/platform.hpp"
#include "fleetwarden/core/clock.hpp"

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>

namespace fleetwarden {

struct JournalRecord {
  Timestamp expires_at = 0;
  std::optional<ActionOutcome> outcome;  // absent: crashed between intent and outcome
};

/// Persisted set of command ids this agent has started executing. An id is
/// written before the platform action runs, so a replay never re-invokes it.
class DedupeJournal {
 public:
  virtual ~DedupeJournal() = default;
  virtual std::optional<JournalRecord> find(std::string_view command_id) const = 0;
  /// Throws Error(kStorage) if the intent could not be made durable.
  virtual void record_intent(const std::string& command_id, Timestamp expires_at) = 0;
  virtual void record_outcome(const std::string& command_id, const ActionOutcome& outcome) = 0;
  /// Forgets entries whose command expired before `now`.
  virtual void prune(Timestamp now) = 0;
  virtual std::size_t size() const = 0;
};

class MemoryDedupeJournal final : public DedupeJournal {
 public:
  std::optional<JournalRecord> find(std::string_view command_id) const override;
  void record_intent(const std::string& command_id, Timestamp expires_at) override;
  void record_outcome(const std::string& command_id, const ActionOutcome& outcome) override;
  void prune(Timestamp now) override;
  std::size_t size() const override;

  /// While set, every write throws Error(kStorage).
  void set_fail_writes(bool fail);

 private:
  mutable std::mutex mutex_;
  std::map<std::string, JournalRecord, std::less<>> entries_;
  bool fail_writes_ = false;
};

/// One JSON line per journal operation, fsync'd; pruning rewrites the file
/// atomically.
class FileDedupeJournal final : public DedupeJournal {
 public:
  explicit FileDedupeJournal(std::filesystem::path path);

  std::optional<JournalRecord> find(std::string_view command_id) const override;
  void record_intent(const std::string& command_id, Timestamp expires_at) override;
  void record_outcome(const std::string& command_id, const ActionOutcome& outcome) override;
  void prune(Timestamp now) override;
  std::size_t size() const override;

 private:
  void write_line(const std::string& line);

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, JournalRecord, std::less<>> entries_;
};

}  // namespace fleetwarden
