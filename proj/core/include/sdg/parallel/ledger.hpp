#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>

namespace sdg::parallel {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum class EntryStatus { Done, Failed };

struct LedgerEntry {
  std::size_t index = 0;
  EntryStatus status = EntryStatus::Done;
  std::size_t attempts = 0;
  json result;        // set when Done
  std::string error;  // set when Failed

  bool operator==(const LedgerEntry&) const = default;
};

struct LedgerHeader {
  std::string run_id;
  std::size_t count = 0;
  std::string job_id;
  std::string step;
};

struct LedgerContents {
  LedgerHeader header;
  std::map<std::size_t, LedgerEntry> entries;
  bool torn_tail = false;  // last line had no terminating newline and was ignored
};

// Line-framed JSON records:
//   {"type":"header","version":1,"run_id":..,"count":..,"job_id":..,"step":..}
//   {"type":"entry","index":..,"status":"done"|"failed","attempts":..,"result"|"error":..}
// A record is only trusted once its newline is on disk, so a torn final line
// (process killed mid-write) is dropped. Any other malformed line, a duplicate
// index or an out-of-range index throws CheckpointCorrupt.
LedgerContents read_ledger(const fs::path& path);

// Hex prefix of sha256(job_id | step | count).
std::string make_run_id(const std::string& job_id, const std::string& step, std::size_t count);
fs::path ledger_path(const fs::path& dir, const std::string& run_id);

// Append-only ledger for one run. Opening an existing file resumes it: the
// file is compacted to its done entries (temp file + rename) so failed
// indexes are retried and every index still appears at most once.
class CheckpointLedger {
 public:
  static constexpr int kVersion = 1;

  // Throws CheckpointCorrupt, RunIdMismatch (existing header disagrees).
  CheckpointLedger(const fs::path& path, const LedgerHeader& header, std::size_t flush_interval);
  ~CheckpointLedger();
  CheckpointLedger(const CheckpointLedger&) = delete;
  CheckpointLedger& operator=(const CheckpointLedger&) = delete;

  // Done entries recovered when the ledger was opened.
  const std::map<std::size_t, LedgerEntry>& resumed() const noexcept { return resumed_; }

  // Thread-safe. The record reaches the file before this returns; fsync runs
  // every `flush_interval` records or every two seconds.
  void append(const LedgerEntry& entry);
  void sync();

  const fs::path& path() const noexcept { return path_; }

 private:
  fs::path path_;
  int fd_ = -1;
  std::size_t flush_interval_;
  std::size_t unsynced_ = 0;
  std::chrono::steady_clock::time_point last_sync_;
  std::map<std::size_t, LedgerEntry> resumed_;
  std::mutex mu_;
};

// SDG_FLUSH_INTERVAL if set to a positive integer, otherwise 20.
std::size_t default_flush_interval();

json to_json(const LedgerEntry& e);

}  // namespace sdg::parallel
