#include "sdg/parallel/ledger.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>

#include "sdg/core/text.hpp"
#include "sdg/error.hpp"

namespace sdg::parallel {

namespace {

[[noreturn]] void corrupt(const fs::path& path, std::size_t line, const std::string& why) {
  throw Error(Errc::CheckpointCorrupt,
              "checkpoint " + path.string() + " line " + std::to_string(line) + ": " + why);
}

json header_json(const LedgerHeader& h) {
  return json{{"type", "header"},   {"version", CheckpointLedger::kVersion}, {"run_id", h.run_id},
              {"count", h.count},   {"job_id", h.job_id},                    {"step", h.step}};
}

void write_all(int fd, const std::string& data, const fs::path& path) {
  std::size_t off = 0;
  while (off < data.size()) {
    auto n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::IoError, "write to " + path.string() + " failed: " + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

}  // namespace

json to_json(const LedgerEntry& e) {
  json j{{"type", "entry"},
         {"index", e.index},
         {"status", e.status == EntryStatus::Done ? "done" : "failed"},
         {"attempts", e.attempts}};
  if (e.status == EntryStatus::Done) {
    j["result"] = e.result;
  } else {
    j["error"] = e.error;
  }
  return j;
}

std::string make_run_id(const std::string& job_id, const std::string& step, std::size_t count) {
  return text::sha256_hex(job_id + "|" + step + "|" + std::to_string(count)).substr(0, 16);
}

fs::path ledger_path(const fs::path& dir, const std::string& run_id) { return dir / (run_id + ".ledger.jsonl"); }

std::size_t default_flush_interval() {
  if (const char* v = std::getenv("SDG_FLUSH_INTERVAL")) {
    char* end = nullptr;
    auto n = std::strtoul(v, &end, 10);
    if (end != v && *end == '\0' && n > 0) return n;
  }
  return 20;
}

LedgerContents read_ledger(const fs::path& path) {
  const std::string content = text::read_file(path);
  LedgerContents out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos < content.size()) {
    auto nl = content.find('\n', pos);
    if (nl == std::string::npos) {
      out.torn_tail = true;
      break;
    }
    std::string_view line(content.data() + pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) corrupt(path, line_no, "not a JSON object");
    try {
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        if (have_header) corrupt(path, line_no, "second header");
        if (j.at("version").get<int>() != CheckpointLedger::kVersion) corrupt(path, line_no, "unsupported version");
        out.header = {j.at("run_id").get<std::string>(), j.at("count").get<std::size_t>(),
                      j.at("job_id").get<std::string>(), j.at("step").get<std::string>()};
        have_header = true;
        continue;
      }
      if (type != "entry") corrupt(path, line_no, "unknown record type");
      if (!have_header) corrupt(path, line_no, "entry before header");
      LedgerEntry e;
      e.index = j.at("index").get<std::size_t>();
      const auto status = j.at("status").get<std::string>();
      if (status == "done") {
        e.status = EntryStatus::Done;
        e.result = j.at("result");
      } else if (status == "failed") {
        e.status = EntryStatus::Failed;
        e.error = j.at("error").get<std::string>();
      } else {
        corrupt(path, line_no, "unknown status '" + status + "'");
      }
      e.attempts = j.at("attempts").get<std::size_t>();
      if (e.index >= out.header.count) corrupt(path, line_no, "index out of range");
      if (!out.entries.emplace(e.index, std::move(e)).second) corrupt(path, line_no, "duplicate index");
    } catch (const json::exception& ex) {
      corrupt(path, line_no, ex.what());
    }
  }
  if (!have_header) corrupt(path, line_no, "missing header");
  return out;
}

CheckpointLedger::CheckpointLedger(const fs::path& path, const LedgerHeader& header, std::size_t flush_interval)
    : path_(path), flush_interval_(flush_interval == 0 ? 1 : flush_interval) {
  std::string initial = header_json(header).dump() + "\n";
  std::error_code ec;
  if (fs::exists(path_, ec)) {
    auto existing = read_ledger(path_);
    if (existing.header.run_id != header.run_id || existing.header.count != header.count) {
      throw Error(Errc::RunIdMismatch, "checkpoint " + path_.string() + " belongs to run " +
                                           existing.header.run_id + " (" + std::to_string(existing.header.count) +
                                           " items), not " + header.run_id + " (" + std::to_string(header.count) +
                                           " items)");
    }
    for (auto& [idx, entry] : existing.entries) {
      if (entry.status != EntryStatus::Done) continue;
      initial += to_json(entry).dump() + "\n";
      resumed_.emplace(idx, std::move(entry));
    }
  }
  // Fresh file or compaction: either way the replacement lands atomically.
  text::write_file_atomic(path_, initial);

  fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
  if (fd_ < 0) throw Error(Errc::IoError, "cannot open " + path_.string() + ": " + std::strerror(errno));
  ::fsync(fd_);
  last_sync_ = std::chrono::steady_clock::now();
}

CheckpointLedger::~CheckpointLedger() {
  if (fd_ >= 0) {
    ::fsync(fd_);
    ::close(fd_);
  }
}

void CheckpointLedger::append(const LedgerEntry& entry) {
  const std::string line = to_json(entry).dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
  std::lock_guard lock(mu_);
  write_all(fd_, line, path_);
  ++unsynced_;
  const auto now = std::chrono::steady_clock::now();
  if (unsynced_ >= flush_interval_ || now - last_sync_ >= std::chrono::seconds(2)) {
    ::fsync(fd_);
    unsynced_ = 0;
    last_sync_ = now;
  }
}

void CheckpointLedger::sync() {
  std::lock_guard lock(mu_);
  ::fsync(fd_);
  unsynced_ = 0;
  last_sync_ = std::chrono::steady_clock::now();
}

}  // namespace sdg::parallel
