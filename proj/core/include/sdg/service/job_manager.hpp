#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sdg/core/job_state.hpp"
#include "sdg/llm/gateway.hpp"
#include "sdg/parallel/cancel.hpp"

namespace sdg::service {

using json = nlohmann::json;
namespace fs = std::filesystem;

enum class JobType { Generate, Train, Eval };
std::string_view to_string(JobType t) noexcept;
std::optional<JobType> parse_job_type(std::string_view s) noexcept;

// Event kinds. Job counters change only by folding these.
namespace event {
inline constexpr const char* kStarted = "started";  // {requested, steps}
inline constexpr const char* kStepStarted = "step_started";
inline constexpr const char* kStepDone = "step_done";
inline constexpr const char* kStepFailed = "step_failed";
inline constexpr const char* kItemDone = "item_done";
inline constexpr const char* kTokens = "tokens";  // {prompt, completion} deltas
inline constexpr const char* kLogLine = "log_line";
inline constexpr const char* kFinished = "finished";  // {produced, elapsed_s, summary}
inline constexpr const char* kFailed = "failed";      // {error, code, step, elapsed_s}
inline constexpr const char* kCancelled = "cancelled";
}  // namespace event

struct JobEvent {
  std::string job_id;
  std::int64_t seq = 0;  // 0-based, dense per job
  std::string kind;
  json payload = json::object();
  double ts = 0.0;  // unix seconds

  bool operator==(const JobEvent&) const = default;
};

json to_json(const JobEvent& e);
JobEvent job_event_from_json(const json& j);

// Folds one event into `state`. Events after a terminal one are ignored.
void apply_event(JobState& state, const JobEvent& e);
JobState fold_events(const std::string& job_id, const std::vector<JobEvent>& events);

struct JobInfo {
  JobType type = JobType::Generate;
  std::uint64_t ordinal = 0;  // submission order
  JobState state;
  json config;              // as submitted
  fs::path output_dir;      // output/, export/ or eval/ under the job directory
  double created_at = 0.0;  // unix seconds
  double updated_at = 0.0;  // timestamp of the latest event
};

json to_json(const JobInfo& info);

struct EventBatch {
  std::vector<JobEvent> events;
  bool terminal = false;  // no further events will follow the returned ones
};

class JobManager {
 public:
  struct Options {
    fs::path data_dir = "data";
    std::size_t max_jobs = 1;
    // Per-job gateway factory; default builds one from the environment.
    std::function<std::shared_ptr<llm::Gateway>()> make_gateway;
  };

  // Replays every job's events from disk. Jobs caught running are marked
  // failed("service_restart"); pending ones are queued again.
  explicit JobManager(Options options);
  // Cancels running jobs and waits for the workers.
  ~JobManager();

  JobManager(const JobManager&) = delete;
  JobManager& operator=(const JobManager&) = delete;

  // Validates `config` for `type` and queues the job. Throws ConfigError.
  std::string submit(JobType type, const json& config);

  std::optional<JobInfo> get(const std::string& job_id) const;
  std::vector<JobInfo> list() const;

  // Moves a job to `to`, persisting and emitting the matching event.
  // Throws NotFound, or IllegalTransition when `to` is not reachable.
  JobInfo transition(const std::string& job_id, JobPhase to, json payload = json::object());
  // As transition(), but a losing or illegal request is a no-op returning false.
  bool try_transition(const std::string& job_id, JobPhase to, json payload = json::object());

  enum class CancelResult { Accepted, NotFound, AlreadyTerminal };
  CancelResult cancel(const std::string& job_id);

  // Events with seq >= from_seq. Blocks up to `wait` when none is available
  // yet and the job is still live. nullopt for an unknown job.
  std::optional<EventBatch> events_since(const std::string& job_id, std::size_t from_seq,
                                         std::chrono::milliseconds wait) const;

  // data.jsonl of a generate job, once written.
  std::optional<fs::path> samples_path(const std::string& job_id) const;

  // Blocks until the job is terminal or the timeout passes.
  bool wait_terminal(const std::string& job_id, std::chrono::milliseconds timeout) const;

  fs::path job_dir(const std::string& job_id) const;
  const Options& options() const noexcept { return options_; }

 private:
  struct Job {
    JobType type = JobType::Generate;
    std::uint64_t ordinal = 0;
    json config;
    JobState state;
    std::vector<JobEvent> events;
    parallel::CancelToken cancel;
    std::unique_ptr<std::ofstream> log;
    double created_at = 0.0;
    std::chrono::steady_clock::time_point started;
  };

  void boot();
  void worker_loop(std::stop_token stop);
  void run_job(const std::string& job_id);
  // Appends under mutex_; dropped once the job is terminal.
  bool emit(const std::string& job_id, const std::string& kind, json payload);
  bool emit_locked(Job& job, const std::string& kind, json payload);
  double elapsed_locked(const Job& job) const;
  JobInfo info_locked(const std::string& id, const Job& job) const;

  Options options_;
  mutable std::mutex mutex_;
  mutable std::condition_variable_any changed_;
  std::map<std::string, Job> jobs_;
  std::deque<std::string> queue_;
  std::uint64_t next_ordinal_ = 0;
  bool stopping_ = false;
  std::vector<std::jthread> workers_;
};

}  // namespace sdg::service
