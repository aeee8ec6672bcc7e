#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sdg {

using json = nlohmann::json;

enum class JobPhase { Pending, Running, Completed, Failed, Cancelled };
enum class StepStatus { Waiting, Active, Done, Failed };

std::string_view to_string(JobPhase p) noexcept;
std::string_view to_string(StepStatus s) noexcept;
std::optional<JobPhase> parse_phase(std::string_view s) noexcept;
std::optional<StepStatus> parse_step_status(std::string_view s) noexcept;

bool is_terminal(JobPhase p) noexcept;
// pending -> running -> {completed | failed | cancelled}
bool can_transition(JobPhase from, JobPhase to) noexcept;

struct StepState {
  std::string name;
  StepStatus status = StepStatus::Waiting;

  bool operator==(const StepState&) const = default;
};

struct JobState {
  std::string job_id;
  JobPhase phase = JobPhase::Pending;
  std::vector<StepState> steps;
  std::int64_t produced = 0;
  std::int64_t requested = 0;
  std::int64_t tokens_prompt = 0;
  std::int64_t tokens_completion = 0;
  double elapsed_s = 0.0;
  std::optional<std::string> error;

  // Marks `name` active; any other active step becomes done. At most one step
  // is active at a time.
  void activate_step(std::string_view name);
  void finish_step(std::string_view name, StepStatus status = StepStatus::Done);

  bool operator==(const JobState&) const = default;
};

json to_json(const JobState& s);
JobState job_state_from_json(const json& j);

// Per-sample difficulty score: correct attempts over attempts_k.
struct AttemptRecord {
  std::string response_digest;
  bool correct = false;

  bool operator==(const AttemptRecord&) const = default;
};

struct EvalScore {
  std::size_t sample_ref = 0;
  double score = 0.0;
  std::vector<AttemptRecord> attempts;
  bool partial = false;  // fewer than attempts_k attempts could be evaluated

  bool operator==(const EvalScore&) const = default;
};

enum class Category { Solved, Learnable, Unsolved };
std::string_view to_string(Category c) noexcept;

json to_json(const EvalScore& s);

// Receives pipeline progress. Every hook has a no-op default so executors can
// run headless.
class ProgressSink {
 public:
  virtual ~ProgressSink() = default;
  virtual void step_started(std::string_view /*step*/) {}
  virtual void step_done(std::string_view /*step*/, const json& /*payload*/) {}
  virtual void step_failed(std::string_view /*step*/, std::string_view /*error*/) {}
  virtual void item_done(std::string_view /*step*/, std::size_t /*index*/, bool /*ok*/) {}
  virtual void log_line(std::string_view /*line*/) {}
};

inline ProgressSink& null_progress() {
  static ProgressSink sink;
  return sink;
}

}  // namespace sdg
