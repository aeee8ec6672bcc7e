#include "sdg/core/job_state.hpp"

namespace sdg {

std::string_view to_string(JobPhase p) noexcept {
  switch (p) {
    case JobPhase::Pending: return "pending";
    case JobPhase::Running: return "running";
    case JobPhase::Completed: return "completed";
    case JobPhase::Failed: return "failed";
    case JobPhase::Cancelled: return "cancelled";
  }
  return "pending";
}

std::string_view to_string(StepStatus s) noexcept {
  switch (s) {
    case StepStatus::Waiting: return "waiting";
    case StepStatus::Active: return "active";
    case StepStatus::Done: return "done";
    case StepStatus::Failed: return "failed";
  }
  return "waiting";
}

std::optional<JobPhase> parse_phase(std::string_view s) noexcept {
  for (auto p : {JobPhase::Pending, JobPhase::Running, JobPhase::Completed, JobPhase::Failed, JobPhase::Cancelled}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

std::optional<StepStatus> parse_step_status(std::string_view s) noexcept {
  for (auto st : {StepStatus::Waiting, StepStatus::Active, StepStatus::Done, StepStatus::Failed}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

bool is_terminal(JobPhase p) noexcept {
  return p == JobPhase::Completed || p == JobPhase::Failed || p == JobPhase::Cancelled;
}

bool can_transition(JobPhase from, JobPhase to) noexcept {
  if (from == JobPhase::Pending) return to == JobPhase::Running;
  if (from == JobPhase::Running) return is_terminal(to);
  return false;
}

void JobState::activate_step(std::string_view name) {
  bool found = false;
  for (auto& s : steps) {
    if (s.name == name) {
      s.status = StepStatus::Active;
      found = true;
    } else if (s.status == StepStatus::Active) {
      s.status = StepStatus::Done;
    }
  }
  if (!found) steps.push_back({std::string(name), StepStatus::Active});
}

void JobState::finish_step(std::string_view name, StepStatus status) {
  for (auto& s : steps) {
    if (s.name == name) {
      s.status = status;
      return;
    }
  }
  steps.push_back({std::string(name), status});
}

json to_json(const JobState& s) {
  json steps = json::array();
  for (const auto& st : s.steps) steps.push_back({{"name", st.name}, {"status", std::string(to_string(st.status))}});
  json j{{"job_id", s.job_id},
         {"phase", std::string(to_string(s.phase))},
         {"steps", steps},
         {"produced", s.produced},
         {"requested", s.requested},
         {"tokens_prompt", s.tokens_prompt},
         {"tokens_completion", s.tokens_completion},
         {"elapsed_s", s.elapsed_s}};
  if (s.error) j["error"] = *s.error;
  return j;
}

JobState job_state_from_json(const json& j) {
  JobState s;
  s.job_id = j.at("job_id").get<std::string>();
  s.phase = parse_phase(j.at("phase").get<std::string>()).value_or(JobPhase::Failed);
  for (const auto& st : j.value("steps", json::array())) {
    s.steps.push_back({st.at("name").get<std::string>(),
                       parse_step_status(st.at("status").get<std::string>()).value_or(StepStatus::Waiting)});
  }
  s.produced = j.value("produced", std::int64_t{0});
  s.requested = j.value("requested", std::int64_t{0});
  s.tokens_prompt = j.value("tokens_prompt", std::int64_t{0});
  s.tokens_completion = j.value("tokens_completion", std::int64_t{0});
  s.elapsed_s = j.value("elapsed_s", 0.0);
  if (j.contains("error") && j["error"].is_string()) s.error = j["error"].get<std::string>();
  return s;
}

std::string_view to_string(Category c) noexcept {
  switch (c) {
    case Category::Solved: return "solved";
    case Category::Learnable: return "learnable";
    case Category::Unsolved: return "unsolved";
  }
  return "learnable";
}

json to_json(const EvalScore& s) {
  json attempts = json::array();
  for (const auto& a : s.attempts) attempts.push_back({{"response_digest", a.response_digest}, {"correct", a.correct}});
  json j{{"sample_ref", s.sample_ref}, {"score", s.score}, {"attempts", attempts}};
  if (s.partial) j["partial_eval"] = true;
  return j;
}

}  // namespace sdg
