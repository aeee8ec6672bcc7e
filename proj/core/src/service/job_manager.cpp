#include "sdg/service/job_manager.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <random>

#include "sdg/core/config.hpp"
#include "sdg/core/text.hpp"
#include "sdg/error.hpp"
#include "sdg/service/pipeline.hpp"

namespace sdg::service {

namespace {

constexpr const char* kRestartError = "service_restart";

double unix_now() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

std::string new_job_id(std::uint64_t ordinal) {
  static std::mutex m;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(m);
  const auto seed = std::to_string(rng()) + ":" + std::to_string(ordinal) + ":" + std::to_string(unix_now());
  return "job-" + text::sha256_hex(seed).substr(0, 12);
}

// Forwards executor progress into the job's event log.
class EventSink : public ProgressSink {
 public:
  explicit EventSink(std::function<void(const char*, json)> emit) : emit_(std::move(emit)) {}
  void step_started(std::string_view step) override { emit_(event::kStepStarted, {{"step", step}}); }
  void step_done(std::string_view step, const json& payload) override {
    emit_(event::kStepDone, {{"step", step}, {"result", payload}});
  }
  void step_failed(std::string_view step, std::string_view error) override {
    emit_(event::kStepFailed, {{"step", step}, {"error", error}});
  }
  void item_done(std::string_view step, std::size_t index, bool ok) override {
    emit_(event::kItemDone, {{"step", step}, {"index", index}, {"ok", ok}});
  }
  void log_line(std::string_view line) override { emit_(event::kLogLine, {{"line", line}}); }

 private:
  std::function<void(const char*, json)> emit_;
};

fs::path output_subdir(JobType t) {
  switch (t) {
    case JobType::Generate: return "output";
    case JobType::Train: return "export";
    case JobType::Eval: return "eval";
  }
  return "output";
}

struct Prepared {
  std::optional<TaskConfig> generate;
  std::optional<TrainConfig> train;
  std::optional<EvalConfig> eval;
  std::int64_t requested = 0;
  std::vector<std::string> steps;
};

// Validates and redirects every output path under the job directory.
Prepared prepare(JobType type, const json& config, const fs::path& dir) {
  Prepared p;
  switch (type) {
    case JobType::Generate: {
      auto c = validate_config(config);
      c.output.dir = dir / output_subdir(type);
      c.parallel.checkpoint_dir.clear();
      p.requested = c.task.num_samples;
      p.steps = generate_steps(c);
      p.generate = std::move(c);
      break;
    }
    case JobType::Train: {
      auto c = validate_train_config(config);
      c.output_dir = dir / output_subdir(type);
      p.steps = train_steps();
      p.train = std::move(c);
      break;
    }
    case JobType::Eval: {
      auto c = validate_eval_config(config);
      c.output_dir = dir / output_subdir(type);
      p.steps = eval_steps();
      p.eval = std::move(c);
      break;
    }
  }
  return p;
}

}  // namespace

std::string_view to_string(JobType t) noexcept {
  switch (t) {
    case JobType::Generate: return "generate";
    case JobType::Train: return "train";
    case JobType::Eval: return "eval";
  }
  return "generate";
}

std::optional<JobType> parse_job_type(std::string_view s) noexcept {
  if (s == "generate") return JobType::Generate;
  if (s == "train") return JobType::Train;
  if (s == "eval") return JobType::Eval;
  return std::nullopt;
}

json to_json(const JobEvent& e) {
  return json{{"job_id", e.job_id}, {"seq", e.seq}, {"kind", e.kind}, {"payload", e.payload}, {"ts", e.ts}};
}

JobEvent job_event_from_json(const json& j) {
  JobEvent e;
  e.job_id = j.at("job_id").get<std::string>();
  e.seq = j.at("seq").get<std::int64_t>();
  e.kind = j.at("kind").get<std::string>();
  e.payload = j.value("payload", json::object());
  e.ts = j.value("ts", 0.0);
  return e;
}

void apply_event(JobState& s, const JobEvent& e) {
  if (is_terminal(s.phase)) return;
  const auto& p = e.payload;
  auto set_phase = [&](JobPhase to) {
    if (can_transition(s.phase, to)) s.phase = to;
  };
  auto close_active = [&](StepStatus status) {
    for (auto& st : s.steps) {
      if (st.status == StepStatus::Active) st.status = status;
    }
  };

  if (e.kind == event::kStarted) {
    set_phase(JobPhase::Running);
    s.requested = p.value("requested", s.requested);
    if (p.contains("steps")) {
      s.steps.clear();
      for (const auto& n : p["steps"]) s.steps.push_back({n.get<std::string>(), StepStatus::Waiting});
    }
  } else if (e.kind == event::kStepStarted) {
    s.activate_step(p.value("step", ""));
  } else if (e.kind == event::kStepDone) {
    s.finish_step(p.value("step", ""), StepStatus::Done);
    const auto& r = p.contains("result") ? p["result"] : json();
    if (r.is_object() && r.contains("produced")) s.produced = r["produced"].get<std::int64_t>();
  } else if (e.kind == event::kStepFailed) {
    s.finish_step(p.value("step", ""), StepStatus::Failed);
  } else if (e.kind == event::kTokens) {
    s.tokens_prompt += p.value("prompt", std::int64_t{0});
    s.tokens_completion += p.value("completion", std::int64_t{0});
  } else if (e.kind == event::kFinished) {
    close_active(StepStatus::Done);
    s.produced = p.value("produced", s.produced);
    s.elapsed_s = p.value("elapsed_s", s.elapsed_s);
    set_phase(JobPhase::Completed);
  } else if (e.kind == event::kFailed) {
    close_active(StepStatus::Failed);
    s.error = p.value("error", std::string("unknown error"));
    s.elapsed_s = p.value("elapsed_s", s.elapsed_s);
    set_phase(JobPhase::Failed);
  } else if (e.kind == event::kCancelled) {
    close_active(StepStatus::Failed);
    s.elapsed_s = p.value("elapsed_s", s.elapsed_s);
    set_phase(JobPhase::Cancelled);
  }
}

JobState fold_events(const std::string& job_id, const std::vector<JobEvent>& events) {
  JobState s;
  s.job_id = job_id;
  for (const auto& e : events) apply_event(s, e);
  return s;
}

json to_json(const JobInfo& info) {
  auto j = to_json(info.state);
  j["type"] = std::string(to_string(info.type));
  j["ordinal"] = info.ordinal;
  j["config"] = info.config;
  j["output_dir"] = info.output_dir.string();
  j["created_at"] = info.created_at;
  j["updated_at"] = info.updated_at;
  return j;
}

namespace {

const char* event_for_phase(JobPhase p) {
  switch (p) {
    case JobPhase::Running: return event::kStarted;
    case JobPhase::Completed: return event::kFinished;
    case JobPhase::Failed: return event::kFailed;
    case JobPhase::Cancelled: return event::kCancelled;
    case JobPhase::Pending: break;
  }
  return nullptr;
}

}  // namespace

JobManager::JobManager(Options options) : options_(std::move(options)) {
  fs::create_directories(options_.data_dir / "jobs");
  boot();
  const auto n = std::max<std::size_t>(1, options_.max_jobs);
  for (std::size_t i = 0; i < n; ++i) {
    workers_.emplace_back([this](std::stop_token st) { worker_loop(st); });
  }
}

JobManager::~JobManager() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
    for (auto& [id, job] : jobs_) {
      if (job.state.phase == JobPhase::Running) job.cancel.request();
    }
  }
  for (auto& w : workers_) w.request_stop();
  changed_.notify_all();
  workers_.clear();
}

fs::path JobManager::job_dir(const std::string& job_id) const { return options_.data_dir / "jobs" / job_id; }

void JobManager::boot() {
  std::vector<std::pair<std::uint64_t, std::string>> pending;
  for (const auto& entry : fs::directory_iterator(options_.data_dir / "jobs")) {
    if (!entry.is_directory()) continue;
    const auto meta_path = entry.path() / "job.json";
    if (!fs::exists(meta_path)) continue;
    const auto meta = json::parse(text::read_file(meta_path), nullptr, false);
    const auto type = meta.is_object() ? parse_job_type(meta.value("type", "")) : std::nullopt;
    if (!type) {
      spdlog::warn("skipping job directory with unreadable job.json: {}", entry.path().string());
      continue;
    }
    const auto id = meta.at("job_id").get<std::string>();
    Job job;
    job.type = *type;
    job.ordinal = meta.value("ordinal", std::uint64_t{0});
    job.config = meta.value("config", json::object());
    job.created_at = meta.value("created_at", 0.0);

    const auto events_path = entry.path() / "events.jsonl";
    bool rewrite = false;
    if (fs::exists(events_path)) {
      const auto content = text::read_file(events_path);
      std::size_t pos = 0;
      while (pos < content.size()) {
        const auto nl = content.find('\n', pos);
        if (nl == std::string::npos) {
          rewrite = true;  // torn tail from a crash mid-append
          break;
        }
        auto j = json::parse(content.substr(pos, nl - pos), nullptr, false);
        pos = nl + 1;
        if (j.is_discarded()) {
          rewrite = true;
          continue;
        }
        auto e = job_event_from_json(j);
        e.seq = static_cast<std::int64_t>(job.events.size());
        job.events.push_back(std::move(e));
      }
    }
    if (rewrite) {
      std::string out;
      for (const auto& e : job.events) out += to_json(e).dump() + "\n";
      text::write_file_atomic(events_path, out);
    }
    job.state = fold_events(id, job.events);
    job.log = std::make_unique<std::ofstream>(events_path, std::ios::app | std::ios::binary);
    next_ordinal_ = std::max(next_ordinal_, job.ordinal + 1);

    auto [it, _] = jobs_.emplace(id, std::move(job));
    if (it->second.state.phase == JobPhase::Running) {
      emit_locked(it->second, event::kFailed, {{"error", kRestartError}, {"code", kRestartError}});
    } else if (it->second.state.phase == JobPhase::Pending) {
      pending.emplace_back(it->second.ordinal, id);
    }
  }
  std::sort(pending.begin(), pending.end());
  for (auto& [_, id] : pending) queue_.push_back(id);
}

std::string JobManager::submit(JobType type, const json& config) {
  std::unique_lock lock(mutex_);
  const auto ordinal = next_ordinal_++;
  const auto id = new_job_id(ordinal);
  lock.unlock();

  prepare(type, config, job_dir(id));  // throws ConfigError

  const auto dir = job_dir(id);
  fs::create_directories(dir);
  text::write_file_atomic(dir / "config.json", config.dump(2) + "\n");
  const double created = unix_now();
  text::write_file_atomic(dir / "job.json", json{{"job_id", id},
                                                 {"type", std::string(to_string(type))},
                                                 {"ordinal", ordinal},
                                                 {"created_at", created},
                                                 {"config", config}}
                                                    .dump() +
                                                "\n");

  Job job;
  job.created_at = created;
  job.type = type;
  job.ordinal = ordinal;
  job.config = config;
  job.state.job_id = id;
  job.log = std::make_unique<std::ofstream>(dir / "events.jsonl", std::ios::app | std::ios::binary);

  lock.lock();
  jobs_.emplace(id, std::move(job));
  queue_.push_back(id);
  lock.unlock();
  changed_.notify_all();
  return id;
}

std::optional<JobInfo> JobManager::get(const std::string& job_id) const {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return std::nullopt;
  return info_locked(it->first, it->second);
}

JobInfo JobManager::info_locked(const std::string& id, const Job& job) const {
  JobInfo info;
  info.type = job.type;
  info.ordinal = job.ordinal;
  info.state = job.state;
  info.config = job.config;
  info.output_dir = job_dir(id) / output_subdir(job.type);
  info.created_at = job.created_at;
  info.updated_at = job.events.empty() ? job.created_at : job.events.back().ts;
  return info;
}

JobInfo JobManager::transition(const std::string& job_id, JobPhase to, json payload) {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw Error(Errc::NotFound, "no such job: " + job_id);
  auto& job = it->second;
  if (!can_transition(job.state.phase, to)) {
    throw Error(Errc::IllegalTransition, "illegal transition " + std::string(to_string(job.state.phase)) + " -> " +
                                             std::string(to_string(to)));
  }
  if (to == JobPhase::Running) {
    queue_.erase(std::remove(queue_.begin(), queue_.end(), job_id), queue_.end());
    job.started = std::chrono::steady_clock::now();
  }
  emit_locked(job, event_for_phase(to), std::move(payload));
  return info_locked(it->first, job);
}

bool JobManager::try_transition(const std::string& job_id, JobPhase to, json payload) {
  try {
    transition(job_id, to, std::move(payload));
    return true;
  } catch (const Error& e) {
    if (e.code() == Errc::NotFound) throw;
    return false;
  }
}

std::vector<JobInfo> JobManager::list() const {
  std::lock_guard lock(mutex_);
  std::vector<JobInfo> out;
  for (const auto& [id, job] : jobs_) out.push_back(info_locked(id, job));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.ordinal < b.ordinal; });
  return out;
}

JobManager::CancelResult JobManager::cancel(const std::string& job_id) {
  std::unique_lock lock(mutex_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return CancelResult::NotFound;
  auto& job = it->second;
  if (is_terminal(job.state.phase)) return CancelResult::AlreadyTerminal;
  job.cancel.request();
  if (job.state.phase == JobPhase::Pending) {
    queue_.erase(std::remove(queue_.begin(), queue_.end(), job_id), queue_.end());
    emit_locked(job, event::kStarted, json::object());
    emit_locked(job, event::kCancelled, {{"elapsed_s", 0.0}});
  }
  return CancelResult::Accepted;
}

std::optional<EventBatch> JobManager::events_since(const std::string& job_id, std::size_t from_seq,
                                                   std::chrono::milliseconds wait) const {
  std::unique_lock lock(mutex_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return std::nullopt;
  const Job& job = it->second;
  changed_.wait_for(lock, wait, [&] {
    return stopping_ || job.events.size() > from_seq || is_terminal(job.state.phase);
  });
  EventBatch batch;
  for (std::size_t i = from_seq; i < job.events.size(); ++i) batch.events.push_back(job.events[i]);
  batch.terminal = is_terminal(job.state.phase);
  return batch;
}

std::optional<fs::path> JobManager::samples_path(const std::string& job_id) const {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end() || it->second.type != JobType::Generate) return std::nullopt;
  auto p = job_dir(job_id) / "output" / "data.jsonl";
  if (!fs::exists(p)) return std::nullopt;
  return p;
}

bool JobManager::wait_terminal(const std::string& job_id, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return false;
  return changed_.wait_for(lock, timeout, [&] { return is_terminal(it->second.state.phase); });
}

double JobManager::elapsed_locked(const Job& job) const {
  if (job.state.phase != JobPhase::Running) return job.state.elapsed_s;
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - job.started).count();
}

bool JobManager::emit_locked(Job& job, const std::string& kind, json payload) {
  if (is_terminal(job.state.phase)) return false;
  JobEvent e;
  e.job_id = job.state.job_id;
  e.seq = static_cast<std::int64_t>(job.events.size());
  e.kind = kind;
  e.payload = std::move(payload);
  e.ts = unix_now();
  apply_event(job.state, e);
  if (job.log) {
    *job.log << to_json(e).dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    job.log->flush();
  }
  job.events.push_back(std::move(e));
  changed_.notify_all();
  return true;
}

bool JobManager::emit(const std::string& job_id, const std::string& kind, json payload) {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return false;
  return emit_locked(it->second, kind, std::move(payload));
}

void JobManager::worker_loop(std::stop_token stop) {
  for (;;) {
    std::string id;
    {
      std::unique_lock lock(mutex_);
      if (!changed_.wait(lock, stop, [&] { return !queue_.empty() || stopping_; })) return;
      if (stopping_) return;
      id = queue_.front();
      queue_.pop_front();
    }
    run_job(id);
  }
}

void JobManager::run_job(const std::string& id) {
  JobType type;
  json config;
  parallel::CancelToken cancel;
  {
    std::lock_guard lock(mutex_);
    auto& job = jobs_.at(id);
    if (job.state.phase != JobPhase::Pending) return;
    type = job.type;
    config = job.config;
    cancel = job.cancel;
  }

  const auto fail = [&](const std::string& message, std::string_view code, const std::string& step) {
    std::lock_guard lock(mutex_);
    auto& job = jobs_.at(id);
    if (job.state.phase == JobPhase::Pending) emit_locked(job, event::kStarted, json::object());
    emit_locked(job, event::kFailed,
                {{"error", message}, {"code", code}, {"step", step}, {"elapsed_s", elapsed_locked(job)}});
  };

  Prepared prepared;
  try {
    prepared = prepare(type, config, job_dir(id));
  } catch (const ConfigError& e) {
    fail(e.what(), to_string(e.code()), "");
    return;
  }
  {
    std::lock_guard lock(mutex_);
    auto& job = jobs_.at(id);
    job.started = std::chrono::steady_clock::now();
    emit_locked(job, event::kStarted, {{"requested", prepared.requested}, {"steps", prepared.steps}});
  }

  EventSink sink([this, &id](const char* kind, json payload) { emit(id, kind, std::move(payload)); });
  RunContext ctx;
  ctx.progress = &sink;
  ctx.cancel = cancel;
  ctx.job_id = id;
  ctx.make_gateway = options_.make_gateway;
  ctx.on_usage = [this, &id](const EndpointConfig& endpoint, const llm::ChatResponse& r) {
    emit(id, event::kTokens,
         {{"prompt", r.tokens_prompt}, {"completion", r.tokens_completion}, {"model", endpoint.model}});
  };

  try {
    json summary;
    std::int64_t produced = 0;
    switch (type) {
      case JobType::Generate: {
        auto s = run_generate(*prepared.generate, ctx);
        produced = static_cast<std::int64_t>(s.produced);
        summary = to_json(s);
        break;
      }
      case JobType::Train: {
        auto s = run_train(*prepared.train, job_dir(id) / "config.json", ctx);
        produced = static_cast<std::int64_t>(s.count);
        summary = to_json(s);
        break;
      }
      case JobType::Eval: {
        auto s = run_eval(*prepared.eval, ctx);
        produced = static_cast<std::int64_t>(s.report.value("items", 0));
        summary = to_json(s);
        break;
      }
    }
    std::lock_guard lock(mutex_);
    auto& job = jobs_.at(id);
    emit_locked(job, event::kFinished,
                {{"produced", produced}, {"elapsed_s", elapsed_locked(job)}, {"summary", summary}});
  } catch (const Error& e) {
    if (e.code() == Errc::Cancelled) {
      std::lock_guard lock(mutex_);
      auto& job = jobs_.at(id);
      emit_locked(job, event::kCancelled, {{"elapsed_s", elapsed_locked(job)}});
    } else {
      fail(e.what(), to_string(e.code()), e.step());
    }
  } catch (const std::exception& e) {
    fail(e.what(), "internal", "");
  }
}

}  // namespace sdg::service
