#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "sdg/core/text.hpp"
#include "sdg/error.hpp"
#include "sdg/prompts.hpp"
#include "sdg/service/http_service.hpp"
#include "sdg/service/job_manager.hpp"
#include "sdg/service/pipeline.hpp"
#include "test_support.hpp"

using namespace sdg;
using namespace sdg::service;
using namespace std::chrono_literals;

namespace {

// Generation calls take `latency_ms` each; everything else uses the defaults.
JobManager::Options manager_options(const fs::path& data_dir, int latency_ms = 0, std::size_t max_jobs = 1) {
  JobManager::Options o;
  o.data_dir = data_dir;
  o.max_jobs = max_jobs;
  o.make_gateway = [latency_ms] {
    if (latency_ms > 0) {
      auto backend = std::make_shared<llm::MockBackend>();
      auto defaults = llm::default_pipeline_rules();
      for (auto& r : defaults) {
        if (r.name == "generation") r.latency_ms = latency_ms;
      }
      backend->add_rules(std::move(defaults));
      return std::make_shared<llm::Gateway>(backend);
    }
    return sdg::testing::scripted_llm().gateway;
  };
  return o;
}

std::vector<JobEvent> all_events(const JobManager& m, const std::string& id) {
  auto batch = m.events_since(id, 0, 0ms);
  return batch ? batch->events : std::vector<JobEvent>{};
}

bool wait_for_phase(const JobManager& m, const std::string& id, JobPhase phase, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (m.get(id)->state.phase == phase) return true;
    std::this_thread::sleep_for(5ms);
  }
  return false;
}

JobEvent ev(std::int64_t seq, const std::string& kind, json payload = json::object()) {
  return {"j", seq, kind, std::move(payload), 0.0};
}

}  // namespace

TEST(Events, FoldCountersAndTerminalStickiness) {
  std::vector<JobEvent> events{
      ev(0, event::kStarted, {{"requested", 5}, {"steps", {"a", "b"}}}),
      ev(1, event::kStepStarted, {{"step", "a"}}),
      ev(2, event::kTokens, {{"prompt", 10}, {"completion", 4}}),
      ev(3, event::kTokens, {{"prompt", 1}, {"completion", 1}}),
      ev(4, event::kStepStarted, {{"step", "b"}}),
      ev(5, event::kStepDone, {{"step", "b"}, {"result", {{"produced", 5}}}}),
      ev(6, event::kFinished, {{"produced", 5}, {"elapsed_s", 1.5}}),
      ev(7, event::kFailed, {{"error", "late"}}),
  };
  auto s = fold_events("j", events);
  EXPECT_EQ(s.phase, JobPhase::Completed);
  EXPECT_EQ(s.requested, 5);
  EXPECT_EQ(s.produced, 5);
  EXPECT_EQ(s.tokens_prompt, 11);
  EXPECT_EQ(s.tokens_completion, 5);
  EXPECT_DOUBLE_EQ(s.elapsed_s, 1.5);
  EXPECT_FALSE(s.error);
  ASSERT_EQ(s.steps.size(), 2u);
  EXPECT_EQ(s.steps[0].status, StepStatus::Done);
  EXPECT_EQ(s.steps[1].status, StepStatus::Done);
  EXPECT_EQ(job_event_from_json(to_json(events[2])), events[2]);
}

TEST(Events, FailureClosesActiveStep) {
  auto s = fold_events("j", {ev(0, event::kStarted, {{"steps", {"a"}}}), ev(1, event::kStepStarted, {{"step", "a"}}),
                             ev(2, event::kFailed, {{"error", "boom"}})});
  EXPECT_EQ(s.phase, JobPhase::Failed);
  EXPECT_EQ(s.error, "boom");
  EXPECT_EQ(s.steps[0].status, StepStatus::Failed);
}

TEST(Pipeline, StepNamesAndCliJobId) {
  auto cfg = validate_config(sdg::testing::local_config_json("/tmp/out", 3));
  EXPECT_EQ(generate_steps(cfg),
            (std::vector<std::string>{"task_parsing", "prepare", "construct_constraints", "data_acquisition",
                                      "structure_process"}));
  EXPECT_EQ(cli_job_id("abc"), "cli-" + text::sha256_hex("abc").substr(0, 12));
  EXPECT_EQ(train_steps().size(), 3u);
}

TEST(JobManager, CompletedJobStateEqualsFoldOfItsEvents) {
  sdg::testing::TempDir dir;
  JobManager m(manager_options(dir.path()));
  const auto id = m.submit(JobType::Generate, sdg::testing::local_config_json("/ignored", 12));
  ASSERT_TRUE(m.wait_terminal(id, 60s));
  auto info = *m.get(id);
  EXPECT_EQ(info.state.phase, JobPhase::Completed) << info.state.error.value_or("");
  EXPECT_EQ(info.state.produced, 12);
  EXPECT_EQ(info.state.requested, 12);
  EXPECT_GT(info.state.tokens_prompt, 0);
  EXPECT_EQ(info.output_dir, dir / "jobs" / id / "output");
  auto events = all_events(m, id);
  for (std::size_t i = 0; i < events.size(); ++i) EXPECT_EQ(events[i].seq, static_cast<std::int64_t>(i));
  EXPECT_EQ(fold_events(id, events), info.state);
  ASSERT_TRUE(m.samples_path(id));
  EXPECT_EQ(read_jsonl(*m.samples_path(id)).size(), 12u);
  EXPECT_EQ(m.cancel(id), JobManager::CancelResult::AlreadyTerminal);
  EXPECT_EQ(m.cancel("job-missing"), JobManager::CancelResult::NotFound);
}

TEST(JobManager, InvalidConfigIsRejectedAtSubmit) {
  sdg::testing::TempDir dir;
  JobManager m(manager_options(dir.path()));
  EXPECT_THROW(m.submit(JobType::Generate, json{{"task", {{"path", "nowhere"}}}}), ConfigError);
  EXPECT_TRUE(m.list().empty());
}

TEST(JobManager, IllegalTransitions) {
  sdg::testing::TempDir dir;
  JobManager m(manager_options(dir.path()));
  const auto id = m.submit(JobType::Generate, sdg::testing::local_config_json("/ignored", 2));
  ASSERT_TRUE(m.wait_terminal(id, 60s));
  try {
    m.transition(id, JobPhase::Running);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IllegalTransition);
  }
  EXPECT_FALSE(m.try_transition(id, JobPhase::Failed));
  EXPECT_THROW(m.transition("job-nope", JobPhase::Running), Error);
}

TEST(JobManager, CancelRunningJobAfterInFlightBatch) {
  sdg::testing::TempDir dir;
  JobManager m(manager_options(dir.path(), 150));
  auto cfg = sdg::testing::local_config_json("/ignored", 200);
  cfg["parallel"]["n_workers"] = 2;
  const auto id = m.submit(JobType::Generate, cfg);
  ASSERT_TRUE(wait_for_phase(m, id, JobPhase::Running, 10s));
  std::this_thread::sleep_for(300ms);
  const auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(m.cancel(id), JobManager::CancelResult::Accepted);
  ASSERT_TRUE(m.wait_terminal(id, 10s));
  EXPECT_LE(std::chrono::steady_clock::now() - start, 150ms + 2s);
  EXPECT_EQ(m.get(id)->state.phase, JobPhase::Cancelled);
  EXPECT_EQ(all_events(m, id).back().kind, event::kCancelled);
}

TEST(JobManager, CancelPendingJobIsImmediate) {
  sdg::testing::TempDir dir;
  JobManager m(manager_options(dir.path(), 100));
  auto slow = sdg::testing::local_config_json("/ignored", 100);
  slow["parallel"]["n_workers"] = 1;
  const auto first = m.submit(JobType::Generate, slow);
  const auto second = m.submit(JobType::Generate, sdg::testing::local_config_json("/ignored", 2));
  ASSERT_TRUE(wait_for_phase(m, first, JobPhase::Running, 10s));
  EXPECT_EQ(m.get(second)->state.phase, JobPhase::Pending);
  EXPECT_EQ(m.cancel(second), JobManager::CancelResult::Accepted);
  EXPECT_EQ(m.get(second)->state.phase, JobPhase::Cancelled);
  m.cancel(first);
  EXPECT_TRUE(m.wait_terminal(first, 10s));
}

TEST(JobManager, RestartMarksRunningJobsFailedAndRequeuesPending) {
  sdg::testing::TempDir dir;
  auto job_json = [](const std::string& id, std::uint64_t ord) {
    return json{{"job_id", id}, {"type", "generate"}, {"ordinal", ord}, {"created_at", 1.0},
                {"config", sdg::testing::local_config_json("/ignored", 2)}}
               .dump();
  };
  const auto running = dir / "jobs" / "job-running";
  sdg::testing::write_text(running / "job.json", job_json("job-running", 0));
  sdg::testing::write_text(running / "events.jsonl",
                      to_json(JobEvent{"job-running", 0, event::kStarted, {{"requested", 2}}, 2.0}).dump() + "\n" +
                          R"({"job_id":"job-running","seq":1,"kind":"log_l)");
  const auto pending = dir / "jobs" / "job-pending";
  sdg::testing::write_text(pending / "job.json", job_json("job-pending", 1));

  JobManager m(manager_options(dir.path()));
  auto r = *m.get("job-running");
  EXPECT_EQ(r.state.phase, JobPhase::Failed);
  EXPECT_EQ(r.state.error, "service_restart");
  // The torn line was dropped and the failure appended after the surviving event.
  auto lines = text::read_file(running / "events.jsonl");
  EXPECT_EQ(std::count(lines.begin(), lines.end(), '\n'), 2);
  EXPECT_TRUE(m.wait_terminal("job-pending", 60s));
  EXPECT_EQ(m.get("job-pending")->state.phase, JobPhase::Completed);
  EXPECT_EQ(m.list().size(), 2u);
  EXPECT_EQ(m.list()[0].ordinal, 0u);
}

class HttpApi : public ::testing::Test {
 protected:
  void SetUp() override {
    jobs = std::make_unique<JobManager>(manager_options(dir.path()));
    http = std::make_unique<HttpService>(*jobs);
    port = http->start("127.0.0.1", 0);
    ASSERT_GT(port, 0);
  }
  void TearDown() override {
    http->stop();
    http.reset();
    jobs.reset();
  }

  std::string submit_local(int n) {
    auto r = sdg::testing::http_post(port, "/api/jobs",
                                json{{"type", "generate"}, {"config", sdg::testing::local_config_json("/x", n)}}.dump());
    EXPECT_EQ(r.status, 201) << r.body;
    return json::parse(r.body)["job_id"];
  }

  sdg::testing::TempDir dir;
  std::unique_ptr<JobManager> jobs;
  std::unique_ptr<HttpService> http;
  int port = 0;
};

TEST_F(HttpApi, HealthAndSubmissionErrors) {
  EXPECT_EQ(sdg::testing::http_get(port, "/api/health").status, 200);
  EXPECT_EQ(sdg::testing::http_post(port, "/api/jobs", "not json").status, 400);
  EXPECT_EQ(sdg::testing::http_post(port, "/api/jobs", R"({"type":"bake","config":{}})").status, 400);
  auto bad = sdg::testing::http_post(port, "/api/jobs", R"({"type":"generate","config":{"task":{"path":"local"}}})");
  EXPECT_EQ(bad.status, 422);
  auto body = json::parse(bad.body);
  ASSERT_TRUE(body["errors"].is_array());
  EXPECT_FALSE(body["errors"].empty());
  for (const auto& e : body["errors"]) {
    EXPECT_TRUE(e.contains("kind"));
    EXPECT_TRUE(e.contains("field"));
    EXPECT_TRUE(e.contains("message"));
  }
  EXPECT_EQ(sdg::testing::http_get(port, "/api/jobs/job-nope").status, 404);
  EXPECT_EQ(sdg::testing::http_post(port, "/api/jobs/job-nope/cancel", "").status, 404);
  EXPECT_EQ(sdg::testing::http_get(port, "/api/jobs/job-nope/samples").status, 404);
}

TEST_F(HttpApi, YamlConfigTextIsAccepted) {
  const auto yaml = text::read_file(sdg::testing::fixtures_dir() / "configs" / "local.yaml");
  auto r = sdg::testing::http_post(port, "/api/jobs", json{{"type", "generate"}, {"config", yaml}}.dump());
  EXPECT_EQ(r.status, 201) << r.body;
}

TEST_F(HttpApi, SseReplayReconstructsFinalState) {
  const auto id = submit_local(15);
  auto events = sdg::testing::sse_events(port, "/api/jobs/" + id + "/events", 60s);
  ASSERT_FALSE(events.empty());
  std::vector<JobEvent> parsed;
  for (const auto& e : events) parsed.push_back(job_event_from_json(e));
  EXPECT_EQ(parsed.back().kind, event::kFinished);
  auto got = json::parse(sdg::testing::http_get(port, "/api/jobs/" + id).body);
  EXPECT_EQ(job_state_from_json(got), fold_events(id, parsed));
  EXPECT_EQ(got["phase"], "completed");

  // Resuming from an event id replays only the tail.
  auto tail = sdg::testing::sse_events(port, "/api/jobs/" + id + "/events?from=3", 10s);
  ASSERT_EQ(tail.size(), events.size() - 3);
  EXPECT_EQ(tail.front()["seq"], 3);
}

TEST_F(HttpApi, SamplePagesConcatenateToDownload) {
  const auto id = submit_local(23);
  ASSERT_TRUE(jobs->wait_terminal(id, 60s));
  auto dl = sdg::testing::http_get(port, "/api/jobs/" + id + "/download");
  EXPECT_EQ(dl.status, 200);
  EXPECT_NE(dl.content_disposition.find("attachment"), std::string::npos);
  for (std::size_t limit : {1u, 5u, 7u, 50u}) {
    std::string joined;
    std::size_t total = 0;
    for (std::size_t offset = 0;; offset += limit) {
      // Parsed in key order so items re-serialise exactly as served.
      auto page = nlohmann::ordered_json::parse(
          sdg::testing::http_get(port, "/api/jobs/" + id + "/samples?offset=" + std::to_string(offset) +
                                      "&limit=" + std::to_string(limit))
              .body);
      total = page["total"];
      for (const auto& item : page["items"]) joined += item.dump() + "\n";
      if (offset + limit >= total) break;
    }
    EXPECT_EQ(total, 23u);
    EXPECT_EQ(joined, dl.body) << "limit " << limit;
  }
  auto big = json::parse(sdg::testing::http_get(port, "/api/jobs/" + id + "/samples?limit=5000").body);
  EXPECT_EQ(big["limit"], kMaxPageSize);
  EXPECT_EQ(sdg::testing::http_post(port, "/api/jobs/" + id + "/cancel", "").status, 409);
  auto list = json::parse(sdg::testing::http_get(port, "/api/jobs").body);
  EXPECT_EQ(list["jobs"].size(), 1u);
}
