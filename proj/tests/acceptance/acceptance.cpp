// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Everything runs against the scripted LLM backend and the recorded hub fixtures.

#include <signal.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "sdg/adapters/adapters.hpp"
#include "sdg/core/config.hpp"
#include "sdg/core/sample.hpp"
#include "sdg/core/text.hpp"
#include "sdg/error.hpp"
#include "sdg/evaluation/evaluation.hpp"
#include "sdg/llm/mock_backend.hpp"
#include "sdg/parallel/executor.hpp"
#include "sdg/parallel/ledger.hpp"
#include "sdg/prompts.hpp"
#include "sdg/quality/quality.hpp"
#include "sdg/retrieval/bm25.hpp"
#include "sdg/service/http_service.hpp"
#include "sdg/service/job_manager.hpp"
#include "sdg/service/pipeline.hpp"
#include "test_support.hpp"

namespace {

using namespace sdg;
using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;
using testing::handler_rule;
using testing::literal;
using testing::text_rule;

// Pinned tolerances and sizes.
namespace pin {
constexpr std::size_t kScalingItems = 500;
constexpr int kScalingLatencyMs = 40;
constexpr double kScalingTolerance = 0.25;
constexpr double kScalingBudgetS = 60.0;
constexpr std::size_t kScalingWorkers[] = {1, 10, 25};

constexpr int kCrashTrials = 20;
constexpr int kCrashKills = 3;
constexpr std::size_t kCrashItems = 500;
constexpr int kCrashMaxDelayMs = 40;
constexpr int kCrashWorkers = 10;
constexpr int kKillAfterMinMs = 40;
constexpr int kKillAfterMaxMs = 250;

constexpr int kBm25Corpora = 200;
constexpr std::size_t kBm25MaxPassages = 50;
constexpr std::size_t kBm25MaxQueryTerms = 5;
constexpr double kBm25RelTolerance = 1e-9;

constexpr int kGenerateN = 50;
constexpr int kWebN = 8;

constexpr int kQualityPerBand = 10;

constexpr int kMonotonicityTrials = 100;

constexpr auto kCancelGrace = 2s;
constexpr int kCancelLatencyMs = 200;

constexpr std::size_t kTranslationN = 50;
}  // namespace pin

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome fail(std::string why) { return {false, std::move(why)}; }

double seconds(Clock::duration d) { return std::chrono::duration<double>(d).count(); }

// ---------------------------------------------------------------- 1

Outcome parallel_scaling() {
  auto backend = std::make_shared<llm::MockBackend>();
  llm::MockRule work;
  work.name = "fixed-latency";
  work.pattern = std::regex("^work ");
  work.response = std::string("done");
  work.latency_ms = pin::kScalingLatencyMs;
  backend->add_rule(work);
  llm::Gateway gateway(backend);
  const auto endpoint = testing::endpoint("worker");

  const auto suite_start = Clock::now();
  std::vector<double> walls;
  std::ostringstream detail;
  bool ok = true;
  for (std::size_t n : pin::kScalingWorkers) {
    parallel::ExecutorOptions opts;
    opts.n_workers = n;
    opts.retry_limit = 0;
    const auto start = Clock::now();
    auto run = parallel::execute_json(
        pin::kScalingItems,
        [&](std::size_t i) {
          llm::ChatRequest req;
          req.messages.push_back(llm::ChatMessage::user("work " + std::to_string(i)));
          return json(gateway.complete(endpoint, req).content);
        },
        opts);
    const double wall = seconds(Clock::now() - start);
    const double ideal =
        static_cast<double>((pin::kScalingItems + n - 1) / n) * pin::kScalingLatencyMs / 1000.0;
    const bool within = std::abs(wall - ideal) <= pin::kScalingTolerance * ideal;
    ok = ok && within && run.report.succeeded == pin::kScalingItems;
    detail << "n=" << n << " " << fmt::format("{:.3f}s/ideal {:.3f}s", wall, ideal) << (within ? "" : " (out of band)")
           << "; ";
    walls.push_back(wall);
  }
  for (std::size_t i = 1; i < walls.size(); ++i) {
    if (!(walls[i] < walls[i - 1])) {
      ok = false;
      detail << "not monotone; ";
    }
  }
  const double total = seconds(Clock::now() - suite_start);
  if (total >= pin::kScalingBudgetS) ok = false;
  detail << fmt::format("total {:.1f}s", total);
  return {ok, detail.str()};
}

// ---------------------------------------------------------------- 2

std::map<int, std::set<std::size_t>> read_invocations(const fs::path& log) {
  std::map<int, std::set<std::size_t>> by_pid;
  if (!fs::exists(log)) return by_pid;
  std::ifstream in(log);
  int pid = 0;
  std::size_t index = 0;
  while (in >> pid >> index) by_pid[pid].insert(index);
  return by_pid;
}

std::set<std::size_t> committed(const fs::path& ledger) {
  std::set<std::size_t> done;
  if (!fs::exists(ledger)) return done;
  auto contents = parallel::read_ledger(ledger);  // throws CheckpointCorrupt when unparseable
  for (const auto& [i, e] : contents.entries) {
    if (e.status == parallel::EntryStatus::Done) done.insert(i);
  }
  return done;
}

Outcome crash_resume() {
  const auto worker = testing::crash_worker_path().string();
  auto args = [&](const testing::TempDir& d) {
    return std::vector<std::string>{worker,
                                    (d / "cp").string(),
                                    (d / "invocations.log").string(),
                                    (d / "results.json").string(),
                                    std::to_string(pin::kCrashItems),
                                    std::to_string(pin::kCrashMaxDelayMs),
                                    std::to_string(pin::kCrashWorkers)};
  };

  // Uninterrupted reference run.
  testing::TempDir ref;
  if (testing::run_process(args(ref)).exit_code != 0) return fail("reference run failed");
  const auto reference = text::read_file(ref / "results.json");

  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> kill_after(pin::kKillAfterMinMs, pin::kKillAfterMaxMs);
  int kills_landed = 0;
  for (int trial = 0; trial < pin::kCrashTrials; ++trial) {
    testing::TempDir dir;
    const auto ledger =
        parallel::ledger_path(dir / "cp", parallel::make_run_id("crash-harness", "work", pin::kCrashItems));
    std::vector<std::pair<int, std::set<std::size_t>>> runs;  // pid, ledger-committed before it started
    try {
      for (int k = 0; k < pin::kCrashKills; ++k) {
        auto before = committed(ledger);
        const pid_t pid = testing::spawn_process(args(dir), {}, dir / "out.txt", dir / "err.txt");
        runs.emplace_back(pid, std::move(before));
        std::this_thread::sleep_for(std::chrono::milliseconds(kill_after(rng)));
        ::kill(pid, SIGKILL);
        if (testing::wait_process(pid) == 128 + SIGKILL) ++kills_landed;
        committed(ledger);
      }
      auto before = committed(ledger);
      const pid_t pid = testing::spawn_process(args(dir), {}, dir / "out.txt", dir / "err.txt");
      runs.emplace_back(pid, std::move(before));
      if (testing::wait_process(pid) != 0) return fail(fmt::format("trial {}: final run failed", trial));
      if (committed(ledger).size() != pin::kCrashItems) return fail(fmt::format("trial {}: ledger incomplete", trial));
    } catch (const Error& e) {
      return fail(fmt::format("trial {}: ledger unparseable: {}", trial, e.what()));
    }
    if (text::read_file(dir / "results.json") != reference) {
      return fail(fmt::format("trial {}: results differ from the uninterrupted run", trial));
    }
    // A process must never re-execute an index committed before it started.
    auto invocations = read_invocations(dir / "invocations.log");
    for (const auto& [pid, done_before] : runs) {
      for (auto i : invocations[pid]) {
        if (done_before.count(i)) return fail(fmt::format("trial {}: index {} executed after commit", trial, i));
      }
    }
  }
  const int expected = pin::kCrashTrials * pin::kCrashKills;
  if (kills_landed != expected) return fail(fmt::format("only {}/{} kills interrupted a run", kills_landed, expected));
  return {true, fmt::format("{} trials x {} SIGKILLs, results identical, at-most-once held", pin::kCrashTrials,
                            pin::kCrashKills)};
}

// ---------------------------------------------------------------- 3

Outcome bm25_oracle() {
  std::mt19937 rng(777);
  const double k1 = 1.2, b = 0.75;
  std::size_t comparisons = 0, tie_groups = 0;
  double worst = 0.0;
  for (int c = 0; c < pin::kBm25Corpora; ++c) {
    const std::size_t vocab = 3 + rng() % 25;
    auto word = [&] { return "w" + std::to_string(rng() % vocab); };
    const std::size_t n = 1 + rng() % pin::kBm25MaxPassages;
    std::vector<retrieval::Passage> passages;
    std::set<std::string> names;
    while (passages.size() < n) {
      std::string text;
      if (!passages.empty() && rng() % 6 == 0) {
        text = passages[rng() % passages.size()].text;  // duplicates force exact ties
      } else {
        for (std::size_t t = 0, len = 1 + rng() % 30; t < len; ++t) text += word() + " ";
      }
      auto name = "doc" + std::to_string(rng() % 200);
      const std::size_t ordinal = rng() % 3;
      if (!names.insert(name + "#" + std::to_string(ordinal)).second) continue;
      passages.push_back({{name, static_cast<std::uint32_t>(ordinal)}, text, name});
    }
    std::string query;
    for (std::size_t t = 0, len = 1 + rng() % pin::kBm25MaxQueryTerms; t < len; ++t) {
      query += (rng() % 8 == 0 ? std::string("absent") : word()) + " ";
    }

    // Brute force straight from the formula.
    std::vector<std::map<std::string, int>> tf(n);
    std::vector<double> len(n);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& tok : retrieval::tokenize(passages[i].text)) ++tf[i][tok];
      len[i] = static_cast<double>(retrieval::tokenize(passages[i].text).size());
      total += len[i];
    }
    const double avgdl = total / static_cast<double>(n);
    std::vector<double> expected(n, 0.0);
    for (const auto& term : retrieval::tokenize(query)) {
      std::size_t df = 0;
      for (std::size_t i = 0; i < n; ++i) df += tf[i].count(term);
      const double idf = std::log((static_cast<double>(n) - df + 0.5) / (df + 0.5) + 1.0);
      for (std::size_t i = 0; i < n; ++i) {
        auto it = tf[i].find(term);
        if (it == tf[i].end()) continue;
        const double f = it->second;
        expected[i] += idf * f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * len[i] / avgdl));
      }
    }
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < n; ++i) {
      if (expected[i] > 0) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      if (expected[x] != expected[y]) return expected[x] > expected[y];
      return passages[x].id < passages[y].id;
    });
    for (std::size_t i = 1; i < order.size(); ++i) tie_groups += expected[order[i]] == expected[order[i - 1]];

    auto index = retrieval::Bm25Index::build(passages, k1, b);
    const std::size_t k = 1 + rng() % (n + 3);
    auto hits = index.search(query, k);
    const std::size_t want = std::min(k, order.size());
    if (hits.size() != want) return fail(fmt::format("corpus {}: {} hits, expected {}", c, hits.size(), want));
    for (std::size_t r = 0; r < hits.size(); ++r) {
      const auto& exp = passages[order[r]];
      const double e = expected[order[r]];
      const double rel = std::abs(hits[r].score - e) / e;
      worst = std::max(worst, rel);
      ++comparisons;
      if (rel > pin::kBm25RelTolerance) return fail(fmt::format("corpus {}: relative error {:.3e}", c, rel));
      if (!(hits[r].passage->id == exp.id)) {
        return fail(fmt::format("corpus {} rank {}: got {}#{}, expected {}#{}", c, r, hits[r].passage->id.doc,
                                hits[r].passage->id.ordinal, exp.id.doc, exp.id.ordinal));
      }
    }
  }
  return {true, fmt::format("{} corpora, {} scores, max rel err {:.2e}, {} exact ties ordered by id", pin::kBm25Corpora,
                            comparisons, worst, tie_groups)};
}

// ---------------------------------------------------------------- 4

std::string generate_bytes(const json& config_json, const std::function<testing::ScriptedLlm()>& make_llm,
                           std::vector<UnifiedSample>* samples = nullptr) {
  auto cfg = validate_config(config_json);
  service::RunContext ctx;
  ctx.make_gateway = [&] { return make_llm().gateway; };
  auto summary = service::run_generate(cfg, ctx);
  if (samples) *samples = read_jsonl(summary.data_path);
  return text::read_file(summary.data_path);
}

llm::MockRule score_table(std::shared_ptr<std::map<std::string, std::pair<int, int>>> table) {
  return handler_rule(literal(prompts::kDatasetScoreMarker), [table](const auto&, const llm::ChatRequest& r, const auto&) {
    auto id = prompts::section(r.transcript(), "Dataset").value_or("");
    auto it = table->find(id);
    auto [tc, q] = it == table->end() ? std::pair{1, 1} : it->second;
    return json{{"task_consistency", tc}, {"quality", q}}.dump();
  });
}

llm::MockRule web_keywords() { return text_rule(literal(prompts::kKeywordMarker), R"(["physics","kinetic","optics"])"); }

Outcome end_to_end_generate() {
  testing::TempDir dir;
  std::ostringstream detail;
  auto plain = [] { return testing::scripted_llm(); };

  for (const char* path : {"local", "distill"}) {
    const std::string p(path);
    auto cfg_a = p == "local" ? testing::local_config_json(dir / (p + "-a"), pin::kGenerateN)
                              : testing::distill_config_json(dir / (p + "-a"), pin::kGenerateN);
    auto cfg_b = cfg_a;
    cfg_b["output"]["dir"] = (dir / (p + "-b")).string();
    std::vector<UnifiedSample> samples;
    const auto a = generate_bytes(cfg_a, plain, &samples);
    const auto b = generate_bytes(cfg_b, plain);
    if (samples.size() != static_cast<std::size_t>(pin::kGenerateN)) {
      return fail(fmt::format("{}: {} samples", p, samples.size()));
    }
    for (const auto& s : samples) {
      try {
        validate_sample(s);
      } catch (const Error& e) {
        return fail(p + ": invalid sample: " + e.what());
      }
      if (s.metadata.value("source", "") != p) return fail(p + ": sample with source " + s.metadata.dump());
    }
    if (a != b) return fail(p + ": two runs differ");
    detail << p << " 50/50 identical; ";
  }

  ::setenv("SDG_HUB_FIXTURES", (testing::fixtures_dir() / "hub").c_str(), 1);
  auto table = std::make_shared<std::map<std::string, std::pair<int, int>>>(
      std::map<std::string, std::pair<int, int>>{{"edu/energy-problems", {10, 9}},
                                                 {"acme/physics-qa", {7, 7}},
                                                 {"lab/mechanics-drills", {6, 8}},
                                                 {"open/optics-set", {5, 5}}});
  std::vector<UnifiedSample> web;
  generate_bytes(testing::web_config_json(dir / "web", pin::kWebN),
                 [&] { return testing::scripted_llm({web_keywords(), score_table(table)}); }, &web);
  if (web.size() != static_cast<std::size_t>(pin::kWebN)) return fail(fmt::format("web: {} samples", web.size()));
  for (const auto& s : web) {
    if (s.metadata.value("dataset_id", "") != "edu/energy-problems" || s.metadata.value("source", "") != "web") {
      return fail("web: sample not from the top-scored dataset: " + s.metadata.dump());
    }
  }
  detail << "web " << web.size() << "/" << pin::kWebN << " from edu/energy-problems";
  return {true, detail.str()};
}

// ---------------------------------------------------------------- 5

// [S] always correct, [L] correct on attempts 0 and 1 of 4, [U] never.
std::vector<llm::MockRule> banded_rules(bool reject_rewrites) {
  std::vector<llm::MockRule> rules;
  rules.push_back(handler_rule(literal(prompts::kAttemptMarker), [](const auto&, const llm::ChatRequest& r, const auto&) {
    return "seed=" + std::to_string(r.seed.value_or(-1)) + " " + r.last_user()->content;
  }));
  rules.push_back(handler_rule(literal(prompts::kCorrectnessMarker), [](const auto&, const llm::ChatRequest& r,
                                                                        const auto&) {
    const auto text = r.last_user()->content;
    const auto q = prompts::section(text, "Question").value_or("");
    const auto cand = prompts::section(text, "Candidate answer").value_or("");
    const int seed = std::stoi(cand.substr(5));
    bool correct = false;
    if (q.find("[S]") != std::string::npos) correct = true;
    if (q.find("[L]") != std::string::npos) correct = seed < 2;
    return json{{"correct", correct}}.dump();
  }));
  if (reject_rewrites) {
    rules.push_back(text_rule(literal(prompts::kRewriteValidationMarker), R"({"follows_instruction":false,"correct":true})"));
  }
  return rules;
}

std::size_t count_marker(const llm::MockBackend& b, std::string_view marker) {
  std::size_t n = 0;
  for (const auto& r : b.requests()) n += r.transcript().find(marker) != std::string::npos;
  return n;
}

Outcome quality_loop() {
  std::vector<UnifiedSample> data;
  std::vector<std::string> mid_inputs;
  for (int i = 0; i < pin::kQualityPerBand * 3; ++i) {
    static const char* kBands[] = {"[S]", "[L]", "[U]"};
    UnifiedSample s;
    s.input = std::string(kBands[i % 3]) + " question " + std::to_string(i);
    s.output = "answer " + std::to_string(i);
    s.metadata = {{"source", "local"}, {"task_id", "t"}};
    if (i % 3 == 1) mid_inputs.push_back(s.input);
    data.push_back(std::move(s));
  }
  QualityConfig q;  // defaults: k=4, thresholds 0.8 / 0.2, one rewrite round
  q.enabled = true;
  q.base_model = testing::endpoint("base");
  q.judge = testing::endpoint("judge");
  quality::RunSettings settings;
  std::ostringstream detail;

  for (bool reject : {false, true}) {
    auto llm = testing::scripted_llm(banded_rules(reject));
    auto res = quality::run_quality_loop(*llm.gateway, data, q, testing::endpoint("gen"), "Task", settings);
    const auto& r = res.report;
    if (r.solved != 10 || r.learnable != 10 || r.unsolved != 10) {
      return fail(fmt::format("counts {}/{}/{}", r.solved, r.learnable, r.unsolved));
    }
    if (res.dataset.size() != data.size()) return fail("cardinality changed through rewriting");
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double want = i % 3 == 0 ? 1.0 : i % 3 == 1 ? 0.5 : 0.0;
      if (r.scores_final[i].score != want) return fail(fmt::format("sample {} final score {}", i, r.scores_final[i].score));
    }
    testing::TempDir out;
    auto ex = evaluation::export_for_training(res.learnable, TrainMethod::Sft, out.path());
    std::vector<std::string> exported;
    for (const auto& [prompt, _] : evaluation::read_training_pairs(ex.data_path)) exported.push_back(prompt);
    if (exported != mid_inputs) return fail("learnable export is not exactly the mid samples");
    detail << (reject ? "rejected" : "applied") << " rewrites " << (reject ? r.rewrites_rejected : r.rewrites_applied)
           << "; ";
  }

  auto llm = testing::scripted_llm(banded_rules(false));
  auto zero = q;
  zero.max_rewrite_rounds = 0;
  auto res = quality::run_quality_loop(*llm.gateway, data, zero, testing::endpoint("gen"), "Task", settings);
  if (count_marker(*llm.backend, prompts::kRewriteMarker) != 0 || !res.report.records.empty()) {
    return fail("max_rewrite_rounds=0 still rewrote");
  }
  if (res.report.scores_final != res.report.scores_initial) return fail("rounds=0 changed scores");
  detail << "rounds=0 made no rewrite call; counts 10/10/10";
  return {true, detail.str()};
}

// ---------------------------------------------------------------- 6

Outcome web_monotonicity() {
  ::setenv("SDG_HUB_FIXTURES", (testing::fixtures_dir() / "hub").c_str(), 1);
  testing::TempDir dir;
  // Every fixture candidate, so the gated and test-only sets drop out and five remain.
  auto config = [&](const std::string& name, int n) {
    auto c = testing::web_config_json(dir / name, n);
    c["source"]["web"]["max_candidate_datasets"] = 10;
    return c;
  };

  // Discover the candidates that reach scoring.
  std::set<std::string> scored;
  {
    auto llm = testing::scripted_llm({web_keywords()});
    generate_bytes(config("probe", 1), [&] { return llm; });
    for (const auto& r : llm.backend->requests()) {
      if (auto id = prompts::section(r.transcript(), "Dataset");
          id && r.transcript().find(prompts::kDatasetScoreMarker) != std::string::npos) {
        scored.insert(*id);
      }
    }
  }
  if (scored.size() != 5) return fail(fmt::format("{} datasets reached scoring, expected 5", scored.size()));
  const std::vector<std::string> ids(scored.begin(), scored.end());

  std::mt19937 rng(606);
  int run_no = 0;
  auto counts = [&](const std::map<std::string, std::pair<int, int>>& scores, int n) {
    auto table = std::make_shared<std::map<std::string, std::pair<int, int>>>(scores);
    std::vector<UnifiedSample> out;
    generate_bytes(config("r" + std::to_string(run_no++), n),
                   [&] { return testing::scripted_llm({web_keywords(), score_table(table)}); }, &out);
    std::map<std::string, int> c;
    for (const auto& s : out) ++c[s.metadata.value("dataset_id", "")];
    return c;
  };

  int raised_nonzero = 0;
  for (int trial = 0; trial < pin::kMonotonicityTrials; ++trial) {
    std::map<std::string, std::pair<int, int>> scores;
    for (const auto& id : ids) scores[id] = {1 + static_cast<int>(rng() % 9), 1 + static_cast<int>(rng() % 9)};
    const int n = 1 + static_cast<int>(rng() % 30);
    const auto& target = ids[rng() % ids.size()];
    auto raised = scores;
    raised[target].first = std::min(10, raised[target].first + 1 + static_cast<int>(rng() % 5));
    raised[target].second = std::min(10, raised[target].second + static_cast<int>(rng() % 3));
    const auto before = counts(scores, n);
    const auto after = counts(raised, n);
    const int b = before.count(target) ? before.at(target) : 0;
    const int a = after.count(target) ? after.at(target) : 0;
    if (a < b) return fail(fmt::format("trial {}: raising {} dropped its count {} -> {}", trial, target, b, a));
    raised_nonzero += a > b;
  }
  return {true, fmt::format("{} trials over 5 datasets, count never decreased ({} strictly increased)",
                            pin::kMonotonicityTrials, raised_nonzero)};
}

// ---------------------------------------------------------------- 7

std::function<std::shared_ptr<llm::Gateway>()> slow_generation(int latency_ms) {
  return [latency_ms] {
    auto backend = std::make_shared<llm::MockBackend>();
    auto rules = llm::default_pipeline_rules();
    for (auto& r : rules) {
      if (r.name == "generation") r.latency_ms = latency_ms;
    }
    backend->add_rules(std::move(rules));
    return std::make_shared<llm::Gateway>(backend);
  };
}

int read_port(const fs::path& stdout_file) {
  const auto deadline = Clock::now() + 15s;
  while (Clock::now() < deadline) {
    if (fs::exists(stdout_file)) {
      const auto s = text::read_file(stdout_file);
      const auto pos = s.rfind(':');
      if (s.find("listening on") != std::string::npos && pos != std::string::npos) return std::stoi(s.substr(pos + 1));
    }
    std::this_thread::sleep_for(20ms);
  }
  return -1;
}

Outcome service_contract() {
  std::ostringstream detail;
  testing::TempDir dir;
  {
    service::JobManager jobs({dir / "svc", 1, [] { return testing::scripted_llm().gateway; }});
    service::HttpService http(jobs);
    const int port = http.start("127.0.0.1", 0);
    if (port <= 0) return fail("could not bind");

    // SSE replay.
    auto post = testing::http_post(
        port, "/api/jobs", json{{"type", "generate"}, {"config", testing::local_config_json("/x", 30)}}.dump());
    if (post.status != 201) return fail("submit: " + post.body);
    const std::string id = json::parse(post.body)["job_id"];
    auto frames = testing::sse_events(port, "/api/jobs/" + id + "/events", 60s);
    std::vector<service::JobEvent> events;
    for (const auto& f : frames) events.push_back(service::job_event_from_json(f));
    const auto folded = service::fold_events(id, events);
    const auto served = job_state_from_json(json::parse(testing::http_get(port, "/api/jobs/" + id).body));
    if (folded != served || served.phase != JobPhase::Completed) return fail("SSE fold differs from job state");
    detail << fmt::format("SSE {} events fold to produced={} tokens={}/{}; ", events.size(), served.produced,
                          served.tokens_prompt, served.tokens_completion);

    // Pages vs download.
    const auto download = testing::http_get(port, "/api/jobs/" + id + "/download").body;
    std::string joined;
    for (std::size_t offset = 0;; offset += 7) {
      auto page = nlohmann::ordered_json::parse(
          testing::http_get(port, "/api/jobs/" + id + "/samples?offset=" + std::to_string(offset) + "&limit=7").body);
      for (const auto& item : page["items"]) joined += item.dump() + "\n";
      if (offset + 7 >= page["total"].get<std::size_t>()) break;
    }
    if (joined != download || download.empty()) return fail("sample pages do not concatenate to the download");
    detail << "pages == download; ";
    http.stop();
  }

  // Cancel during a run.
  {
    service::JobManager jobs({dir / "cancel", 1, slow_generation(pin::kCancelLatencyMs)});
    auto cfg = testing::local_config_json("/x", 300);
    cfg["parallel"]["n_workers"] = 3;
    const auto id = jobs.submit(service::JobType::Generate, cfg);
    const auto deadline = Clock::now() + 20s;
    while (Clock::now() < deadline && jobs.get(id)->state.phase != JobPhase::Running) std::this_thread::sleep_for(5ms);
    std::this_thread::sleep_for(500ms);
    const auto start = Clock::now();
    jobs.cancel(id);
    if (!jobs.wait_terminal(id, 30s)) return fail("cancel never reached a terminal state");
    const auto took = Clock::now() - start;
    if (jobs.get(id)->state.phase != JobPhase::Cancelled) return fail("cancelled job ended in another phase");
    if (took > std::chrono::milliseconds(pin::kCancelLatencyMs) + pin::kCancelGrace) {
      return fail(fmt::format("cancel took {:.2f}s", seconds(took)));
    }
    detail << fmt::format("cancel {:.2f}s; ", seconds(took));
  }

  // Hard restart of a real server with a running job.
  {
    const auto data = dir / "restart";
    const auto rules = testing::write_text(
        dir / "slow.json",
        json::array({{{"pattern", "new, diverse samples"},
                      {"latency_ms", 5000},
                      {"response", R"([{"input":"q","output":"a"}])"}}})
            .dump());
    const std::map<std::string, std::string> env{{"SDG_MOCK_LLM", "1"}, {"SDG_MOCK_RULES", rules}};
    const auto tool = testing::tool_path().string();
    const pid_t first = testing::spawn_process({tool, "serve", "--port", "0", "--data-dir", data.string()}, env,
                                               dir / "s1.out", dir / "s1.err");
    const int port = read_port(dir / "s1.out");
    if (port <= 0) {
      ::kill(first, SIGKILL);
      testing::wait_process(first);
      return fail("first server did not start");
    }
    auto post = testing::http_post(
        port, "/api/jobs", json{{"type", "generate"}, {"config", testing::local_config_json("/x", 20)}}.dump());
    const std::string id = json::parse(post.body).value("job_id", "");
    const auto deadline = Clock::now() + 15s;
    std::string phase;
    while (Clock::now() < deadline && phase != "running") {
      phase = json::parse(testing::http_get(port, "/api/jobs/" + id).body).value("phase", "");
      std::this_thread::sleep_for(20ms);
    }
    ::kill(first, SIGKILL);
    testing::wait_process(first);
    if (phase != "running") return fail("job never started running before the kill");

    const pid_t second = testing::spawn_process({tool, "serve", "--port", "0", "--data-dir", data.string()}, env,
                                                dir / "s2.out", dir / "s2.err");
    const int port2 = read_port(dir / "s2.out");
    json state;
    if (port2 > 0) state = json::parse(testing::http_get(port2, "/api/jobs/" + id).body);
    ::kill(second, SIGTERM);
    testing::wait_process(second);
    if (state.value("phase", "") != "failed" || state.value("error", "") != "service_restart") {
      return fail("after restart: " + state.dump());
    }
    detail << "restart -> failed(service_restart)";
  }
  return {true, detail.str()};
}

// ---------------------------------------------------------------- 8

Outcome cli_matrix() {
  testing::TempDir dir;
  const std::map<std::string, std::string> mock{{"SDG_MOCK_LLM", "1"}};
  auto run = [&](std::vector<std::string> args, std::map<std::string, std::string> env) {
    args.insert(args.begin(), {testing::tool_path().string(), "-q"});
    return testing::run_process(args, env);
  };
  auto write = [&](const std::string& name, const json& j) { return testing::write_text(dir / name, j.dump(2)); };
  std::ostringstream detail;

  auto valid = run({"generate", write("valid.json", testing::local_config_json(dir / "out", 5))}, mock);
  if (valid.exit_code != 0) return fail("valid config exited " + std::to_string(valid.exit_code) + ": " + valid.err);
  auto bad_cfg = testing::local_config_json(dir / "out", 5);
  bad_cfg["quality"] = {{"enabled", true}, {"threshold_solved", 0.1}, {"threshold_unsolved", 0.9}};
  auto invalid = run({"generate", write("invalid.json", bad_cfg)}, mock);
  if (invalid.exit_code != 1) return fail("invalid config exited " + std::to_string(invalid.exit_code));

  const auto rules = testing::write_text(
      dir / "down.json", R"([{"pattern": "^ping$", "model": "mock-teacher", "fail": "transport"}])");
  auto env = mock;
  env["SDG_MOCK_RULES"] = rules;
  auto runtime = run({"generate", write("distill.json", testing::distill_config_json(dir / "d", 5))}, env);
  if (runtime.exit_code != 2) return fail("runtime failure exited " + std::to_string(runtime.exit_code));
  detail << "exit codes 0/1/2; ";

  std::string learnable;
  for (int i = 0; i < 4; ++i) {
    learnable += json{{"input", "q" + std::to_string(i)},
                      {"output", "a"},
                      {"metadata", {{"source", "local"}, {"task_id", "t"}}}}
                     .dump() +
                 "\n";
  }
  testing::write_text(dir / "learnable.jsonl", learnable);
  auto train = run({"train", write("train.json", json{{"train",
                                                       {{"method", "sft"},
                                                        {"data", (dir / "learnable.jsonl").string()},
                                                        {"output_dir", (dir / "export").string()},
                                                        {"trainer_cmd", "true {data}"}}}})},
                   mock);
  if (train.exit_code != 0) return fail("no-op train exited " + std::to_string(train.exit_code) + ": " + train.err);
  detail << "train no-op 0; ";

  // Judge scores scripted per item; means computed by hand below.
  const std::vector<int> scripted{5, 3, 2, 4, 1, 4};
  json judge_rules = json::array();
  std::string eval_set;
  for (std::size_t i = 0; i < scripted.size(); ++i) {
    const auto tag = "EVAL-ITEM-" + std::to_string(i) + "-END";
    judge_rules.push_back({{"pattern", "Evaluate the candidate response[\\s\\S]*" + tag},
                           {"response", "Compared.\n<score>" + std::to_string(scripted[i]) + "</score>"}});
    eval_set += json{{"input", "Question " + tag},
                     {"output", "ref"},
                     {"metadata", {{"source", "local"}, {"task_id", "t"}}}}
                    .dump() +
                "\n";
  }
  testing::write_text(dir / "eval.jsonl", eval_set);
  env = mock;
  env["SDG_MOCK_RULES"] = write("judge.json", judge_rules);
  auto eval = run({"eval", write("eval.json", json{{"eval",
                                                   {{"dataset", (dir / "eval.jsonl").string()},
                                                    {"model", {{"base_url", "http://mock.local/v1"}, {"model", "s"}}},
                                                    {"judge", {{"base_url", "http://mock.local/v1"}, {"model", "j"}}},
                                                    {"output_dir", (dir / "eval").string()}}}})},
                  env);
  if (eval.exit_code != 0) return fail("eval exited " + std::to_string(eval.exit_code) + ": " + eval.err);
  auto report = json::parse(text::read_file(dir / "eval" / "eval_report.json"));
  double sum = 0;
  for (int s : scripted) sum += (s - 1) / 4.0;
  const double mean = sum / static_cast<double>(scripted.size());
  for (const char* m : {"answer_correctness", "format_compliance"}) {
    const auto agg = report["metrics"][m]["aggregate"];
    if (!agg.is_number() || agg.get<double>() != mean) {
      return fail(fmt::format("{} aggregate {} != {}", m, agg.dump(), mean));
    }
  }
  detail << fmt::format("eval aggregates == {:.6f} exactly", mean);
  return {true, detail.str()};
}

// ---------------------------------------------------------------- 9

Outcome translation() {
  std::vector<UnifiedSample> in;
  std::set<std::size_t> sabotaged;
  for (std::size_t i = 0; i < pin::kTranslationN; ++i) {
    UnifiedSample s;
    const bool drop = i % 7 == 3;
    if (drop) sabotaged.insert(i);
    s.input = fmt::format("Item {}{}: convert {{{{value_{}}}}} into {{{{unit}}}}.", i, drop ? " #drop" : "", i);
    s.output = fmt::format("{{{{value_{}}}}} {{{{unit}}}} = {}", i, i * 3);
    s.metadata = {{"source", "distill"}, {"task_id", "t"}, {"language", "en"}, {"ordinal", i}, {"tags", {"a", "b"}}};
    in.push_back(std::move(s));
  }
  std::vector<llm::MockRule> rules{text_rule(literal(prompts::kTranslationMarker) + "[\\s\\S]*#drop",
                                             R"({"input":"placeholders lost","output":"also lost"})")};
  auto llm = testing::scripted_llm(rules);
  auto out = adapters::translate(*llm.gateway, in, "de", testing::endpoint("gen"), 8);

  if (out.samples.size() != in.size()) return fail("length changed");
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto& o = out.samples[i];
    if (o.metadata.value("ordinal", std::size_t{999}) != i) return fail("order changed");
    auto keys = [](const json& m) {
      std::set<std::string> k;
      for (const auto& [key, _] : m.items()) k.insert(key);
      k.erase("language");
      k.erase("translation_failed");
      return k;
    };
    if (keys(o.metadata) != keys(in[i].metadata)) return fail(fmt::format("sample {} metadata keys changed", i));
    if (sabotaged.count(i)) {
      if (o.input != in[i].input || o.output != in[i].output || o.metadata.value("translation_failed", false) != true) {
        return fail(fmt::format("sample {} did not fall back", i));
      }
      continue;
    }
    auto sorted = [](std::vector<std::string> v) {
      std::sort(v.begin(), v.end());
      return v;
    };
    if (sorted(adapters::placeholders(o.input)) != sorted(adapters::placeholders(in[i].input)) ||
        sorted(adapters::placeholders(o.output)) != sorted(adapters::placeholders(in[i].output))) {
      return fail(fmt::format("sample {} placeholders changed", i));
    }
    if (o.metadata.value("language", "") != "de" || o.input == in[i].input) return fail("sample not translated");
  }
  if (out.failed != sabotaged.size() || out.translated != in.size() - sabotaged.size()) {
    return fail(fmt::format("translated {} failed {}", out.translated, out.failed));
  }
  return {true, fmt::format("{} samples: {} translated, {} fell back with translation_failed", in.size(),
                            out.translated, out.failed)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 parallel scaling", parallel_scaling},   {"2 kill and resume", crash_resume},
      {"3 BM25 oracle", bm25_oracle},             {"4 end-to-end generate", end_to_end_generate},
      {"5 quality loop", quality_loop},           {"6 web sampling monotonicity", web_monotonicity},
      {"7 service contract", service_contract},   {"8 CLI exit codes", cli_matrix},
      {"9 translation adapter", translation},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    failures += o.pass ? 0 : 1;
    std::printf("[%s] %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                seconds(Clock::now() - start));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
