#include "sdg/service/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <chrono>

#include "sdg/adapters/adapters.hpp"
#include "sdg/core/text.hpp"
#include "sdg/error.hpp"
#include "sdg/evaluation/evaluation.hpp"
#include "sdg/executors/executor.hpp"
#include "sdg/hub/hub_client.hpp"
#include "sdg/quality/quality.hpp"

namespace sdg::service {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::shared_ptr<llm::Gateway> gateway_for(RunContext& ctx, int retry_limit) {
  std::shared_ptr<llm::Gateway> gw;
  if (ctx.make_gateway) {
    gw = ctx.make_gateway();
  } else {
    llm::GatewayOptions opts;
    opts.retry_limit = retry_limit;
    gw = std::make_shared<llm::Gateway>(llm::Gateway::backend_from_environment(), opts);
  }
  if (ctx.on_usage) gw->set_usage_listener(ctx.on_usage);
  return gw;
}

// Runs `body` as a named step with progress hooks; errors are tagged with it.
template <class F>
auto as_step(RunContext& ctx, const char* name, F&& body) {
  if (ctx.cancel.requested()) throw Error(Errc::Cancelled, "cancelled before " + std::string(name));
  ctx.progress->step_started(name);
  try {
    auto out = body();
    ctx.progress->step_done(name, out.second);
    return std::move(out.first);
  } catch (Error& e) {
    if (e.step().empty()) e.set_step(name);
    ctx.progress->step_failed(name, e.what());
    throw;
  }
}

constexpr const char* kStepQuality = "quality_control";
constexpr const char* kStepTranslate = "translation";
constexpr const char* kStepLoad = "load_data";
constexpr const char* kStepExport = "export";
constexpr const char* kStepTrain = "train";
constexpr const char* kStepEvaluate = "evaluate";

}  // namespace

std::vector<std::string> generate_steps(const TaskConfig& config) {
  auto steps = exec::step_names();
  if (config.quality.enabled) steps.emplace_back(kStepQuality);
  if (config.translate.enabled) steps.emplace_back(kStepTranslate);
  return steps;
}

std::vector<std::string> train_steps() { return {kStepLoad, kStepExport, kStepTrain}; }
std::vector<std::string> eval_steps() { return {kStepLoad, kStepEvaluate}; }

std::string cli_job_id(std::string_view config_bytes) { return "cli-" + text::sha256_hex(config_bytes).substr(0, 12); }

GenerateSummary run_generate(const TaskConfig& config, RunContext& ctx) {
  const auto start = Clock::now();
  auto gateway = gateway_for(ctx, config.parallel.retry_limit);

  std::shared_ptr<hub::HubClient> hub;
  if (config.web) hub = std::make_shared<hub::HubClient>(hub::transport_from_environment());

  std::optional<adapters::SeedImageSet> images;
  if (config.multimodal.enabled && config.multimodal.seed_images_dir) {
    images = adapters::SeedImageSet::load(*config.multimodal.seed_images_dir);
  }

  exec::PipelineContext pctx;
  pctx.gateway = gateway.get();
  pctx.hub = hub.get();
  pctx.progress = ctx.progress;
  pctx.cancel = ctx.cancel;
  pctx.job_id = ctx.job_id;
  pctx.checkpoint_dir = config.checkpoint_dir();
  if (images) pctx.images = images->uris();

  auto executor = exec::make_executor(config, pctx);
  auto result = executor->run();

  GenerateSummary summary;
  summary.requested = result.requested;
  summary.quota_unreachable = result.quota_unreachable;
  std::vector<UnifiedSample> dataset = std::move(result.samples);

  quality::RunSettings settings;
  settings.n_workers = static_cast<std::size_t>(config.parallel.n_workers);
  settings.retry_limit = static_cast<std::size_t>(config.parallel.retry_limit);
  settings.cancel = ctx.cancel;
  settings.progress = ctx.progress;

  std::optional<quality::QualityResult> qres;
  if (config.quality.enabled) {
    qres = as_step(ctx, kStepQuality, [&] {
      auto q = quality::run_quality_loop(*gateway, dataset, config.quality, config.generator, config.task.instruction,
                                         settings);
      json payload{{"solved", q.report.solved},
                   {"learnable", q.report.learnable},
                   {"unsolved", q.report.unsolved},
                   {"rewrites_applied", q.report.rewrites_applied},
                   {"rewrites_rejected", q.report.rewrites_rejected}};
      return std::pair{std::move(q), payload};
    });
    dataset = qres->dataset;
    summary.quality_counts = json{
        {"solved", qres->report.solved}, {"learnable", qres->report.learnable}, {"unsolved", qres->report.unsolved}};
  }

  if (config.translate.enabled) {
    auto outcome = as_step(ctx, kStepTranslate, [&] {
      auto t = adapters::translate(*gateway, dataset, config.translate.target_language, config.generator,
                                   settings.n_workers, ctx.cancel);
      json payload{{"translated", t.translated}, {"failed", t.failed}, {"skipped", t.skipped}};
      return std::pair{std::move(t), payload};
    });
    if (ctx.cancel.requested()) throw Error(Errc::Cancelled, "translation cancelled");
    dataset = std::move(outcome.samples);
    summary.translation =
        json{{"translated", outcome.translated}, {"failed", outcome.failed}, {"skipped", outcome.skipped}};
    if (qres) {
      // Category subsets follow the translated records.
      qres->dataset = dataset;
      qres->learnable.clear();
      qres->solved.clear();
      qres->unsolved.clear();
      for (std::size_t i = 0; i < dataset.size(); ++i) {
        switch (qres->report.categories[i]) {
          case Category::Solved: qres->solved.push_back(dataset[i]); break;
          case Category::Learnable: qres->learnable.push_back(dataset[i]); break;
          case Category::Unsolved: qres->unsolved.push_back(dataset[i]); break;
        }
      }
    }
  }

  fs::create_directories(config.output.dir);
  summary.data_path = config.output.dir / "data.jsonl";
  write_jsonl(summary.data_path, dataset);
  if (qres) quality::write_quality_outputs(config.output.dir, *qres);

  summary.produced = dataset.size();
  summary.usage = gateway->usage().total();
  summary.wall_time_s = seconds_since(start);
  spdlog::info("generate: {} of {} samples -> {}", summary.produced, summary.requested, summary.data_path.string());
  return summary;
}

TrainSummary run_train(const TrainConfig& config, const std::optional<fs::path>& config_path, RunContext& ctx) {
  const auto start = Clock::now();
  ReadOptions read;
  read.strict = false;
  const auto learnable = as_step(ctx, kStepLoad, [&] {
    auto s = read_jsonl(config.data, read);
    json payload{{"count", s.size()}};
    return std::pair{std::move(s), payload};
  });

  fs::create_directories(config.output_dir);
  const auto exported = as_step(ctx, kStepExport, [&] {
    auto ex = evaluation::export_for_training(learnable, config.method, config.output_dir, config.judge, config.rubric);
    json payload{{"count", ex.count}, {"sha256", ex.sha256}};
    return std::pair{std::move(ex), payload};
  });

  TrainSummary summary;
  summary.export_dir = exported.dir;
  summary.count = exported.count;
  const auto trained = as_step(ctx, kStepTrain, [&] {
    auto r = evaluation::invoke_trainer(
        exported, config.trainer_cmd, config_path, [&](const std::string& line) { ctx.progress->log_line(line); },
        ctx.cancel);
    json payload{{"exit_code", r.exit_code}};
    return std::pair{std::move(r), payload};
  });
  summary.exit_code = trained.exit_code;
  summary.wall_time_s = seconds_since(start);
  return summary;
}

EvalSummary run_eval(const EvalConfig& config, RunContext& ctx) {
  const auto start = Clock::now();
  auto gateway = gateway_for(ctx, defaults::kRetryLimit);
  ReadOptions read;
  read.strict = false;
  const auto items = as_step(ctx, kStepLoad, [&] {
    auto s = read_jsonl(config.dataset, read);
    if (s.empty()) throw Error(Errc::EmptyDataset, "evaluation set is empty: " + config.dataset.string());
    json payload{{"count", s.size()}};
    return std::pair{std::move(s), payload};
  });

  evaluation::EvalRunOptions opts;
  opts.n_workers = static_cast<std::size_t>(config.n_workers);
  opts.cancel = ctx.cancel;
  auto results = as_step(ctx, kStepEvaluate, [&] {
    auto r = evaluation::evaluate_model(*gateway, config.model, config.model_b, items, config.metrics, config.judge,
                                        opts);
    json payload = json::object();
    for (const auto& m : r) {
      auto agg = m.aggregate();
      payload[std::string(to_string(m.metric))] = agg ? json(*agg) : json(nullptr);
    }
    return std::pair{std::move(r), payload};
  });

  EvalSummary summary;
  summary.report = evaluation::eval_report(config, items.size(), results);
  fs::create_directories(config.output_dir);
  summary.report_path = config.output_dir / "eval_report.json";
  text::write_file_atomic(summary.report_path, summary.report.dump(2) + "\n");
  summary.wall_time_s = seconds_since(start);
  return summary;
}

json to_json(const GenerateSummary& s) {
  json j{{"data_path", s.data_path.string()},
         {"requested", s.requested},
         {"produced", s.produced},
         {"quota_unreachable", s.quota_unreachable},
         {"usage",
          {{"calls", s.usage.calls},
           {"attempts", s.usage.attempts},
           {"tokens_prompt", s.usage.tokens_prompt},
           {"tokens_completion", s.usage.tokens_completion},
           {"failures", s.usage.failures}}},
         {"wall_time_s", s.wall_time_s}};
  if (s.quality_counts) j["quality"] = *s.quality_counts;
  if (s.translation) j["translation"] = *s.translation;
  return j;
}

json to_json(const TrainSummary& s) {
  return json{{"export_dir", s.export_dir.string()},
              {"count", s.count},
              {"exit_code", s.exit_code},
              {"wall_time_s", s.wall_time_s}};
}

json to_json(const EvalSummary& s) {
  return json{{"report_path", s.report_path.string()}, {"report", s.report}, {"wall_time_s", s.wall_time_s}};
}

}  // namespace sdg::service
