#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sdg/core/config.hpp"
#include "sdg/core/job_state.hpp"
#include "sdg/llm/gateway.hpp"
#include "sdg/parallel/cancel.hpp"

namespace sdg::service {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct RunContext {
  ProgressSink* progress = &null_progress();
  parallel::CancelToken cancel;
  std::string job_id;
  // Called after every successful model call (token accounting).
  llm::UsageListener on_usage;
  // Overrides Gateway::from_environment(); tests inject scripted backends.
  std::function<std::shared_ptr<llm::Gateway>()> make_gateway;
};

struct GenerateSummary {
  fs::path data_path;
  std::size_t requested = 0;
  std::size_t produced = 0;
  bool quota_unreachable = false;
  std::optional<json> quality_counts;
  std::optional<json> translation;
  llm::EndpointUsage usage;
  double wall_time_s = 0.0;
};

// executors -> quality loop (if enabled) -> translation (if enabled) ->
// <output.dir>/data.jsonl (+ quality files). Throws sdg::Error.
GenerateSummary run_generate(const TaskConfig& config, RunContext& ctx);

struct TrainSummary {
  fs::path export_dir;
  std::size_t count = 0;
  int exit_code = 0;
  double wall_time_s = 0.0;
};

TrainSummary run_train(const TrainConfig& config, const std::optional<fs::path>& config_path, RunContext& ctx);

struct EvalSummary {
  fs::path report_path;
  json report;
  double wall_time_s = 0.0;
};

// Writes <output_dir>/eval_report.json.
EvalSummary run_eval(const EvalConfig& config, RunContext& ctx);

json to_json(const GenerateSummary& s);
json to_json(const TrainSummary& s);
json to_json(const EvalSummary& s);

// Step names each job type reports, in order.
std::vector<std::string> generate_steps(const TaskConfig& config);
std::vector<std::string> train_steps();
std::vector<std::string> eval_steps();

// "cli-" + first 12 hex digits of sha256(config bytes).
std::string cli_job_id(std::string_view config_bytes);

}  // namespace sdg::service
