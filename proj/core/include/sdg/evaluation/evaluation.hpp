#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sdg/core/config.hpp"
#include "sdg/core/sample.hpp"
#include "sdg/llm/gateway.hpp"
#include "sdg/parallel/cancel.hpp"

namespace sdg::evaluation {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct EvalItem {
  std::string question;
  std::string reference;
  std::string candidate;
  std::optional<std::string> candidate_b;
};

// Rubric used when the caller passes none.
std::string_view default_rubric(Metric metric) noexcept;

// Last <score>N</score> with N in 1..5, if any.
std::optional<int> parse_score_tag(std::string_view reply);
// Last <choice>A|B|tie</choice> mapped to 1.0 / 0.0 / 0.5.
std::optional<double> parse_choice_tag(std::string_view reply);
// (s - 1) / 4
double normalize_score(int s) noexcept;

// Judge score in [0, 1], or nullopt when the reply could not be parsed even
// after one repair round. Throws Precondition for pairwise without
// candidate_b; transport errors propagate.
std::optional<double> geval_score(llm::Gateway& gateway, Metric metric, const EvalItem& item,
                                  const EndpointConfig& judge, std::string_view rubric = {});

struct MetricResult {
  Metric metric = Metric::AnswerCorrectness;
  std::vector<std::optional<double>> per_item;  // nullopt: missing, excluded from the aggregate

  std::size_t missing() const noexcept;
  // Mean over scored items; nullopt when nothing was scored.
  std::optional<double> aggregate() const noexcept;
};

json to_json(const MetricResult& r);

struct EvalRunOptions {
  std::size_t n_workers = 10;
  parallel::CancelToken cancel;
  std::string rubric;  // empty: default_rubric(metric)
};

// Queries `model` (and `model_b` for pairwise) once per item, then scores
// each requested metric. Never mutates `eval_set`.
std::vector<MetricResult> evaluate_model(llm::Gateway& gateway, const EndpointConfig& model,
                                         const std::optional<EndpointConfig>& model_b,
                                         const std::vector<UnifiedSample>& eval_set,
                                         const std::vector<Metric>& metrics, const EndpointConfig& judge,
                                         const EvalRunOptions& options = {});

json eval_report(const EvalConfig& config, std::size_t items, const std::vector<MetricResult>& results);

struct TrainExport {
  TrainMethod method = TrainMethod::Sft;
  fs::path dir;
  fs::path data_path;
  fs::path manifest_path;
  std::optional<fs::path> reward_spec_path;
  std::size_t count = 0;
  std::string sha256;
};

// train.jsonl with {prompt, response, image?} per sample, manifest.json
// {method, count, sha256, data}, and for GRPO reward_spec.json.
// Throws EmptyDataset.
TrainExport export_for_training(const std::vector<UnifiedSample>& learnable, TrainMethod method, const fs::path& out_dir,
                                const std::optional<EndpointConfig>& judge = std::nullopt,
                                const std::string& rubric = {});

// Reads train.jsonl back into (prompt, response) pairs.
std::vector<std::pair<std::string, std::string>> read_training_pairs(const fs::path& data_path);

std::string shell_quote(std::string_view s);

struct TrainerResult {
  int exit_code = 0;
  std::vector<std::string> tail;  // last lines of combined stdout/stderr
  std::string command;
};

class TrainerFailure : public Error {
 public:
  TrainerFailure(int exit_code, std::vector<std::string> tail);
  int exit_code() const noexcept { return exit_code_; }
  const std::vector<std::string>& tail() const noexcept { return tail_; }

 private:
  int exit_code_;
  std::vector<std::string> tail_;
};

inline constexpr std::size_t kLogTailLines = 50;

// Substitutes {data} (required) and {config} with shell-quoted paths and runs
// the command through /bin/sh. Every output line goes to `on_line` as it
// arrives. A cancel request terminates the child.
// Throws Precondition, SpawnFailure, TrainerFailure (NonZeroExit), Cancelled.
TrainerResult invoke_trainer(const TrainExport& exported, const std::string& trainer_cmd,
                             const std::optional<fs::path>& config_path,
                             const std::function<void(const std::string&)>& on_line = {},
                             parallel::CancelToken cancel = {});

}  // namespace sdg::evaluation
