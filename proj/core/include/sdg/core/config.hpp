#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sdg/core/sample.hpp"
#include "sdg/error.hpp"

namespace sdg {

namespace fs = std::filesystem;

using SynthesisPath = SampleSource;

namespace defaults {
inline constexpr const char* kLanguage = "en";
inline constexpr int kTopK = 4;
inline constexpr int kChunkSize = 300;
inline constexpr int kChunkOverlap = 50;
inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;
inline constexpr int kAttemptsK = 4;
inline constexpr double kThresholdSolved = 0.8;
inline constexpr double kThresholdUnsolved = 0.2;
inline constexpr int kMaxRewriteRounds = 1;
inline constexpr int kWorkers = 10;
inline constexpr int kRetryLimit = 2;
inline constexpr int kPreviewRows = 25;
inline constexpr int kMaxCandidateDatasets = 5;
inline constexpr const char* kHubTokenEnv = "HF_TOKEN";
inline constexpr std::uint64_t kSeed = 42;
inline constexpr int kBatchSize = 5;
inline constexpr double kGeneratorTemperature = 0.8;
inline constexpr double kJudgeTemperature = 0.0;
inline constexpr int kMaxTokens = 2048;
inline constexpr double kTimeoutSeconds = 120.0;
}  // namespace defaults

struct EndpointConfig {
  std::string base_url;
  std::string model;
  std::string api_key_env;  // empty: endpoint needs no key
  double temperature = defaults::kGeneratorTemperature;
  int max_tokens = defaults::kMaxTokens;
  double timeout_s = defaults::kTimeoutSeconds;
  bool multimodal = false;

  bool operator==(const EndpointConfig&) const = default;
};

struct TaskSection {
  SynthesisPath path = SynthesisPath::Local;
  std::string id;  // defaults to a digest of path/instruction/domain
  std::string instruction;
  std::string domain;
  std::string language = defaults::kLanguage;
  int num_samples = 0;
  std::optional<fs::path> seed_examples;
  std::optional<fs::path> prompt_template;
  std::uint64_t seed = defaults::kSeed;
  int batch_size = defaults::kBatchSize;

  bool operator==(const TaskSection&) const = default;
};

struct LocalSourceConfig {
  fs::path corpus_dir;
  std::string retriever = "bm25";
  int top_k = defaults::kTopK;
  int chunk_size = defaults::kChunkSize;
  int overlap = defaults::kChunkOverlap;
  double k1 = defaults::kBm25K1;
  double b = defaults::kBm25B;

  bool operator==(const LocalSourceConfig&) const = default;
};

struct WebSourceConfig {
  std::string hub_token_env = defaults::kHubTokenEnv;
  int max_candidate_datasets = defaults::kMaxCandidateDatasets;
  int preview_rows = defaults::kPreviewRows;
  std::string split = "train";

  bool operator==(const WebSourceConfig&) const = default;
};

struct DistillSourceConfig {
  EndpointConfig teacher;

  bool operator==(const DistillSourceConfig&) const = default;
};

struct QualityConfig {
  bool enabled = false;
  EndpointConfig judge;
  EndpointConfig base_model;
  int attempts_k = defaults::kAttemptsK;
  double threshold_solved = defaults::kThresholdSolved;
  double threshold_unsolved = defaults::kThresholdUnsolved;
  int max_rewrite_rounds = defaults::kMaxRewriteRounds;

  bool operator==(const QualityConfig&) const = default;
};

struct ParallelConfig {
  int n_workers = defaults::kWorkers;
  fs::path checkpoint_dir;  // empty: <output.dir>/.checkpoints
  int retry_limit = defaults::kRetryLimit;

  bool operator==(const ParallelConfig&) const = default;
};

struct OutputConfig {
  fs::path dir = "output";
  std::string format = "jsonl";

  bool operator==(const OutputConfig&) const = default;
};

struct MultimodalConfig {
  bool enabled = false;
  std::optional<fs::path> seed_images_dir;

  bool operator==(const MultimodalConfig&) const = default;
};

struct TranslateConfig {
  bool enabled = false;
  std::string target_language;

  bool operator==(const TranslateConfig&) const = default;
};

struct TaskConfig {
  TaskSection task;
  std::optional<LocalSourceConfig> local;
  std::optional<WebSourceConfig> web;
  std::optional<DistillSourceConfig> distill;
  EndpointConfig generator;
  QualityConfig quality;
  ParallelConfig parallel;
  OutputConfig output;
  MultimodalConfig multimodal;
  TranslateConfig translate;

  fs::path checkpoint_dir() const {
    return parallel.checkpoint_dir.empty() ? output.dir / ".checkpoints" : parallel.checkpoint_dir;
  }

  bool operator==(const TaskConfig&) const = default;
};

enum class TrainMethod { Sft, Grpo };

struct TrainConfig {
  TrainMethod method = TrainMethod::Sft;
  fs::path data;        // learnable JSONL produced by `generate`
  fs::path output_dir;  // export destination
  std::string trainer_cmd;
  std::optional<EndpointConfig> judge;  // named in the GRPO reward spec
  std::string rubric;

  bool operator==(const TrainConfig&) const = default;
};

enum class Metric { AnswerCorrectness, FormatCompliance, PairwisePreference };

std::string_view to_string(Metric m) noexcept;
std::optional<Metric> parse_metric(std::string_view s) noexcept;

struct EvalConfig {
  fs::path dataset;
  EndpointConfig model;
  std::optional<EndpointConfig> model_b;
  EndpointConfig judge;
  std::vector<Metric> metrics;
  fs::path output_dir;
  int n_workers = defaults::kWorkers;

  bool operator==(const EvalConfig&) const = default;
};

struct ConfigIssue {
  Errc kind;
  std::string field;  // dotted path, e.g. "quality.threshold_solved"
  std::string message;
};

// Carries every violated rule, not only the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }
  json to_json() const;

 private:
  std::vector<ConfigIssue> issues_;
};

// Parses YAML or JSON text into a JSON document. Quoted YAML scalars stay
// strings; plain scalars are typed (bool, int, float, null).
json parse_config_text(std::string_view text);
json load_config_document(const fs::path& path);

TaskConfig validate_config(const json& raw);
TrainConfig validate_train_config(const json& raw);
EvalConfig validate_eval_config(const json& raw);

json to_json(const EndpointConfig& e);
json to_json(const TaskConfig& c);
json to_json(const TrainConfig& c);
json to_json(const EvalConfig& c);

}  // namespace sdg
