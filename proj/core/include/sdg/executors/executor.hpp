#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "sdg/core/config.hpp"
#include "sdg/core/job_state.hpp"
#include "sdg/core/sample.hpp"
#include "sdg/hub/hub_client.hpp"
#include "sdg/llm/gateway.hpp"
#include "sdg/parallel/cancel.hpp"
#include "sdg/parallel/executor.hpp"
#include "sdg/retrieval/bm25.hpp"

namespace sdg::exec {

inline constexpr const char* kStepTaskParsing = "task_parsing";
inline constexpr const char* kStepPrepare = "prepare";
inline constexpr const char* kStepConstraints = "construct_constraints";
inline constexpr const char* kStepAcquisition = "data_acquisition";
inline constexpr const char* kStepStructure = "structure_process";

const std::vector<std::string>& step_names();

inline constexpr double kOverGeneration = 1.2;
inline constexpr std::size_t kMaxKeywords = 15;
inline constexpr std::size_t kMaxKeywordQueries = 8;
inline constexpr std::size_t kPassagesPerBatch = 3;
inline constexpr std::size_t kMinPatterns = 3;
inline constexpr std::size_t kMaxPatterns = 8;
// Generation aborts once this many batches ran and more than half failed.
inline constexpr std::size_t kFailureWindow = 10;

struct ParsedTask {
  std::string task_id;
  std::string instruction;
  std::string domain;
  std::string language;
  std::vector<std::string> keywords;
  std::string format_constraints;
  std::vector<UnifiedSample> examples;
  std::optional<EndpointConfig> teacher_params;
};

struct DatasetScore {
  std::string dataset_id;
  int task_consistency = 1;  // 1..10
  int quality = 1;           // 1..10
  std::int64_t downloads = 0;

  double combined() const noexcept { return (task_consistency + quality) / 2.0; }
};

struct FieldMap {
  std::string input_col;
  std::string output_col;

  bool operator==(const FieldMap&) const = default;
};

struct LocalSource {
  std::shared_ptr<const retrieval::Bm25Retriever> retriever;
};
struct WebSource {
  std::vector<hub::DatasetCandidate> candidates;
};
struct DistillSource {
  EndpointConfig teacher;
};
using SourceHandle = std::variant<LocalSource, WebSource, DistillSource>;

struct LocalConstraints {
  std::vector<retrieval::Passage> passages;  // ascending passage id
};
struct WebConstraints {
  std::map<std::string, FieldMap> field_map;
  std::vector<hub::DatasetCandidate> previewed;  // candidates with a field map, search order
};
struct DistillConstraints {
  std::vector<std::string> patterns;
};
using Constraints = std::variant<LocalConstraints, WebConstraints, DistillConstraints>;

struct Acquisition {
  std::vector<UnifiedSample> raw;
  std::size_t batches = 0;
  std::size_t failed_batches = 0;
  bool quota_unreachable = false;
  std::vector<DatasetScore> scores;  // web only, in draw order
};

struct RunResult {
  std::vector<UnifiedSample> samples;
  std::size_t requested = 0;
  bool quota_unreachable = false;
  std::size_t dropped_invalid = 0;
  std::size_t dropped_duplicate = 0;
};

// Everything an executor needs besides the config. Pointers are non-owning
// and must outlive the executor.
struct PipelineContext {
  llm::Gateway* gateway = nullptr;
  hub::HubClient* hub = nullptr;  // web path only
  ProgressSink* progress = &null_progress();
  parallel::CancelToken cancel;
  std::string job_id;
  fs::path checkpoint_dir;          // empty: no checkpointing
  std::vector<std::string> images;  // seed image URIs, assigned round-robin per batch
};

// Deterministic RNG for batch `index` of a run seeded with `seed`.
std::mt19937_64 batch_rng(std::uint64_t seed, std::uint64_t index);
// Up to k distinct indices from [0, n), in draw order (partial Fisher-Yates
// using rng() % m so results do not depend on the standard library).
std::vector<std::size_t> sample_indices(std::mt19937_64& rng, std::size_t n, std::size_t k);

// Lowercases, trims, drops empties and duplicates, keeps the first kMaxKeywords.
std::vector<std::string> normalize_keywords(const nlohmann::json& payload);

// Patterns from "- ", "* " or "1. " bullet lines, or a JSON array of strings.
std::vector<std::string> parse_patterns(const std::string& text);

// Validates the judge payload {"task_consistency": int, "quality": int}.
// Throws InvalidValue when a field is missing or outside 1..10.
DatasetScore parse_dataset_score(const std::string& dataset_id, std::int64_t downloads, const nlohmann::json& payload);

// Combined score descending, downloads descending, dataset id ascending.
void sort_scores(std::vector<DatasetScore>& scores);

struct DrawSlot {
  std::string dataset_id;
  std::size_t row = 0;
};
// Highest-ranked dataset first, each exhausted before the next is touched,
// until `quota` slots are drawn. `available` gives preview rows per dataset.
std::vector<DrawSlot> plan_web_draw(const std::vector<DatasetScore>& ranked,
                                    const std::map<std::string, std::size_t>& available, std::size_t quota);

// Decodes a generation payload (JSON array of {input, output}, or an object
// with a "samples" array). Throws GenerationParseFailure.
std::vector<UnifiedSample> samples_from_generation(const nlohmann::json& payload, SampleSource source);

class BaseTaskExecutor {
 public:
  BaseTaskExecutor(TaskConfig config, PipelineContext context);
  virtual ~BaseTaskExecutor() = default;

  // Steps 1-5 in order. Errors carry the failing step name; a cancel request
  // between steps throws Error(Cancelled).
  RunResult run();

  virtual ParsedTask task_parsing();
  virtual SourceHandle prepare(const ParsedTask& parsed) = 0;
  virtual Constraints construct_constraints(const ParsedTask& parsed, const SourceHandle& source) = 0;
  virtual Acquisition data_acquisition(const ParsedTask& parsed, const SourceHandle& source,
                                       const Constraints& constraints, std::size_t n) = 0;
  // Validate, dedup on normalized input, stamp task_id / language, truncate.
  RunResult structure_process(std::vector<UnifiedSample> raw, const ParsedTask& parsed, std::size_t n) const;

  const TaskConfig& config() const noexcept { return config_; }

 protected:
  std::vector<std::string> extract_keywords(const ParsedTask& parsed);
  std::vector<UnifiedSample> load_seed_examples() const;
  std::string generation_template(std::string_view fallback) const;
  EndpointConfig judge_endpoint() const;

  // Runs ceil(n * kOverGeneration) samples' worth of batches through the
  // parallel executor. `build(batch, count)` returns the request for a batch.
  Acquisition run_generation(const EndpointConfig& endpoint, SampleSource source, std::size_t n,
                             const std::function<llm::ChatRequest(std::size_t batch, std::size_t count,
                                                                  nlohmann::json& batch_meta)>& build);

  parallel::ExecutorOptions executor_options(std::optional<std::string> checkpoint_step) const;

  TaskConfig config_;
  PipelineContext ctx_;
};

class LocalExecutor : public BaseTaskExecutor {
 public:
  using BaseTaskExecutor::BaseTaskExecutor;
  SourceHandle prepare(const ParsedTask& parsed) override;
  Constraints construct_constraints(const ParsedTask& parsed, const SourceHandle& source) override;
  Acquisition data_acquisition(const ParsedTask& parsed, const SourceHandle& source, const Constraints& constraints,
                               std::size_t n) override;
};

class WebExecutor : public BaseTaskExecutor {
 public:
  using BaseTaskExecutor::BaseTaskExecutor;
  SourceHandle prepare(const ParsedTask& parsed) override;
  Constraints construct_constraints(const ParsedTask& parsed, const SourceHandle& source) override;
  Acquisition data_acquisition(const ParsedTask& parsed, const SourceHandle& source, const Constraints& constraints,
                               std::size_t n) override;

 private:
  std::optional<std::string> hub_token() const;
};

class DistillExecutor : public BaseTaskExecutor {
 public:
  using BaseTaskExecutor::BaseTaskExecutor;
  ParsedTask task_parsing() override;
  SourceHandle prepare(const ParsedTask& parsed) override;
  Constraints construct_constraints(const ParsedTask& parsed, const SourceHandle& source) override;
  Acquisition data_acquisition(const ParsedTask& parsed, const SourceHandle& source, const Constraints& constraints,
                               std::size_t n) override;
};

std::unique_ptr<BaseTaskExecutor> make_executor(const TaskConfig& config, PipelineContext context);

}  // namespace sdg::exec
