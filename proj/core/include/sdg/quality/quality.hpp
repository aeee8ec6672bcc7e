#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "sdg/core/config.hpp"
#include "sdg/core/job_state.hpp"
#include "sdg/core/sample.hpp"
#include "sdg/llm/gateway.hpp"
#include "sdg/parallel/cancel.hpp"

namespace sdg::quality {

using json = nlohmann::json;

inline constexpr double kAttemptTemperature = 0.7;
// evaluate() fails outright when more than this share of samples is partial.
inline constexpr double kMaxPartialShare = 0.2;

struct RunSettings {
  std::size_t n_workers = 10;
  std::size_t retry_limit = 0;
  parallel::CancelToken cancel;
  ProgressSink* progress = &null_progress();
};

// Boundary-inclusive: solved if score >= solved, unsolved if score <= unsolved.
Category categorize(double score, double threshold_solved, double threshold_unsolved) noexcept;

// attempts_k base-model answers per sample, each judged against the reference.
// score = correct / attempts_k. Throws Precondition, EvaluationFailed.
std::vector<EvalScore> evaluate(llm::Gateway& gateway, const std::vector<UnifiedSample>& dataset,
                                const EndpointConfig& base_model, const EndpointConfig& judge, int attempts_k,
                                const RunSettings& settings);

enum class Direction { Harden, Simplify };
std::string_view to_string(Direction d) noexcept;

struct RewriteRecord {
  std::size_t index = 0;
  std::string original_input_digest;
  Direction direction = Direction::Harden;
  bool validated = false;
  int round = 1;
  std::string reason;  // why a rewrite was rejected

  bool operator==(const RewriteRecord&) const = default;
};

json to_json(const RewriteRecord& r);

struct RewriteOutcome {
  std::vector<UnifiedSample> samples;  // same length and order as the input
  std::vector<RewriteRecord> records;
  std::vector<UnifiedSample> rejected_candidates;  // rewritten pairs that failed validation
  std::size_t applied = 0;
  std::size_t rejected = 0;
};

// Solved samples are hardened, unsolved simplified, learnable passed through.
// A rewrite is applied only when the judge confirms it follows the task and
// is correct; any failure keeps the original sample.
RewriteOutcome rewrite(llm::Gateway& gateway, const std::vector<UnifiedSample>& dataset,
                       const std::vector<Category>& categories, const EndpointConfig& generator,
                       const EndpointConfig& judge, const std::string& instruction, const RunSettings& settings,
                       int round = 1);

struct QualityReport {
  std::vector<EvalScore> scores_initial;
  std::vector<EvalScore> scores_final;
  std::vector<Category> categories;
  std::size_t solved = 0;
  std::size_t learnable = 0;
  std::size_t unsolved = 0;
  std::size_t rewrites_applied = 0;
  std::size_t rewrites_rejected = 0;
  std::vector<RewriteRecord> records;
};

json to_json(const QualityReport& r);

struct QualityResult {
  std::vector<UnifiedSample> dataset;  // after rewriting; same size as the input
  std::vector<UnifiedSample> learnable;
  std::vector<UnifiedSample> solved;
  std::vector<UnifiedSample> unsolved;
  std::vector<UnifiedSample> rejected_rewrites;
  QualityReport report;
};

// evaluate -> (rewrite -> re-evaluate rewritten samples) x max_rewrite_rounds
// -> categorize on final scores.
QualityResult run_quality_loop(llm::Gateway& gateway, const std::vector<UnifiedSample>& dataset,
                               const QualityConfig& quality, const EndpointConfig& generator,
                               const std::string& instruction, const RunSettings& settings);

// quality_report.json, learnable.jsonl, solved.jsonl, unsolved.jsonl,
// rejected_rewrites.jsonl.
void write_quality_outputs(const std::filesystem::path& dir, const QualityResult& result);

}  // namespace sdg::quality
