#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sdg/core/sample.hpp"
#include "sdg/llm/chat.hpp"

// Prompt text for every model call the pipeline makes. Prompts are laid out as
// "### Heading" sections so responses and mock rules can address parts of them.
namespace sdg::prompts {

inline constexpr std::string_view kKeywordMarker = "Extract between 5 and 15 search keywords";
inline constexpr std::string_view kGenerationMarker = "new, diverse samples";
inline constexpr std::string_view kPatternMarker = "List between 3 and 8 generation patterns";
inline constexpr std::string_view kFieldSelectionMarker = "Select the dataset columns";
inline constexpr std::string_view kDatasetScoreMarker = "Rate how well this dataset fits the task";
inline constexpr std::string_view kAttemptMarker = "Answer the question below";
inline constexpr std::string_view kCorrectnessMarker = "Decide whether the candidate answer is correct";
inline constexpr std::string_view kRewriteMarker = "Rewrite the training sample";
inline constexpr std::string_view kRewriteValidationMarker = "Validate the rewritten training sample";
inline constexpr std::string_view kTranslationMarker = "Translate the training sample";
inline constexpr std::string_view kGEvalMarker = "Evaluate the candidate response";
inline constexpr std::string_view kPairwiseMarker = "Compare the two candidate responses";

// Text between "### <heading>\n" and the next "\n### " (or end), trimmed.
std::optional<std::string> section(std::string_view text, std::string_view heading);

// Default generation templates. Placeholders: {instruction}, {domain},
// {passages}, {patterns}, {format}, {examples}, {count}, {language}, {batch}.
std::string_view default_local_template();
std::string_view default_distill_template();

// JSON shape every generation call must return.
std::string format_constraints();
std::string render_examples(const std::vector<UnifiedSample>& examples);

llm::ChatRequest keyword_request(std::string_view instruction, std::string_view domain);
llm::ChatRequest pattern_request(std::string_view instruction, std::string_view domain, std::string_view examples);
llm::ChatRequest field_selection_request(std::string_view instruction, std::string_view dataset_id,
                                         const std::vector<std::string>& columns, std::string_view preview);
llm::ChatRequest dataset_score_request(std::string_view instruction, std::string_view dataset_id,
                                       std::string_view sample_pairs);
llm::ChatRequest attempt_request(std::string_view question, std::int64_t attempt, double temperature);
llm::ChatRequest correctness_request(std::string_view question, std::string_view reference,
                                     std::string_view candidate);
llm::ChatRequest rewrite_request(std::string_view instruction, std::string_view direction, std::string_view input,
                                 std::string_view output);
llm::ChatRequest rewrite_validation_request(std::string_view instruction, std::string_view input,
                                            std::string_view output);
llm::ChatRequest translation_request(std::string_view target_language, std::string_view input,
                                     std::string_view output);
llm::ChatRequest geval_request(std::string_view metric, std::string_view rubric, std::string_view question,
                               std::string_view reference, std::string_view candidate);
llm::ChatRequest pairwise_request(std::string_view rubric, std::string_view question, std::string_view reference,
                                  std::string_view candidate_a, std::string_view candidate_b);
llm::ChatRequest liveness_request();

}  // namespace sdg::prompts
