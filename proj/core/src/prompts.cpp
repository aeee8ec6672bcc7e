#include "sdg/prompts.hpp"

#include "sdg/core/text.hpp"

namespace sdg::prompts {

using llm::ChatMessage;
using llm::ChatRequest;
using llm::ResponseHint;

namespace {

constexpr std::string_view kLocalTemplate = R"(You are generating supervised training data for the task below.

### Instruction
{instruction}

### Domain
{domain}

### Reference passages
{passages}

### Output format
{format}

### Examples
{examples}

### Request
Using only facts supported by the reference passages, write exactly {count} new, diverse samples for this task in language `{language}`.
Batch: {batch})";

constexpr std::string_view kDistillTemplate = R"(You are generating supervised training data for the task below.

### Instruction
{instruction}

### Domain
{domain}

### Pattern constraints
{patterns}

### Output format
{format}

### Examples
{examples}

### Request
Following every pattern constraint, write exactly {count} new, diverse samples for this task in language `{language}`.
Batch: {batch})";

ChatRequest make(std::string system, std::string user, ResponseHint hint, std::optional<double> temperature = {}) {
  ChatRequest r;
  r.messages.push_back(ChatMessage::system(std::move(system)));
  r.messages.push_back(ChatMessage::user(std::move(user)));
  r.hint = hint;
  r.temperature = temperature;
  return r;
}

std::string sec(std::string_view heading, std::string_view body) {
  std::string out = "### ";
  out += heading;
  out += '\n';
  out += body;
  out += "\n\n";
  return out;
}

}  // namespace

std::optional<std::string> section(std::string_view text, std::string_view heading) {
  std::string marker = "### ";
  marker += heading;
  marker += '\n';
  auto start = text.find(marker);
  if (start == std::string_view::npos) return std::nullopt;
  start += marker.size();
  auto end = text.find("\n### ", start);
  return text::trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
}

std::string_view default_local_template() { return kLocalTemplate; }
std::string_view default_distill_template() { return kDistillTemplate; }

std::string format_constraints() {
  return R"(Return only a JSON array. Each element is an object {"input": string, "output": string} where "input" is the instruction or question given to the model and "output" is its complete reference answer. Both fields must be non-empty.)";
}

std::string render_examples(const std::vector<UnifiedSample>& examples) {
  if (examples.empty()) return "(none)";
  std::string out;
  for (const auto& e : examples) {
    out += nlohmann::json{{"input", e.input}, {"output", e.output}}.dump(-1, ' ', false,
                                                                       nlohmann::json::error_handler_t::replace);
    out += '\n';
  }
  out.pop_back();
  return out;
}

ChatRequest keyword_request(std::string_view instruction, std::string_view domain) {
  std::string user(kKeywordMarker);
  user += " that capture the task and its domain. Return only a JSON array of lowercase strings.\n\n";
  user += sec("Instruction", instruction);
  user += sec("Domain", domain.empty() ? "(unspecified)" : domain);
  return make("You prepare retrieval queries for building domain-specific datasets.", user, ResponseHint::JsonObject,
              0.0);
}

ChatRequest pattern_request(std::string_view instruction, std::string_view domain, std::string_view examples) {
  std::string user(kPatternMarker);
  user +=
      " that a strong model should follow to produce high-quality samples for this task. "
      "Write one pattern per line, each line starting with \"- \".\n\n";
  user += sec("Instruction", instruction);
  user += sec("Domain", domain.empty() ? "(unspecified)" : domain);
  user += sec("Examples", examples);
  return make("You are an expert data designer distilling your own generation strategy.", user,
              ResponseHint::FreeText);
}

ChatRequest field_selection_request(std::string_view instruction, std::string_view dataset_id,
                                    const std::vector<std::string>& columns, std::string_view preview) {
  std::string user(kFieldSelectionMarker);
  user +=
      " that best match the task: one column supplies the model input, another the reference output. "
      "Return only a JSON object {\"input\": <column>, \"output\": <column>}.\n\n";
  user += sec("Instruction", instruction);
  user += sec("Dataset", dataset_id);
  user += sec("Columns", text::join(columns, ", "));
  user += sec("Preview rows", preview);
  return make("You map dataset columns onto instruction-tuning fields.", user, ResponseHint::JsonObject, 0.0);
}

ChatRequest dataset_score_request(std::string_view instruction, std::string_view dataset_id,
                                  std::string_view sample_pairs) {
  std::string user(kDatasetScoreMarker);
  user +=
      ". Score task consistency (how well the content matches the task) and quality (correctness, clarity, "
      "completeness), each as an integer from 1 to 10. Return only a JSON object "
      "{\"task_consistency\": <int>, \"quality\": <int>}.\n\n";
  user += sec("Instruction", instruction);
  user += sec("Dataset", dataset_id);
  user += sec("Sample pairs", sample_pairs);
  return make("You are a strict dataset reviewer.", user, ResponseHint::JsonObject, 0.0);
}

ChatRequest attempt_request(std::string_view question, std::int64_t attempt, double temperature) {
  std::string system(kAttemptMarker);
  system += " as accurately and concisely as you can.";
  auto r = make(system, std::string(question), ResponseHint::FreeText, temperature);
  r.seed = attempt;
  return r;
}

ChatRequest correctness_request(std::string_view question, std::string_view reference, std::string_view candidate) {
  std::string user(kCorrectnessMarker);
  user += " with respect to the reference answer. Return only a JSON object {\"correct\": true|false}.\n\n";
  user += sec("Question", question);
  user += sec("Reference answer", reference);
  user += sec("Candidate answer", candidate);
  return make("You grade answers against references.", user, ResponseHint::JsonObject, 0.0);
}

ChatRequest rewrite_request(std::string_view instruction, std::string_view direction, std::string_view input,
                            std::string_view output) {
  std::string user(kRewriteMarker);
  if (direction == "harden") {
    user +=
        " so that it is harder: require more reasoning steps or add constraints, while staying within the task. ";
  } else {
    user += " so that it is simpler: reduce the reasoning steps or remove constraints, while staying within the task. ";
  }
  user +=
      "Produce a new reference output that correctly answers the new input. Return only a JSON object "
      "{\"input\": string, \"output\": string}.\n\n";
  user += sec("Instruction", instruction);
  user += sec("Direction", direction);
  user += sec("Original input", input);
  user += sec("Original output", output);
  return make("You adjust the difficulty of training samples.", user, ResponseHint::JsonObject);
}

ChatRequest rewrite_validation_request(std::string_view instruction, std::string_view input, std::string_view output) {
  std::string user(kRewriteValidationMarker);
  user +=
      ": check (a) the input still satisfies the task instruction and (b) the output correctly answers the input. "
      "Return only a JSON object {\"follows_instruction\": true|false, \"correct\": true|false}.\n\n";
  user += sec("Instruction", instruction);
  user += sec("Rewritten input", input);
  user += sec("Rewritten output", output);
  return make("You validate rewritten training samples.", user, ResponseHint::JsonObject, 0.0);
}

ChatRequest translation_request(std::string_view target_language, std::string_view input, std::string_view output) {
  std::string user(kTranslationMarker);
  user += " into language `";
  user += target_language;
  user +=
      "`. Keep every {{placeholder}} token exactly as written. Return only a JSON object "
      "{\"input\": string, \"output\": string}.\n\n";
  user += sec("Target language", target_language);
  user += sec("Input", input);
  user += sec("Output", output);
  return make("You are a professional translator for training data.", user, ResponseHint::JsonObject, 0.0);
}

ChatRequest geval_request(std::string_view metric, std::string_view rubric, std::string_view question,
                          std::string_view reference, std::string_view candidate) {
  std::string user(kGEvalMarker);
  user += " against the rubric. Think step by step, then give the final score as <score>N</score> with N an integer "
          "from 1 (worst) to 5 (best).\n\n";
  user += sec("Metric", metric);
  user += sec("Rubric", rubric);
  user += sec("Question", question);
  user += sec("Reference answer", reference);
  user += sec("Candidate answer", candidate);
  return make("You are a careful evaluator of model responses.", user, ResponseHint::FreeText, 0.0);
}

ChatRequest pairwise_request(std::string_view rubric, std::string_view question, std::string_view reference,
                             std::string_view candidate_a, std::string_view candidate_b) {
  std::string user(kPairwiseMarker);
  user += " against the rubric. Think step by step, then give the verdict as <choice>A</choice>, "
          "<choice>B</choice> or <choice>tie</choice>.\n\n";
  user += sec("Rubric", rubric);
  user += sec("Question", question);
  user += sec("Reference answer", reference);
  user += sec("Candidate A", candidate_a);
  user += sec("Candidate B", candidate_b);
  return make("You are a careful evaluator of model responses.", user, ResponseHint::FreeText, 0.0);
}

ChatRequest liveness_request() {
  ChatRequest r;
  r.messages.push_back(ChatMessage::user("ping"));
  r.max_tokens = 8;
  r.temperature = 0.0;
  return r;
}

}  // namespace sdg::prompts
