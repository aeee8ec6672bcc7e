#include "sdg/quality/quality.hpp"

#include <spdlog/spdlog.h>

#include "sdg/core/text.hpp"
#include "sdg/error.hpp"
#include "sdg/parallel/executor.hpp"
#include "sdg/prompts.hpp"

namespace sdg::quality {

namespace {

parallel::ExecutorOptions exec_options(const RunSettings& s) {
  parallel::ExecutorOptions o;
  o.n_workers = std::max<std::size_t>(1, s.n_workers);
  o.retry_limit = s.retry_limit;
  o.cancel = s.cancel;
  return o;
}

std::string digest(std::string_view s) { return text::sha256_hex(s).substr(0, 16); }

bool flag(const json& payload, const char* key) {
  if (!payload.is_object()) return false;
  auto it = payload.find(key);
  return it != payload.end() && it->is_boolean() && it->get<bool>();
}

}  // namespace

Category categorize(double score, double threshold_solved, double threshold_unsolved) noexcept {
  if (score >= threshold_solved) return Category::Solved;
  if (score <= threshold_unsolved) return Category::Unsolved;
  return Category::Learnable;
}

std::string_view to_string(Direction d) noexcept { return d == Direction::Harden ? "harden" : "simplify"; }

json to_json(const RewriteRecord& r) {
  json j{{"index", r.index},
         {"original_input_digest", r.original_input_digest},
         {"direction", std::string(to_string(r.direction))},
         {"validated", r.validated},
         {"round", r.round}};
  if (!r.reason.empty()) j["reason"] = r.reason;
  return j;
}

std::vector<EvalScore> evaluate(llm::Gateway& gateway, const std::vector<UnifiedSample>& dataset,
                                const EndpointConfig& base_model, const EndpointConfig& judge, int attempts_k,
                                const RunSettings& settings) {
  if (attempts_k < 1) throw Error(Errc::Precondition, "attempts_k must be >= 1");
  const auto k = static_cast<std::size_t>(attempts_k);
  std::vector<std::size_t> items(dataset.size() * k);
  for (std::size_t i = 0; i < items.size(); ++i) items[i] = i;

  parallel::ParallelExecutor pool(exec_options(settings));
  auto exec = pool.execute(items, [&](std::size_t flat) {
    const auto& sample = dataset[flat / k];
    const auto attempt = static_cast<std::int64_t>(flat % k);
    auto request = prompts::attempt_request(sample.input, attempt, kAttemptTemperature);
    if (sample.image && base_model.multimodal) request.messages.back().image = sample.image;
    auto answer = gateway.complete(base_model, request);
    auto verdict = gateway.complete_json(judge, prompts::correctness_request(sample.input, sample.output,
                                                                             text::trim(answer.content)));
    if (!verdict.is_object() || !verdict.contains("correct") || !verdict["correct"].is_boolean()) {
      throw Error(Errc::ResponseFormatError, "judge verdict lacks a boolean `correct`");
    }
    return json{{"digest", digest(answer.content)}, {"correct", verdict["correct"].get<bool>()}};
  });
  if (settings.cancel.requested()) throw Error(Errc::Cancelled, "evaluation cancelled");

  std::vector<EvalScore> scores(dataset.size());
  std::size_t partial = 0;
  for (std::size_t s = 0; s < dataset.size(); ++s) {
    auto& score = scores[s];
    score.sample_ref = s;
    std::size_t correct = 0;
    for (std::size_t a = 0; a < k; ++a) {
      const auto& r = exec.results[s * k + a];
      if (!r) continue;
      AttemptRecord rec{r->at("digest").get<std::string>(), r->at("correct").get<bool>()};
      correct += rec.correct ? 1 : 0;
      score.attempts.push_back(std::move(rec));
    }
    score.partial = score.attempts.size() < k;
    score.score = static_cast<double>(correct) / static_cast<double>(k);
    if (score.partial) ++partial;
  }
  if (!dataset.empty() && static_cast<double>(partial) > kMaxPartialShare * static_cast<double>(dataset.size())) {
    std::string first;
    for (const auto& e : exec.errors) {
      if (!e.empty()) {
        first = e;
        break;
      }
    }
    throw Error(Errc::EvaluationFailed, std::to_string(partial) + " of " + std::to_string(dataset.size()) +
                                            " samples could not be fully evaluated; first error: " + first);
  }
  return scores;
}

RewriteOutcome rewrite(llm::Gateway& gateway, const std::vector<UnifiedSample>& dataset,
                       const std::vector<Category>& categories, const EndpointConfig& generator,
                       const EndpointConfig& judge, const std::string& instruction, const RunSettings& settings,
                       int round) {
  if (categories.size() != dataset.size()) throw Error(Errc::Precondition, "categories must align with the dataset");
  RewriteOutcome out;
  out.samples = dataset;

  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (categories[i] != Category::Learnable) targets.push_back(i);
  }
  if (targets.empty()) return out;

  parallel::ParallelExecutor pool(exec_options(settings));
  pool.options().retry_limit = 0;  // a failed rewrite falls back to the original
  auto exec = pool.execute(targets, [&](std::size_t idx) {
    const auto& sample = dataset[idx];
    const auto dir = categories[idx] == Category::Solved ? Direction::Harden : Direction::Simplify;
    json result{{"candidate", nullptr}, {"validated", false}, {"reason", ""}};
    json payload;
    try {
      payload = gateway.complete_json(
          generator, prompts::rewrite_request(instruction, to_string(dir), sample.input, sample.output));
    } catch (const Error& e) {
      if (e.code() == Errc::Cancelled) throw;
      result["reason"] = std::string("generation failed: ") + e.what();
      return result;
    }
    if (!payload.is_object() || !payload.contains("input") || !payload.contains("output") ||
        !payload["input"].is_string() || !payload["output"].is_string() ||
        text::trim(payload["input"].get<std::string>()).empty() ||
        text::trim(payload["output"].get<std::string>()).empty()) {
      result["reason"] = "rewrite is not a non-empty {input, output} pair";
      return result;
    }
    const auto new_in = text::trim(payload["input"].get<std::string>());
    const auto new_out = text::trim(payload["output"].get<std::string>());
    result["candidate"] = json{{"input", new_in}, {"output", new_out}};
    try {
      auto verdict = gateway.complete_json(judge, prompts::rewrite_validation_request(instruction, new_in, new_out));
      const bool follows = flag(verdict, "follows_instruction");
      const bool correct = flag(verdict, "correct");
      result["validated"] = follows && correct;
      if (!follows) {
        result["reason"] = "rewrite no longer follows the task instruction";
      } else if (!correct) {
        result["reason"] = "rewritten output does not answer the rewritten input";
      }
    } catch (const Error& e) {
      if (e.code() == Errc::Cancelled) throw;
      result["reason"] = std::string("validation failed: ") + e.what();
    }
    return result;
  });

  for (std::size_t t = 0; t < targets.size(); ++t) {
    const auto idx = targets[t];
    const auto& original = dataset[idx];
    RewriteRecord rec;
    rec.index = idx;
    rec.original_input_digest = digest(original.input);
    rec.direction = categories[idx] == Category::Solved ? Direction::Harden : Direction::Simplify;
    rec.round = round;
    const auto& r = exec.results[t];
    if (!r) {
      rec.reason = exec.errors[t].empty() ? "cancelled" : exec.errors[t];
    } else {
      rec.validated = r->at("validated").get<bool>();
      rec.reason = r->at("reason").get<std::string>();
    }
    if (rec.validated) {
      auto& s = out.samples[idx];
      s.input = (*r)["candidate"]["input"].get<std::string>();
      s.output = (*r)["candidate"]["output"].get<std::string>();
      if (!s.metadata.contains("rewrite_history") || !s.metadata["rewrite_history"].is_array()) {
        s.metadata["rewrite_history"] = json::array();
      }
      s.metadata["rewrite_history"].push_back(json{{"round", round},
                                                   {"direction", std::string(to_string(rec.direction))},
                                                   {"original_input_digest", rec.original_input_digest}});
      ++out.applied;
    } else {
      ++out.rejected;
      if (r && !(*r)["candidate"].is_null()) {
        UnifiedSample cand = original;
        cand.input = (*r)["candidate"]["input"].get<std::string>();
        cand.output = (*r)["candidate"]["output"].get<std::string>();
        cand.metadata["rejected_rewrite"] = json{
            {"round", round}, {"direction", std::string(to_string(rec.direction))}, {"reason", rec.reason}};
        out.rejected_candidates.push_back(std::move(cand));
      }
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

json to_json(const QualityReport& r) {
  json initial = json::array();
  for (const auto& s : r.scores_initial) initial.push_back(sdg::to_json(s));
  json final_scores = json::array();
  for (const auto& s : r.scores_final) final_scores.push_back(sdg::to_json(s));
  json cats = json::array();
  for (auto c : r.categories) cats.push_back(std::string(sdg::to_string(c)));
  json records = json::array();
  for (const auto& rec : r.records) records.push_back(to_json(rec));
  return json{{"counts", {{"solved", r.solved}, {"learnable", r.learnable}, {"unsolved", r.unsolved}}},
              {"rewrites_applied", r.rewrites_applied},
              {"rewrites_rejected", r.rewrites_rejected},
              {"categories", cats},
              {"scores_initial", initial},
              {"scores_final", final_scores},
              {"rewrite_records", records}};
}

QualityResult run_quality_loop(llm::Gateway& gateway, const std::vector<UnifiedSample>& dataset,
                               const QualityConfig& quality, const EndpointConfig& generator,
                               const std::string& instruction, const RunSettings& settings) {
  auto& progress = *settings.progress;
  QualityResult result;
  result.dataset = dataset;
  auto categorize_all = [&](const std::vector<EvalScore>& scores) {
    std::vector<Category> cats;
    cats.reserve(scores.size());
    for (const auto& s : scores) cats.push_back(categorize(s.score, quality.threshold_solved, quality.threshold_unsolved));
    return cats;
  };

  progress.log_line("quality: evaluating " + std::to_string(dataset.size()) + " samples");
  auto scores = evaluate(gateway, result.dataset, quality.base_model, quality.judge, quality.attempts_k, settings);
  result.report.scores_initial = scores;

  for (int round = 1; round <= quality.max_rewrite_rounds; ++round) {
    auto cats = categorize_all(scores);
    if (std::all_of(cats.begin(), cats.end(), [](Category c) { return c == Category::Learnable; })) break;
    auto outcome =
        rewrite(gateway, result.dataset, cats, generator, quality.judge, instruction, settings, round);
    result.report.rewrites_applied += outcome.applied;
    result.report.rewrites_rejected += outcome.rejected;
    for (auto& c : outcome.rejected_candidates) result.rejected_rewrites.push_back(std::move(c));
    result.dataset = std::move(outcome.samples);

    std::vector<std::size_t> changed;
    std::vector<UnifiedSample> to_score;
    for (const auto& rec : outcome.records) {
      result.report.records.push_back(rec);
      if (rec.validated) {
        changed.push_back(rec.index);
        to_score.push_back(result.dataset[rec.index]);
      }
    }
    progress.log_line("quality: round " + std::to_string(round) + " applied " + std::to_string(outcome.applied) +
                      " rewrites, rejected " + std::to_string(outcome.rejected));
    if (changed.empty()) break;
    auto rescored = evaluate(gateway, to_score, quality.base_model, quality.judge, quality.attempts_k, settings);
    for (std::size_t i = 0; i < changed.size(); ++i) {
      rescored[i].sample_ref = changed[i];
      scores[changed[i]] = rescored[i];
    }
  }

  result.report.scores_final = scores;
  result.report.categories = categorize_all(scores);
  for (std::size_t i = 0; i < result.dataset.size(); ++i) {
    auto& sample = result.dataset[i];
    if (!sample.metadata.is_object()) sample.metadata = json::object();
    sample.metadata["scores"] = json{{"difficulty", scores[i].score},
                                     {"category", std::string(sdg::to_string(result.report.categories[i]))}};
    if (scores[i].partial) sample.metadata["partial_eval"] = true;
    switch (result.report.categories[i]) {
      case Category::Solved:
        ++result.report.solved;
        result.solved.push_back(sample);
        break;
      case Category::Learnable:
        ++result.report.learnable;
        result.learnable.push_back(sample);
        break;
      case Category::Unsolved:
        ++result.report.unsolved;
        result.unsolved.push_back(sample);
        break;
    }
  }
  return result;
}

void write_quality_outputs(const std::filesystem::path& dir, const QualityResult& result) {
  text::write_file_atomic(dir / "quality_report.json", to_json(result.report).dump(2));
  write_jsonl(dir / "learnable.jsonl", result.learnable);
  write_jsonl(dir / "solved.jsonl", result.solved);
  write_jsonl(dir / "unsolved.jsonl", result.unsolved);
  write_jsonl(dir / "rejected_rewrites.jsonl", result.rejected_rewrites);
}

}  // namespace sdg::quality
