#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>

#include "sdg/core/text.hpp"
#include "sdg/error.hpp"
#include "sdg/executors/executor.hpp"
#include "sdg/prompts.hpp"

namespace sdg::exec {

using nlohmann::json;

namespace {

std::vector<std::string> sample_queries(const std::vector<std::string>& keywords, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  for (auto i : sample_indices(rng, keywords.size(), kMaxKeywordQueries)) out.push_back(keywords[i]);
  return out;
}

llm::ChatRequest generation_request(const std::string& tmpl, const ParsedTask& parsed, std::string passages,
                                    std::string patterns, std::size_t count, std::size_t batch) {
  auto user = text::render_template(tmpl, {{"instruction", parsed.instruction},
                                           {"domain", parsed.domain.empty() ? "(unspecified)" : parsed.domain},
                                           {"passages", std::move(passages)},
                                           {"patterns", std::move(patterns)},
                                           {"format", parsed.format_constraints},
                                           {"examples", prompts::render_examples(parsed.examples)},
                                           {"count", std::to_string(count)},
                                           {"language", parsed.language},
                                           {"batch", std::to_string(batch)}});
  llm::ChatRequest r;
  r.messages.push_back(llm::ChatMessage::system("You write high-quality supervised training samples."));
  r.messages.push_back(llm::ChatMessage::user(std::move(user)));
  r.hint = llm::ResponseHint::JsonObject;
  return r;
}

std::string preview_text(const hub::DatasetCandidate& c, std::size_t rows) {
  std::string out;
  for (std::size_t i = 0; i < c.preview.size() && i < rows; ++i) {
    out += json(c.preview[i]).dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  return out.empty() ? "(empty)" : out;
}

}  // namespace

// ---------------------------------------------------------------- local

SourceHandle LocalExecutor::prepare(const ParsedTask& /*parsed*/) {
  const auto& local = *config_.local;
  retrieval::ChunkingOptions chunking;
  chunking.chunk_size = static_cast<std::size_t>(local.chunk_size);
  chunking.overlap = static_cast<std::size_t>(local.overlap);

  std::optional<retrieval::Bm25Index> index;
  fs::path cache;
  std::string key;
  if (!ctx_.checkpoint_dir.empty()) {
    key = text::sha256_hex(retrieval::corpus_content_hash(local.corpus_dir) + "|" + std::to_string(local.chunk_size) +
                           "|" + std::to_string(local.overlap));
    cache = ctx_.checkpoint_dir / "bm25-index.json";
    index = retrieval::Bm25Index::load(cache, key, local.k1, local.b);
    if (index) spdlog::info("reusing cached BM25 index {}", cache.string());
  }
  if (!index) {
    index = retrieval::Bm25Index::build(retrieval::ingest_corpus(local.corpus_dir, chunking), local.k1, local.b);
    if (!cache.empty()) index->save(cache, key);
  }
  return LocalSource{std::make_shared<const retrieval::Bm25Retriever>(std::move(*index))};
}

Constraints LocalExecutor::construct_constraints(const ParsedTask& parsed, const SourceHandle& source) {
  const auto& retriever = *std::get<LocalSource>(source).retriever;
  std::map<retrieval::PassageId, retrieval::Passage> hits;
  for (const auto& query : sample_queries(parsed.keywords, config_.task.seed)) {
    std::vector<retrieval::ScoredPassage> found;
    try {
      found = retriever.search(query, static_cast<std::size_t>(config_.local->top_k));
    } catch (const Error& e) {
      if (e.code() != Errc::EmptyQueryAfterTokenization) throw;
      continue;
    }
    for (const auto& h : found) hits.emplace(h.passage->id, *h.passage);
  }
  if (hits.empty()) throw Error(Errc::NoPassagesFound, "no corpus passage matches the task keywords");
  LocalConstraints c;
  for (auto& [_, p] : hits) c.passages.push_back(std::move(p));
  return c;
}

Acquisition LocalExecutor::data_acquisition(const ParsedTask& parsed, const SourceHandle& /*source*/,
                                            const Constraints& constraints, std::size_t n) {
  const auto& passages = std::get<LocalConstraints>(constraints).passages;
  const auto tmpl = generation_template(prompts::default_local_template());
  return run_generation(config_.generator, SampleSource::Local, n,
                        [&](std::size_t batch, std::size_t count, json& meta) {
                          auto rng = batch_rng(config_.task.seed, batch);
                          std::string text;
                          json ids = json::array();
                          for (auto i : sample_indices(rng, passages.size(), kPassagesPerBatch)) {
                            const auto& p = passages[i];
                            text += "[" + p.id.str() + "] " + p.text + "\n\n";
                            ids.push_back(p.id.str());
                          }
                          meta["reference_passage_ids"] = ids;
                          return generation_request(tmpl, parsed, text::trim(text), "(none)", count, batch);
                        });
}

// ---------------------------------------------------------------- web

std::optional<std::string> WebExecutor::hub_token() const {
  const char* v = std::getenv(config_.web->hub_token_env.c_str());
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

SourceHandle WebExecutor::prepare(const ParsedTask& parsed) {
  if (!ctx_.hub) throw Error(Errc::Precondition, "web path needs a hub client");
  auto queries = sample_queries(parsed.keywords, config_.task.seed);
  return WebSource{ctx_.hub->search_datasets(queries, static_cast<std::size_t>(config_.web->max_candidate_datasets),
                                             hub_token())};
}

Constraints WebExecutor::construct_constraints(const ParsedTask& parsed, const SourceHandle& source) {
  const auto& candidates = std::get<WebSource>(source).candidates;
  const auto rows = static_cast<std::size_t>(config_.web->preview_rows);
  const auto token = hub_token();

  parallel::ParallelExecutor pool(executor_options(std::nullopt));
  pool.options().retry_limit = 0;
  auto exec = pool.execute(candidates, [&](const hub::DatasetCandidate& cand) {
    auto previewed = ctx_.hub->fetch_preview(cand, rows, token, config_.web->split);
    if (previewed.preview.empty()) throw Error(Errc::FieldSelectionFailed, cand.dataset_id + " has no preview rows");
    auto payload = ctx_.gateway->complete_json(
        config_.generator,
        prompts::field_selection_request(parsed.instruction, cand.dataset_id, previewed.columns,
                                         preview_text(previewed, 3)));
    auto col = [&](const char* key) -> std::string {
      if (!payload.is_object() || !payload.contains(key) || !payload[key].is_string()) return {};
      auto name = payload[key].get<std::string>();
      return std::find(previewed.columns.begin(), previewed.columns.end(), name) == previewed.columns.end() ? ""
                                                                                                           : name;
    };
    FieldMap fm{col("input"), col("output")};
    if (fm.input_col.empty() || fm.output_col.empty() || fm.input_col == fm.output_col) {
      throw Error(Errc::FieldSelectionFailed, "no usable input/output columns chosen for " + cand.dataset_id);
    }
    return json{{"candidate", hub::to_json(previewed)}, {"input", fm.input_col}, {"output", fm.output_col}};
  });

  WebConstraints c;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!exec.results[i]) {
      spdlog::warn("dropping dataset {}: {}", candidates[i].dataset_id, exec.errors[i]);
      continue;
    }
    const auto& r = *exec.results[i];
    auto cand = hub::candidate_from_json(r.at("candidate"));
    c.field_map[cand.dataset_id] = FieldMap{r.at("input").get<std::string>(), r.at("output").get<std::string>()};
    c.previewed.push_back(std::move(cand));
  }
  if (ctx_.cancel.requested()) throw Error(Errc::Cancelled, "cancelled during field selection");
  if (c.previewed.empty()) throw Error(Errc::FieldSelectionFailed, "no candidate dataset had usable fields");
  return c;
}

Acquisition WebExecutor::data_acquisition(const ParsedTask& parsed, const SourceHandle& /*source*/,
                                          const Constraints& constraints, std::size_t n) {
  Acquisition acq;
  if (n == 0) return acq;
  const auto& wc = std::get<WebConstraints>(constraints);
  const auto judge = judge_endpoint();

  auto opts = executor_options(std::string(kStepAcquisition));
  opts.on_item_done = [this](std::size_t idx, bool ok) { ctx_.progress->item_done(kStepAcquisition, idx, ok); };
  parallel::ParallelExecutor pool(opts);
  auto exec = pool.execute(wc.previewed, [&](const hub::DatasetCandidate& cand) {
    const auto& fm = wc.field_map.at(cand.dataset_id);
    std::string pairs;
    for (std::size_t i = 0; i < cand.preview.size() && i < 3; ++i) {
      pairs += json{{"input", cand.preview[i].at(fm.input_col)}, {"output", cand.preview[i].at(fm.output_col)}}.dump(
          -1, ' ', false, json::error_handler_t::replace);
      pairs += '\n';
    }
    auto payload = ctx_.gateway->complete_json(
        judge, prompts::dataset_score_request(parsed.instruction, cand.dataset_id, pairs));
    auto s = parse_dataset_score(cand.dataset_id, cand.downloads, payload);
    return json{{"task_consistency", s.task_consistency}, {"quality", s.quality}};
  });
  if (ctx_.cancel.requested()) throw Error(Errc::Cancelled, "cancelled during dataset scoring");

  acq.batches = wc.previewed.size();
  std::map<std::string, std::size_t> available;
  std::map<std::string, const hub::DatasetCandidate*> by_id;
  for (std::size_t i = 0; i < wc.previewed.size(); ++i) {
    const auto& cand = wc.previewed[i];
    if (!exec.results[i]) {
      ++acq.failed_batches;
      spdlog::warn("dataset {} could not be scored: {}", cand.dataset_id, exec.errors[i]);
      continue;
    }
    acq.scores.push_back(parse_dataset_score(cand.dataset_id, cand.downloads, *exec.results[i]));
    available[cand.dataset_id] = cand.preview.size();
    by_id[cand.dataset_id] = &cand;
  }
  if (acq.scores.empty()) throw Error(Errc::NoCandidates, "no candidate dataset could be scored");
  sort_scores(acq.scores);

  const auto quota = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * kOverGeneration));
  for (const auto& slot : plan_web_draw(acq.scores, available, quota)) {
    const auto& cand = *by_id.at(slot.dataset_id);
    const auto& fm = wc.field_map.at(slot.dataset_id);
    const auto& row = cand.preview[slot.row];
    UnifiedSample s;
    s.input = row.at(fm.input_col);
    s.output = row.at(fm.output_col);
    s.metadata = json{{"source", "web"}, {"dataset_id", slot.dataset_id}};
    acq.raw.push_back(std::move(s));
  }
  acq.quota_unreachable = acq.raw.size() < n;
  if (acq.quota_unreachable) {
    spdlog::warn("candidate datasets hold only {} rows for {} requested samples", acq.raw.size(), n);
  }
  return acq;
}

// ---------------------------------------------------------------- distill

ParsedTask DistillExecutor::task_parsing() {
  ParsedTask p;
  p.task_id = config_.task.id;
  p.instruction = config_.task.instruction;
  p.domain = config_.task.domain;
  p.language = config_.task.language;
  p.format_constraints = prompts::format_constraints();
  p.examples = load_seed_examples();
  p.teacher_params = config_.distill->teacher;
  return p;
}

SourceHandle DistillExecutor::prepare(const ParsedTask& parsed) {
  const auto& teacher = *parsed.teacher_params;
  try {
    (void)ctx_.gateway->complete(teacher, prompts::liveness_request());
  } catch (const Error& e) {
    throw Error(Errc::TeacherUnreachable, "teacher " + teacher.model + " at " + teacher.base_url +
                                              " did not answer: " + e.what());
  }
  return DistillSource{teacher};
}

Constraints DistillExecutor::construct_constraints(const ParsedTask& parsed, const SourceHandle& source) {
  const auto& teacher = std::get<DistillSource>(source).teacher;
  std::vector<std::string> patterns;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto reply = ctx_.gateway->complete(
        teacher, prompts::pattern_request(parsed.instruction, parsed.domain, prompts::render_examples(parsed.examples)));
    patterns = parse_patterns(reply.content);
    if (patterns.size() >= kMinPatterns) break;
  }
  if (patterns.size() < kMinPatterns) {
    throw Error(Errc::PatternExtractionFailed,
                "teacher produced " + std::to_string(patterns.size()) + " patterns; at least 3 are needed");
  }
  if (patterns.size() > kMaxPatterns) patterns.resize(kMaxPatterns);
  return DistillConstraints{std::move(patterns)};
}

Acquisition DistillExecutor::data_acquisition(const ParsedTask& parsed, const SourceHandle& source,
                                              const Constraints& constraints, std::size_t n) {
  const auto& teacher = std::get<DistillSource>(source).teacher;
  std::string patterns;
  for (const auto& p : std::get<DistillConstraints>(constraints).patterns) patterns += "- " + p + "\n";
  patterns = text::trim(patterns);
  const auto tmpl = generation_template(prompts::default_distill_template());
  return run_generation(teacher, SampleSource::Distill, n, [&](std::size_t batch, std::size_t count, json&) {
    return generation_request(tmpl, parsed, "(none)", patterns, count, batch);
  });
}

}  // namespace sdg::exec
