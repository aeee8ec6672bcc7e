#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "sdg/core/text.hpp"
#include "sdg/error.hpp"
#include "sdg/executors/executor.hpp"
#include "sdg/prompts.hpp"

namespace sdg::exec {

using nlohmann::json;

const std::vector<std::string>& step_names() {
  static const std::vector<std::string> names{kStepTaskParsing, kStepPrepare, kStepConstraints, kStepAcquisition,
                                              kStepStructure};
  return names;
}

std::mt19937_64 batch_rng(std::uint64_t seed, std::uint64_t index) {
  // splitmix-style mixing so neighbouring batches get unrelated streams
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return std::mt19937_64(z ^ (z >> 31));
}

std::vector<std::size_t> sample_indices(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::vector<std::string> normalize_keywords(const json& payload) {
  const json* list = &payload;
  if (payload.is_object()) {
    auto it = payload.find("keywords");
    if (it == payload.end()) return {};
    list = &*it;
  }
  std::vector<std::string> out;
  if (!list->is_array()) return out;
  std::set<std::string> seen;
  for (const auto& item : *list) {
    if (!item.is_string()) continue;
    auto kw = text::to_lower_ascii(text::trim(item.get<std::string>()));
    if (kw.empty() || !seen.insert(kw).second) continue;
    out.push_back(std::move(kw));
    if (out.size() == kMaxKeywords) break;
  }
  return out;
}

std::vector<std::string> parse_patterns(const std::string& raw) {
  std::vector<std::string> out;
  auto payload = json::parse(text::trim(raw), nullptr, false);
  if (payload.is_array()) {
    for (const auto& p : payload) {
      if (p.is_string() && !text::trim(p.get<std::string>()).empty()) out.push_back(text::trim(p.get<std::string>()));
    }
    return out;
  }
  std::istringstream in(raw);
  std::string line;
  while (std::getline(in, line)) {
    auto t = text::trim(line);
    std::string body;
    if (t.rfind("- ", 0) == 0 || t.rfind("* ", 0) == 0) {
      body = t.substr(2);
    } else {
      std::size_t digits = 0;
      while (digits < t.size() && std::isdigit(static_cast<unsigned char>(t[digits]))) ++digits;
      if (digits > 0 && digits + 1 < t.size() && (t[digits] == '.' || t[digits] == ')') && t[digits + 1] == ' ') {
        body = t.substr(digits + 2);
      }
    }
    body = text::trim(body);
    if (!body.empty()) out.push_back(std::move(body));
  }
  return out;
}

DatasetScore parse_dataset_score(const std::string& dataset_id, std::int64_t downloads, const json& payload) {
  auto read = [&](const char* key) {
    if (!payload.is_object() || !payload.contains(key)) {
      throw Error(Errc::InvalidValue, "dataset score for " + dataset_id + " lacks " + key);
    }
    const auto& v = payload.at(key);
    double d = 0;
    if (v.is_number()) {
      d = v.get<double>();
    } else if (v.is_string()) {
      try {
        d = std::stod(v.get<std::string>());
      } catch (const std::exception&) {
        throw Error(Errc::InvalidValue, "dataset score " + std::string(key) + " is not a number");
      }
    } else {
      throw Error(Errc::InvalidValue, "dataset score " + std::string(key) + " is not a number");
    }
    if (d != std::floor(d) || d < 1 || d > 10) {
      throw Error(Errc::InvalidValue, "dataset score " + std::string(key) + " must be an integer in 1..10");
    }
    return static_cast<int>(d);
  };
  DatasetScore s;
  s.dataset_id = dataset_id;
  s.downloads = downloads;
  s.task_consistency = read("task_consistency");
  s.quality = read("quality");
  return s;
}

void sort_scores(std::vector<DatasetScore>& scores) {
  std::sort(scores.begin(), scores.end(), [](const DatasetScore& a, const DatasetScore& b) {
    if (a.combined() != b.combined()) return a.combined() > b.combined();
    if (a.downloads != b.downloads) return a.downloads > b.downloads;
    return a.dataset_id < b.dataset_id;
  });
}

std::vector<DrawSlot> plan_web_draw(const std::vector<DatasetScore>& ranked,
                                    const std::map<std::string, std::size_t>& available, std::size_t quota) {
  std::vector<DrawSlot> slots;
  for (const auto& s : ranked) {
    if (slots.size() >= quota) break;
    auto it = available.find(s.dataset_id);
    if (it == available.end()) continue;
    for (std::size_t r = 0; r < it->second && slots.size() < quota; ++r) slots.push_back({s.dataset_id, r});
  }
  return slots;
}

std::vector<UnifiedSample> samples_from_generation(const json& payload, SampleSource source) {
  json single;
  const json* list = &payload;
  if (payload.is_object()) {
    if (auto it = payload.find("samples"); it != payload.end()) {
      list = &*it;
    } else if (payload.contains("input") && payload.contains("output")) {
      single = json::array({payload});  // a lone sample object is a one-element batch
      list = &single;
    } else {
      throw Error(Errc::GenerationParseFailure, "generation payload has no samples");
    }
  }
  if (!list->is_array()) throw Error(Errc::GenerationParseFailure, "generation payload is not an array");
  std::vector<UnifiedSample> out;
  for (const auto& item : *list) {
    if (!item.is_object()) continue;
    auto in = item.find("input");
    auto out_it = item.find("output");
    if (in == item.end() || out_it == item.end() || !in->is_string() || !out_it->is_string()) continue;
    UnifiedSample s;
    s.input = in->get<std::string>();
    s.output = out_it->get<std::string>();
    s.metadata = json{{"source", std::string(to_string(source))}};
    out.push_back(std::move(s));
  }
  if (out.empty()) throw Error(Errc::GenerationParseFailure, "generation payload holds no {input, output} objects");
  return out;
}

BaseTaskExecutor::BaseTaskExecutor(TaskConfig config, PipelineContext context)
    : config_(std::move(config)), ctx_(std::move(context)) {
  if (!ctx_.gateway) throw Error(Errc::Precondition, "executor needs a gateway");
  if (!ctx_.progress) ctx_.progress = &null_progress();
}

std::vector<UnifiedSample> BaseTaskExecutor::load_seed_examples() const {
  if (!config_.task.seed_examples) return {};
  ReadOptions opts;
  opts.strict = true;
  opts.default_source = config_.task.path;
  opts.default_task_id = config_.task.id;
  try {
    return read_jsonl(*config_.task.seed_examples, opts);
  } catch (const LineError& e) {
    throw LineError(Errc::SeedFileInvalid, e.line_no(),
                    "seed file " + config_.task.seed_examples->string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(Errc::SeedFileInvalid, "seed file " + config_.task.seed_examples->string() + ": " + e.what());
  }
}

std::string BaseTaskExecutor::generation_template(std::string_view fallback) const {
  if (config_.task.prompt_template) return text::read_file(*config_.task.prompt_template);
  return std::string(fallback);
}

EndpointConfig BaseTaskExecutor::judge_endpoint() const { return config_.quality.judge; }

std::vector<std::string> BaseTaskExecutor::extract_keywords(const ParsedTask& parsed) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      auto kw = normalize_keywords(
          ctx_.gateway->complete_json(config_.generator, prompts::keyword_request(parsed.instruction, parsed.domain)));
      if (!kw.empty()) return kw;
    } catch (const Error& e) {
      if (e.code() != Errc::ResponseFormatError) throw;
    }
    spdlog::warn("keyword extraction returned nothing usable (attempt {})", attempt + 1);
  }
  throw Error(Errc::KeywordExtractionEmpty, "generator returned no keywords for the task");
}

ParsedTask BaseTaskExecutor::task_parsing() {
  ParsedTask p;
  p.task_id = config_.task.id;
  p.instruction = config_.task.instruction;
  p.domain = config_.task.domain;
  p.language = config_.task.language;
  p.format_constraints = prompts::format_constraints();
  p.examples = load_seed_examples();
  p.keywords = extract_keywords(p);
  return p;
}

parallel::ExecutorOptions BaseTaskExecutor::executor_options(std::optional<std::string> checkpoint_step) const {
  parallel::ExecutorOptions o;
  o.n_workers = static_cast<std::size_t>(std::max(1, config_.parallel.n_workers));
  o.retry_limit = static_cast<std::size_t>(std::max(0, config_.parallel.retry_limit));
  o.cancel = ctx_.cancel;
  if (checkpoint_step && !ctx_.checkpoint_dir.empty() && !ctx_.job_id.empty()) {
    o.checkpoint = parallel::CheckpointOptions{ctx_.checkpoint_dir, ctx_.job_id, *checkpoint_step, std::nullopt};
  }
  return o;
}

Acquisition BaseTaskExecutor::run_generation(
    const EndpointConfig& endpoint, SampleSource source, std::size_t n,
    const std::function<llm::ChatRequest(std::size_t, std::size_t, json&)>& build) {
  Acquisition acq;
  if (n == 0) return acq;
  const std::size_t batch_size = static_cast<std::size_t>(std::max(1, config_.task.batch_size));
  const auto target = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * kOverGeneration));
  const std::size_t batches = (target + batch_size - 1) / batch_size;

  std::vector<std::size_t> counts(batches, batch_size);
  counts.back() = target - batch_size * (batches - 1);

  auto opts = executor_options(std::string(kStepAcquisition));
  opts.on_item_done = [this](std::size_t idx, bool ok) { ctx_.progress->item_done(kStepAcquisition, idx, ok); };
  parallel::ParallelExecutor pool(opts);
  auto exec = pool.execute(counts, [&](std::size_t count, std::size_t batch) {
    json meta = json::object();
    auto request = build(batch, count, meta);
    std::optional<std::string> image;
    if (!ctx_.images.empty()) {
      image = ctx_.images[batch % ctx_.images.size()];
      if (endpoint.multimodal) {
        for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
          if (it->role == llm::Role::User) {
            it->image = image;
            break;
          }
        }
      }
    }
    auto samples = samples_from_generation(ctx_.gateway->complete_json(endpoint, request), source);
    json out = json::array();
    for (auto& s : samples) {
      for (const auto& [k, v] : meta.items()) s.metadata[k] = v;
      if (image) s.image = image;
      out.push_back(to_json_value(s));
    }
    return out;
  });

  acq.batches = batches;
  std::string first_error;
  for (std::size_t i = 0; i < exec.results.size(); ++i) {
    if (!exec.results[i]) {
      ++acq.failed_batches;
      if (first_error.empty()) first_error = exec.errors[i];
      continue;
    }
    for (const auto& s : *exec.results[i]) acq.raw.push_back(sample_from_json(s));
  }
  if (ctx_.cancel.requested()) throw Error(Errc::Cancelled, "generation cancelled");
  if (acq.failed_batches == batches) {
    throw Error(Errc::GenerationParseFailure,
                "all " + std::to_string(batches) + " generation batches failed; first error: " + first_error);
  }
  if (batches >= kFailureWindow && acq.failed_batches * 2 > batches) {
    throw Error(Errc::GenerationParseFailure, std::to_string(acq.failed_batches) + " of " + std::to_string(batches) +
                                                  " generation batches failed; first error: " + first_error);
  }
  if (acq.failed_batches > 0) {
    spdlog::warn("{} of {} generation batches failed: {}", acq.failed_batches, batches, first_error);
  }
  return acq;
}

RunResult BaseTaskExecutor::structure_process(std::vector<UnifiedSample> raw, const ParsedTask& parsed,
                                              std::size_t n) const {
  RunResult r;
  r.requested = n;
  if (n == 0) return r;
  const ImageCatalog catalog(ctx_.images.begin(), ctx_.images.end());
  std::set<std::string> seen;
  for (auto& candidate : raw) {
    if (!candidate.metadata.is_object()) candidate.metadata = json::object();
    candidate.metadata["task_id"] = parsed.task_id;
    candidate.metadata["language"] = parsed.language;
    UnifiedSample valid;
    try {
      valid = validate_sample(std::move(candidate), catalog);
    } catch (const Error&) {
      ++r.dropped_invalid;
      continue;
    }
    if (!seen.insert(text::normalize_for_dedup(valid.input)).second) {
      ++r.dropped_duplicate;
      continue;
    }
    r.samples.push_back(std::move(valid));
    if (r.samples.size() == n) break;
  }
  if (r.samples.empty()) {
    throw Error(Errc::AllSamplesInvalid, "none of the " + std::to_string(raw.size()) + " raw samples passed validation");
  }
  return r;
}

RunResult BaseTaskExecutor::run() {
  auto& progress = *ctx_.progress;
  auto step = [&](const char* name, auto&& body, auto&& payload_of) {
    if (ctx_.cancel.requested()) throw Error(Errc::Cancelled, std::string("cancelled before ") + name);
    progress.step_started(name);
    try {
      auto value = body();
      progress.step_done(name, payload_of(value));
      return value;
    } catch (Error& e) {
      if (e.step().empty()) e.set_step(name);
      progress.step_failed(name, e.what());
      throw;
    } catch (const std::exception& e) {
      progress.step_failed(name, e.what());
      Error wrapped(Errc::IoError, e.what());
      wrapped.set_step(name);
      throw wrapped;
    }
  };

  const auto n = static_cast<std::size_t>(std::max(0, config_.task.num_samples));
  auto parsed = step(
      kStepTaskParsing, [&] { return task_parsing(); },
      [](const ParsedTask& p) { return json{{"keywords", p.keywords}, {"examples", p.examples.size()}}; });
  auto source = step(
      kStepPrepare, [&] { return prepare(parsed); },
      [](const SourceHandle& s) {
        if (const auto* l = std::get_if<LocalSource>(&s)) return json{{"passages", l->retriever->index().size()}};
        if (const auto* w = std::get_if<WebSource>(&s)) return json{{"candidates", w->candidates.size()}};
        return json{{"teacher", std::get<DistillSource>(s).teacher.model}};
      });
  auto constraints = step(
      kStepConstraints, [&] { return construct_constraints(parsed, source); },
      [](const Constraints& c) {
        if (const auto* l = std::get_if<LocalConstraints>(&c)) return json{{"passages", l->passages.size()}};
        if (const auto* w = std::get_if<WebConstraints>(&c)) return json{{"datasets", w->field_map.size()}};
        return json{{"patterns", std::get<DistillConstraints>(c).patterns.size()}};
      });
  auto acq = step(
      kStepAcquisition, [&] { return data_acquisition(parsed, source, constraints, n); },
      [](const Acquisition& a) {
        return json{{"raw", a.raw.size()},
                    {"batches", a.batches},
                    {"failed_batches", a.failed_batches},
                    {"quota_unreachable", a.quota_unreachable}};
      });
  auto result = step(
      kStepStructure, [&] { return structure_process(std::move(acq.raw), parsed, n); },
      [](const RunResult& r) {
        return json{{"produced", r.samples.size()},
                    {"dropped_invalid", r.dropped_invalid},
                    {"dropped_duplicate", r.dropped_duplicate}};
      });
  result.quota_unreachable = acq.quota_unreachable;
  if (result.samples.size() < n) {
    spdlog::warn("produced {} of {} requested samples", result.samples.size(), n);
  }
  return result;
}

std::unique_ptr<BaseTaskExecutor> make_executor(const TaskConfig& config, PipelineContext context) {
  switch (config.task.path) {
    case SampleSource::Local: return std::make_unique<LocalExecutor>(config, std::move(context));
    case SampleSource::Web: return std::make_unique<WebExecutor>(config, std::move(context));
    case SampleSource::Distill: return std::make_unique<DistillExecutor>(config, std::move(context));
  }
  throw Error(Errc::Precondition, "unknown synthesis path");
}

}  // namespace sdg::exec
