#include "sdg/evaluation/evaluation.hpp"

#include <regex>

#include "sdg/core/text.hpp"
#include "sdg/error.hpp"
#include "sdg/parallel/executor.hpp"
#include "sdg/prompts.hpp"

namespace sdg::evaluation {

std::string_view default_rubric(Metric metric) noexcept {
  switch (metric) {
    case Metric::AnswerCorrectness:
      return "5: the candidate reaches the same final answer as the reference with sound reasoning. "
             "3: partially correct or correct answer with flawed reasoning. "
             "1: wrong or missing answer.";
    case Metric::FormatCompliance:
      return "5: the candidate follows the format the question asks for (structure, length, required fields). "
             "3: minor format deviations. "
             "1: ignores the requested format.";
    case Metric::PairwisePreference:
      return "Prefer the response that is more correct with respect to the reference; break ties on clarity "
             "and adherence to the requested format.";
  }
  return "";
}

std::optional<int> parse_score_tag(std::string_view reply) {
  static const std::regex kTag(R"(<score>\s*(\d+)\s*</score>)", std::regex::icase);
  std::optional<int> found;
  const std::string s(reply);
  for (std::sregex_iterator it(s.begin(), s.end(), kTag), end; it != end; ++it) {
    const auto digits = (*it)[1].str();
    if (digits.size() > 2) {
      found.reset();
      continue;
    }
    const int v = std::stoi(digits);
    found = (v >= 1 && v <= 5) ? std::optional<int>(v) : std::nullopt;
  }
  return found;
}

std::optional<double> parse_choice_tag(std::string_view reply) {
  static const std::regex kTag(R"(<choice>\s*([A-Za-z]+)\s*</choice>)");
  std::optional<double> found;
  const std::string s(reply);
  for (std::sregex_iterator it(s.begin(), s.end(), kTag), end; it != end; ++it) {
    const auto v = text::to_lower_ascii((*it)[1].str());
    if (v == "a") {
      found = 1.0;
    } else if (v == "b") {
      found = 0.0;
    } else if (v == "tie") {
      found = 0.5;
    } else {
      found.reset();
    }
  }
  return found;
}

double normalize_score(int s) noexcept { return (s - 1) / 4.0; }

std::optional<double> geval_score(llm::Gateway& gateway, Metric metric, const EvalItem& item,
                                  const EndpointConfig& judge, std::string_view rubric) {
  const bool pairwise = metric == Metric::PairwisePreference;
  if (pairwise && !item.candidate_b) throw Error(Errc::Precondition, "pairwise preference needs a second candidate");
  const std::string_view r = rubric.empty() ? default_rubric(metric) : rubric;
  auto request = pairwise ? prompts::pairwise_request(r, item.question, item.reference, item.candidate, *item.candidate_b)
                          : prompts::geval_request(to_string(metric), r, item.question, item.reference, item.candidate);
  auto parse = [&](const std::string& reply) -> std::optional<double> {
    if (pairwise) return parse_choice_tag(reply);
    if (auto s = parse_score_tag(reply)) return normalize_score(*s);
    return std::nullopt;
  };

  auto reply = gateway.complete(judge, request);
  if (auto v = parse(reply.content)) return v;

  request.messages.push_back(llm::ChatMessage::assistant(reply.content));
  request.messages.push_back(llm::ChatMessage::user(
      pairwise ? "Your reply had no final verdict. Reply with only <choice>A</choice>, <choice>B</choice> or "
                 "<choice>tie</choice>."
               : "Your reply had no valid final score. Reply with only <score>N</score>, N an integer from 1 to 5."));
  reply = gateway.complete(judge, request);
  return parse(reply.content);
}

std::size_t MetricResult::missing() const noexcept {
  std::size_t n = 0;
  for (const auto& v : per_item) n += v ? 0 : 1;
  return n;
}

std::optional<double> MetricResult::aggregate() const noexcept {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : per_item) {
    if (!v) continue;
    sum += *v;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

json to_json(const MetricResult& r) {
  json items = json::array();
  for (const auto& v : r.per_item) items.push_back(v ? json(*v) : json(nullptr));
  auto agg = r.aggregate();
  return json{{"metric", std::string(to_string(r.metric))},
              {"aggregate", agg ? json(*agg) : json(nullptr)},
              {"scored", r.per_item.size() - r.missing()},
              {"missing", r.missing()},
              {"per_item", items}};
}

std::vector<MetricResult> evaluate_model(llm::Gateway& gateway, const EndpointConfig& model,
                                         const std::optional<EndpointConfig>& model_b,
                                         const std::vector<UnifiedSample>& eval_set,
                                         const std::vector<Metric>& metrics, const EndpointConfig& judge,
                                         const EvalRunOptions& options) {
  if (metrics.empty()) return {};
  const bool pairwise = std::find(metrics.begin(), metrics.end(), Metric::PairwisePreference) != metrics.end();
  if (pairwise && !model_b) throw Error(Errc::Precondition, "pairwise_preference needs a second model endpoint");

  parallel::ExecutorOptions opts;
  opts.n_workers = std::max<std::size_t>(1, options.n_workers);
  opts.retry_limit = 0;
  opts.cancel = options.cancel;
  parallel::ParallelExecutor pool(opts);

  auto ask = [&](const EndpointConfig& endpoint, const UnifiedSample& s) {
    auto request = prompts::attempt_request(s.input, 0, endpoint.temperature);
    if (s.image && endpoint.multimodal) request.messages.back().image = s.image;
    return text::trim(gateway.complete(endpoint, request).content);
  };
  auto answers = pool.execute(eval_set, [&](const UnifiedSample& s) {
    json j{{"a", ask(model, s)}};
    if (pairwise) j["b"] = ask(*model_b, s);
    return j;
  });
  if (options.cancel.requested()) throw Error(Errc::Cancelled, "evaluation cancelled");

  std::vector<std::pair<std::size_t, std::size_t>> cells;  // (metric index, item index)
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    for (std::size_t i = 0; i < eval_set.size(); ++i) {
      if (answers.results[i]) cells.emplace_back(m, i);
    }
  }
  auto scored = pool.execute(cells, [&](const std::pair<std::size_t, std::size_t>& cell) {
    const auto& s = eval_set[cell.second];
    const auto& a = *answers.results[cell.second];
    EvalItem item{s.input, s.output, a.at("a").get<std::string>(), std::nullopt};
    if (a.contains("b")) item.candidate_b = a.at("b").get<std::string>();
    auto v = geval_score(gateway, metrics[cell.first], item, judge, options.rubric);
    return v ? json(*v) : json(nullptr);
  });
  if (options.cancel.requested()) throw Error(Errc::Cancelled, "evaluation cancelled");

  std::vector<MetricResult> results(metrics.size());
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    results[m].metric = metrics[m];
    results[m].per_item.assign(eval_set.size(), std::nullopt);
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& r = scored.results[c];
    if (r && r->is_number()) results[cells[c].first].per_item[cells[c].second] = r->get<double>();
  }
  return results;
}

json eval_report(const EvalConfig& config, std::size_t items, const std::vector<MetricResult>& results) {
  json metrics = json::object();
  for (const auto& r : results) metrics[std::string(to_string(r.metric))] = to_json(r);
  json report{{"dataset", config.dataset.string()},
              {"items", items},
              {"model", config.model.model},
              {"judge", config.judge.model},
              {"metrics", metrics}};
  if (config.model_b) report["model_b"] = config.model_b->model;
  return report;
}

TrainExport export_for_training(const std::vector<UnifiedSample>& learnable, TrainMethod method, const fs::path& out_dir,
                                const std::optional<EndpointConfig>& judge, const std::string& rubric) {
  if (learnable.empty()) throw Error(Errc::EmptyDataset, "nothing to export: the learnable set is empty");
  TrainExport ex;
  ex.method = method;
  ex.dir = out_dir;
  ex.data_path = out_dir / "train.jsonl";
  ex.manifest_path = out_dir / "manifest.json";
  ex.count = learnable.size();

  std::string data;
  for (const auto& s : learnable) {
    nlohmann::ordered_json rec;
    rec["prompt"] = s.input;
    rec["response"] = s.output;
    if (s.image) rec["image"] = *s.image;
    data += rec.dump(-1, ' ', false, json::error_handler_t::replace);
    data += '\n';
  }
  text::write_file_atomic(ex.data_path, data);
  ex.sha256 = text::sha256_hex(data);

  const std::string method_name = method == TrainMethod::Sft ? "sft" : "grpo";
  if (method == TrainMethod::Grpo) {
    ex.reward_spec_path = out_dir / "reward_spec.json";
    nlohmann::ordered_json spec;
    spec["method"] = "grpo";
    spec["reward"] = "llm_judge";
    if (judge) {
      spec["judge"] = {{"base_url", judge->base_url}, {"model", judge->model}, {"api_key_env", judge->api_key_env}};
    } else {
      spec["judge"] = nullptr;
    }
    spec["rubric"] = rubric.empty() ? std::string(default_rubric(Metric::AnswerCorrectness)) : rubric;
    spec["score_format"] = "<score>N</score>";
    spec["score_range"] = {1, 5};
    spec["normalization"] = "(N - 1) / 4";
    text::write_file_atomic(*ex.reward_spec_path, spec.dump(2) + "\n");
  }

  nlohmann::ordered_json manifest;
  manifest["method"] = method_name;
  manifest["count"] = ex.count;
  manifest["sha256"] = ex.sha256;
  manifest["data"] = "train.jsonl";
  manifest["format"] = "chat_pairs";
  text::write_file_atomic(ex.manifest_path, manifest.dump(2) + "\n");
  return ex;
}

std::vector<std::pair<std::string, std::string>> read_training_pairs(const fs::path& data_path) {
  std::vector<std::pair<std::string, std::string>> out;
  const auto content = text::read_file(data_path);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    auto nl = content.find('\n', pos);
    auto line = std::string_view(content).substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? content.size() : nl + 1;
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (!j.is_object() || !j.contains("prompt") || !j.contains("response")) {
      throw LineError(Errc::MalformedLine, line_no, "expected {prompt, response}");
    }
    out.emplace_back(j["prompt"].get<std::string>(), j["response"].get<std::string>());
  }
  return out;
}

}  // namespace sdg::evaluation
