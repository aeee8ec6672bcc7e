#include "sdg/core/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <initializer_list>
#include <regex>

#include "sdg/core/text.hpp"

namespace sdg {

namespace {

std::string join_path(std::string_view prefix, std::string_view key) {
  if (prefix.empty()) return std::string(key);
  return std::string(prefix) + "." + std::string(key);
}

bool is_iso639_1(std::string_view code) {
  return code.size() == 2 && std::islower(static_cast<unsigned char>(code[0])) &&
         std::islower(static_cast<unsigned char>(code[1]));
}

bool is_absolute_url(std::string_view url) {
  static const std::regex kUrl(R"(^(http|https)://[A-Za-z0-9._~\-]+(:[0-9]{1,5})?(/.*)?$)");
  return std::regex_match(url.begin(), url.end(), kUrl);
}

// Collects issues while reading a JSON document; readers return nullopt when
// the field is missing or ill-typed so callers keep their defaults.
class Checker {
 public:
  std::vector<ConfigIssue> issues;

  void add(Errc kind, std::string field, std::string message) {
    issues.push_back({kind, std::move(field), std::move(message)});
  }

  const json* child(const json& obj, std::string_view key) const {
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(std::string(key));
    if (it == obj.end() || it->is_null()) return nullptr;
    return &*it;
  }

  const json* object(const json& obj, std::string_view key, const std::string& prefix, bool required) {
    const json* v = child(obj, key);
    auto path = join_path(prefix, key);
    if (!v) {
      if (required) add(Errc::MissingField, path, "required block is missing");
      return nullptr;
    }
    if (!v->is_object()) {
      add(Errc::TypeMismatch, path, "expected a mapping");
      return nullptr;
    }
    return v;
  }

  std::optional<std::string> str(const json& obj, std::string_view key, const std::string& prefix,
                                 bool required) {
    const json* v = child(obj, key);
    auto path = join_path(prefix, key);
    if (!v) {
      if (required) add(Errc::MissingField, path, "required field is missing");
      return std::nullopt;
    }
    if (!v->is_string()) {
      add(Errc::TypeMismatch, path, "expected a string");
      return std::nullopt;
    }
    return v->get<std::string>();
  }

  std::optional<long long> integer(const json& obj, std::string_view key, const std::string& prefix,
                                   bool required, long long min_value) {
    const json* v = child(obj, key);
    auto path = join_path(prefix, key);
    if (!v) {
      if (required) add(Errc::MissingField, path, "required field is missing");
      return std::nullopt;
    }
    if (!v->is_number_integer()) {
      add(Errc::TypeMismatch, path, "expected an integer");
      return std::nullopt;
    }
    auto value = v->get<long long>();
    if (value < min_value) {
      add(Errc::InvalidValue, path, "must be >= " + std::to_string(min_value));
      return std::nullopt;
    }
    return value;
  }

  std::optional<double> number(const json& obj, std::string_view key, const std::string& prefix,
                               bool required) {
    const json* v = child(obj, key);
    auto path = join_path(prefix, key);
    if (!v) {
      if (required) add(Errc::MissingField, path, "required field is missing");
      return std::nullopt;
    }
    if (!v->is_number()) {
      add(Errc::TypeMismatch, path, "expected a number");
      return std::nullopt;
    }
    return v->get<double>();
  }

  std::optional<bool> boolean(const json& obj, std::string_view key, const std::string& prefix) {
    const json* v = child(obj, key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) {
      add(Errc::TypeMismatch, join_path(prefix, key), "expected a boolean");
      return std::nullopt;
    }
    return v->get<bool>();
  }

  void unknown_keys(const json& obj, const std::string& prefix, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) return;
    for (const auto& [key, _] : obj.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        add(Errc::UnknownKey, join_path(prefix, key), "unknown key");
      }
    }
  }

  void throw_if_any() const {
    if (!issues.empty()) throw ConfigError(issues);
  }
};

EndpointConfig read_endpoint(Checker& c, const json& obj, const std::string& prefix, double default_temperature,
                             const EndpointConfig* fallback = nullptr) {
  c.unknown_keys(obj, prefix, {"base_url", "model", "api_key_env", "temperature", "max_tokens", "timeout_s", "multimodal"});
  EndpointConfig e;
  if (fallback) e = *fallback;
  e.temperature = default_temperature;
  if (auto v = c.str(obj, "base_url", prefix, fallback == nullptr)) {
    if (!is_absolute_url(*v)) {
      c.add(Errc::InvalidValue, join_path(prefix, "base_url"), "must be an absolute http(s) URL");
    }
    e.base_url = *v;
  }
  if (auto v = c.str(obj, "model", prefix, fallback == nullptr)) {
    if (v->empty()) c.add(Errc::InvalidValue, join_path(prefix, "model"), "must not be empty");
    e.model = *v;
  }
  if (auto v = c.str(obj, "api_key_env", prefix, false)) e.api_key_env = *v;
  if (auto v = c.number(obj, "temperature", prefix, false)) {
    if (*v < 0) c.add(Errc::InvalidValue, join_path(prefix, "temperature"), "must be >= 0");
    e.temperature = *v;
  }
  if (auto v = c.integer(obj, "max_tokens", prefix, false, 1)) e.max_tokens = static_cast<int>(*v);
  if (auto v = c.number(obj, "timeout_s", prefix, false)) {
    if (*v <= 0) c.add(Errc::InvalidValue, join_path(prefix, "timeout_s"), "must be > 0");
    e.timeout_s = *v;
  }
  if (auto v = c.boolean(obj, "multimodal", prefix)) e.multimodal = *v;
  return e;
}

EndpointConfig default_generator() {
  EndpointConfig e;
  e.base_url = "https://api.openai.com/v1";
  e.model = "gpt-5-mini";
  e.api_key_env = "OPENAI_API_KEY";
  return e;
}

void read_language(Checker& c, const json& obj, std::string_view key, const std::string& prefix, std::string& out,
                   bool required) {
  if (auto v = c.str(obj, key, prefix, required)) {
    if (!is_iso639_1(*v)) {
      c.add(Errc::InvalidValue, join_path(prefix, key), "must be a two-letter ISO-639-1 code");
    }
    out = *v;
  }
}

json scalar_from_yaml(const YAML::Node& node) {
  const std::string& value = node.Scalar();
  if (node.Tag() == "!") return value;  // quoted
  static const std::regex kInt(R"(^[-+]?[0-9]+$)");
  static const std::regex kFloat(R"(^[-+]?(\.[0-9]+|[0-9]+(\.[0-9]*)?)([eE][-+]?[0-9]+)?$)");
  if (value == "~" || value == "null" || value == "Null" || value == "NULL" || value.empty()) return nullptr;
  if (value == "true" || value == "True" || value == "TRUE") return true;
  if (value == "false" || value == "False" || value == "FALSE") return false;
  if (std::regex_match(value, kInt)) {
    try {
      return std::stoll(value);
    } catch (const std::out_of_range&) {
      return value;
    }
  }
  if (std::regex_match(value, kFloat)) return std::stod(value);
  return value;
}

json yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Scalar:
      return scalar_from_yaml(node);
    case YAML::NodeType::Sequence: {
      json arr = json::array();
      for (const auto& item : node) arr.push_back(yaml_to_json(item));
      return arr;
    }
    case YAML::NodeType::Map: {
      json obj = json::object();
      for (const auto& kv : node) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return obj;
    }
  }
  return nullptr;
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : Error(issues.empty() ? Errc::InvalidValue : issues.front().kind,
            [&] {
              std::string msg = "invalid configuration:";
              for (const auto& i : issues) {
                msg += "\n  " + std::string(sdg::to_string(i.kind)) + " at `" + i.field + "`: " + i.message;
              }
              return msg;
            }()),
      issues_(std::move(issues)) {}

json ConfigError::to_json() const {
  json errors = json::array();
  for (const auto& i : issues_) {
    errors.push_back({{"kind", std::string(sdg::to_string(i.kind))}, {"field", i.field}, {"message", i.message}});
  }
  return json{{"errors", errors}};
}

std::string_view to_string(Metric m) noexcept {
  switch (m) {
    case Metric::AnswerCorrectness: return "answer_correctness";
    case Metric::FormatCompliance: return "format_compliance";
    case Metric::PairwisePreference: return "pairwise_preference";
  }
  return "answer_correctness";
}

std::optional<Metric> parse_metric(std::string_view s) noexcept {
  if (s == "answer_correctness") return Metric::AnswerCorrectness;
  if (s == "format_compliance") return Metric::FormatCompliance;
  if (s == "pairwise_preference") return Metric::PairwisePreference;
  return std::nullopt;
}

json parse_config_text(std::string_view text) {
  try {
    return yaml_to_json(YAML::Load(std::string(text)));
  } catch (const YAML::Exception& e) {
    throw ConfigError({{Errc::TypeMismatch, "", std::string("document is not valid YAML/JSON: ") + e.what()}});
  }
}

json load_config_document(const fs::path& path) {
  std::string content;
  try {
    content = text::read_file(path);
  } catch (const Error&) {
    throw ConfigError({{Errc::MissingField, "", "config file not found: " + path.string()}});
  }
  return parse_config_text(content);
}

TaskConfig validate_config(const json& raw) {
  Checker c;
  TaskConfig cfg;
  if (!raw.is_object()) {
    c.add(Errc::TypeMismatch, "", "config document must be a mapping");
    c.throw_if_any();
  }
  c.unknown_keys(raw, "", {"task", "source", "generator", "quality", "parallel", "output", "multimodal", "translate"});

  // task
  bool path_known = false;
  if (const json* task = c.object(raw, "task", "", true)) {
    const std::string p = "task";
    c.unknown_keys(*task, p, {"path", "id", "instruction", "domain", "language", "num_samples", "seed_examples",
                              "prompt_template", "seed", "batch_size"});
    if (auto v = c.str(*task, "path", p, true)) {
      if (auto parsed = parse_source(*v)) {
        cfg.task.path = *parsed;
        path_known = true;
      } else {
        c.add(Errc::UnknownPath, "task.path", "must be one of local, web, distill (got `" + *v + "`)");
      }
    }
    if (auto v = c.str(*task, "instruction", p, true)) {
      if (text::trim(*v).empty()) c.add(Errc::InvalidValue, "task.instruction", "must not be empty");
      cfg.task.instruction = *v;
    }
    if (auto v = c.str(*task, "domain", p, false)) cfg.task.domain = *v;
    if (auto v = c.str(*task, "id", p, false)) cfg.task.id = *v;
    read_language(c, *task, "language", p, cfg.task.language, false);
    if (auto v = c.integer(*task, "num_samples", p, true, 1)) cfg.task.num_samples = static_cast<int>(*v);
    if (auto v = c.str(*task, "seed_examples", p, false)) cfg.task.seed_examples = *v;
    if (auto v = c.str(*task, "prompt_template", p, false)) cfg.task.prompt_template = *v;
    if (auto v = c.integer(*task, "seed", p, false, 0)) cfg.task.seed = static_cast<std::uint64_t>(*v);
    if (auto v = c.integer(*task, "batch_size", p, false, 1)) cfg.task.batch_size = static_cast<int>(*v);
  }
  if (cfg.task.id.empty()) {
    cfg.task.id = "task-" + text::sha256_hex(std::string(to_string(cfg.task.path)) + "\n" + cfg.task.instruction +
                                             "\n" + cfg.task.domain)
                                .substr(0, 12);
  }

  // sources
  const json* source = c.object(raw, "source", "", path_known);
  if (source) {
    c.unknown_keys(*source, "source", {"local", "web", "distill"});
    const bool need_local = path_known && cfg.task.path == SynthesisPath::Local;
    const bool need_web = path_known && cfg.task.path == SynthesisPath::Web;
    const bool need_distill = path_known && cfg.task.path == SynthesisPath::Distill;

    if (const json* local = c.object(*source, "local", "source", need_local)) {
      const std::string p = "source.local";
      c.unknown_keys(*local, p, {"corpus_dir", "retriever", "top_k", "chunk_size", "overlap", "k1", "b"});
      LocalSourceConfig l;
      if (auto v = c.str(*local, "corpus_dir", p, true)) l.corpus_dir = *v;
      if (auto v = c.str(*local, "retriever", p, false)) {
        if (*v != "bm25") c.add(Errc::InvalidValue, p + ".retriever", "only `bm25` is available");
        l.retriever = *v;
      }
      if (auto v = c.integer(*local, "top_k", p, false, 1)) l.top_k = static_cast<int>(*v);
      if (auto v = c.integer(*local, "chunk_size", p, false, 1)) l.chunk_size = static_cast<int>(*v);
      if (auto v = c.integer(*local, "overlap", p, false, 0)) l.overlap = static_cast<int>(*v);
      if (l.overlap >= l.chunk_size) {
        c.add(Errc::CrossFieldViolation, p + ".overlap", "overlap must be smaller than chunk_size");
      }
      if (auto v = c.number(*local, "k1", p, false)) {
        if (*v < 0) c.add(Errc::InvalidValue, p + ".k1", "must be >= 0");
        l.k1 = *v;
      }
      if (auto v = c.number(*local, "b", p, false)) {
        if (*v < 0 || *v > 1) c.add(Errc::InvalidValue, p + ".b", "must be within [0, 1]");
        l.b = *v;
      }
      cfg.local = l;
    }
    if (const json* web = c.object(*source, "web", "source", need_web)) {
      const std::string p = "source.web";
      c.unknown_keys(*web, p, {"hub_token_env", "max_candidate_datasets", "preview_rows", "split"});
      WebSourceConfig w;
      if (auto v = c.str(*web, "hub_token_env", p, false)) w.hub_token_env = *v;
      if (auto v = c.integer(*web, "max_candidate_datasets", p, false, 1)) w.max_candidate_datasets = static_cast<int>(*v);
      if (auto v = c.integer(*web, "preview_rows", p, false, 1)) w.preview_rows = static_cast<int>(*v);
      if (auto v = c.str(*web, "split", p, false)) {
        if (v->empty()) c.add(Errc::InvalidValue, p + ".split", "must not be empty");
        w.split = *v;
      }
      cfg.web = w;
    }
    if (const json* distill = c.object(*source, "distill", "source", need_distill)) {
      c.unknown_keys(*distill, "source.distill", {"teacher"});
      DistillSourceConfig d;
      if (const json* teacher = c.object(*distill, "teacher", "source.distill", true)) {
        d.teacher = read_endpoint(c, *teacher, "source.distill.teacher", defaults::kGeneratorTemperature);
      }
      cfg.distill = d;
    }
  }

  // generator
  cfg.generator = default_generator();
  if (const json* gen = c.object(raw, "generator", "", false)) {
    auto fallback = default_generator();
    cfg.generator = read_endpoint(c, *gen, "generator", defaults::kGeneratorTemperature, &fallback);
  }

  // quality
  EndpointConfig judge_default = cfg.generator;
  judge_default.temperature = defaults::kJudgeTemperature;
  cfg.quality.judge = judge_default;
  if (const json* q = c.object(raw, "quality", "", false)) {
    const std::string p = "quality";
    c.unknown_keys(*q, p, {"enabled", "judge", "base_model", "attempts_k", "threshold_solved", "threshold_unsolved",
                           "max_rewrite_rounds"});
    if (auto v = c.boolean(*q, "enabled", p)) cfg.quality.enabled = *v;
    if (const json* j = c.object(*q, "judge", p, false)) {
      cfg.quality.judge = read_endpoint(c, *j, "quality.judge", defaults::kJudgeTemperature, &judge_default);
    }
    if (const json* bm = c.object(*q, "base_model", p, cfg.quality.enabled)) {
      cfg.quality.base_model = read_endpoint(c, *bm, "quality.base_model", 0.7);
    }
    if (auto v = c.integer(*q, "attempts_k", p, false, 1)) cfg.quality.attempts_k = static_cast<int>(*v);
    if (auto v = c.number(*q, "threshold_solved", p, false)) {
      if (*v < 0 || *v > 1) c.add(Errc::InvalidValue, "quality.threshold_solved", "must be a fraction in [0, 1]");
      cfg.quality.threshold_solved = *v;
    }
    if (auto v = c.number(*q, "threshold_unsolved", p, false)) {
      if (*v < 0 || *v > 1) c.add(Errc::InvalidValue, "quality.threshold_unsolved", "must be a fraction in [0, 1]");
      cfg.quality.threshold_unsolved = *v;
    }
    if (auto v = c.integer(*q, "max_rewrite_rounds", p, false, 0)) cfg.quality.max_rewrite_rounds = static_cast<int>(*v);
  }
  if (!(cfg.quality.threshold_unsolved < cfg.quality.threshold_solved)) {
    c.add(Errc::CrossFieldViolation, "quality.threshold_unsolved",
          "requires 0 <= threshold_unsolved < threshold_solved <= 1");
  }

  // parallel
  if (const json* par = c.object(raw, "parallel", "", false)) {
    const std::string p = "parallel";
    c.unknown_keys(*par, p, {"n_workers", "checkpoint_dir", "retry_limit"});
    if (auto v = c.integer(*par, "n_workers", p, false, 1)) cfg.parallel.n_workers = static_cast<int>(*v);
    if (auto v = c.str(*par, "checkpoint_dir", p, false)) cfg.parallel.checkpoint_dir = *v;
    if (auto v = c.integer(*par, "retry_limit", p, false, 0)) cfg.parallel.retry_limit = static_cast<int>(*v);
  }

  // output
  if (const json* out = c.object(raw, "output", "", false)) {
    c.unknown_keys(*out, "output", {"dir", "format"});
    if (auto v = c.str(*out, "dir", "output", false)) {
      if (v->empty()) c.add(Errc::InvalidValue, "output.dir", "must not be empty");
      cfg.output.dir = *v;
    }
    if (auto v = c.str(*out, "format", "output", false)) {
      if (*v != "jsonl") c.add(Errc::InvalidValue, "output.format", "only `jsonl` is supported");
      cfg.output.format = *v;
    }
  }

  // multimodal
  if (const json* mm = c.object(raw, "multimodal", "", false)) {
    c.unknown_keys(*mm, "multimodal", {"enabled", "seed_images_dir"});
    if (auto v = c.boolean(*mm, "enabled", "multimodal")) cfg.multimodal.enabled = *v;
    if (auto v = c.str(*mm, "seed_images_dir", "multimodal", false)) cfg.multimodal.seed_images_dir = *v;
  }
  if (cfg.multimodal.enabled) {
    std::error_code ec;
    const auto& dir = cfg.multimodal.seed_images_dir;
    if (!dir || !fs::is_directory(*dir, ec) || fs::is_empty(*dir, ec)) {
      c.add(Errc::CrossFieldViolation, "multimodal.seed_images_dir",
            "multimodal.enabled requires a non-empty seed image directory");
    }
  }

  // translate
  if (const json* tr = c.object(raw, "translate", "", false)) {
    c.unknown_keys(*tr, "translate", {"enabled", "target_language"});
    if (auto v = c.boolean(*tr, "enabled", "translate")) cfg.translate.enabled = *v;
    read_language(c, *tr, "target_language", "translate", cfg.translate.target_language, cfg.translate.enabled);
  }
  if (cfg.translate.enabled && cfg.translate.target_language == cfg.task.language) {
    c.add(Errc::CrossFieldViolation, "translate.target_language", "must differ from task.language");
  }

  c.throw_if_any();
  return cfg;
}

TrainConfig validate_train_config(const json& raw) {
  Checker c;
  TrainConfig cfg;
  if (!raw.is_object()) {
    c.add(Errc::TypeMismatch, "", "config document must be a mapping");
    c.throw_if_any();
  }
  c.unknown_keys(raw, "", {"train"});
  if (const json* t = c.object(raw, "train", "", true)) {
    const std::string p = "train";
    c.unknown_keys(*t, p, {"method", "data", "output_dir", "trainer_cmd", "judge", "rubric"});
    if (auto v = c.str(*t, "method", p, true)) {
      if (*v == "sft") {
        cfg.method = TrainMethod::Sft;
      } else if (*v == "grpo") {
        cfg.method = TrainMethod::Grpo;
      } else {
        c.add(Errc::InvalidValue, "train.method", "must be `sft` or `grpo`");
      }
    }
    if (auto v = c.str(*t, "data", p, true)) {
      cfg.data = *v;
      std::error_code ec;
      if (!fs::is_regular_file(cfg.data, ec)) c.add(Errc::InvalidValue, "train.data", "dataset file does not exist");
    }
    if (auto v = c.str(*t, "output_dir", p, true)) cfg.output_dir = *v;
    if (auto v = c.str(*t, "trainer_cmd", p, true)) {
      if (v->find("{data}") == std::string::npos) {
        c.add(Errc::InvalidValue, "train.trainer_cmd", "template must contain the {data} placeholder");
      }
      cfg.trainer_cmd = *v;
    }
    if (const json* j = c.object(*t, "judge", p, false)) {
      cfg.judge = read_endpoint(c, *j, "train.judge", defaults::kJudgeTemperature);
    }
    if (auto v = c.str(*t, "rubric", p, false)) cfg.rubric = *v;
  }
  c.throw_if_any();
  return cfg;
}

EvalConfig validate_eval_config(const json& raw) {
  Checker c;
  EvalConfig cfg;
  if (!raw.is_object()) {
    c.add(Errc::TypeMismatch, "", "config document must be a mapping");
    c.throw_if_any();
  }
  c.unknown_keys(raw, "", {"eval"});
  if (const json* e = c.object(raw, "eval", "", true)) {
    const std::string p = "eval";
    c.unknown_keys(*e, p, {"dataset", "model", "model_b", "judge", "metrics", "output_dir", "n_workers"});
    if (auto v = c.str(*e, "dataset", p, true)) {
      cfg.dataset = *v;
      std::error_code ec;
      if (!fs::is_regular_file(cfg.dataset, ec)) {
        c.add(Errc::InvalidValue, "eval.dataset", "evaluation dataset does not exist");
      }
    }
    if (const json* m = c.object(*e, "model", p, true)) {
      cfg.model = read_endpoint(c, *m, "eval.model", defaults::kJudgeTemperature);
    }
    if (const json* m = c.object(*e, "model_b", p, false)) {
      cfg.model_b = read_endpoint(c, *m, "eval.model_b", defaults::kJudgeTemperature);
    }
    if (const json* j = c.object(*e, "judge", p, true)) {
      cfg.judge = read_endpoint(c, *j, "eval.judge", defaults::kJudgeTemperature);
    }
    if (const json* m = c.child(*e, "metrics")) {
      if (!m->is_array()) {
        c.add(Errc::TypeMismatch, "eval.metrics", "expected a list");
      } else {
        for (const auto& item : *m) {
          auto parsed = item.is_string() ? parse_metric(item.get<std::string>()) : std::nullopt;
          if (!parsed) {
            c.add(Errc::InvalidValue, "eval.metrics", "unknown metric " + item.dump());
          } else if (std::find(cfg.metrics.begin(), cfg.metrics.end(), *parsed) == cfg.metrics.end()) {
            cfg.metrics.push_back(*parsed);
          }
        }
      }
    } else {
      cfg.metrics = {Metric::AnswerCorrectness, Metric::FormatCompliance};
    }
    if (auto v = c.str(*e, "output_dir", p, true)) cfg.output_dir = *v;
    if (auto v = c.integer(*e, "n_workers", p, false, 1)) cfg.n_workers = static_cast<int>(*v);
  }
  if (std::find(cfg.metrics.begin(), cfg.metrics.end(), Metric::PairwisePreference) != cfg.metrics.end() &&
      !cfg.model_b) {
    c.add(Errc::CrossFieldViolation, "eval.model_b", "pairwise_preference requires a second model endpoint");
  }
  c.throw_if_any();
  return cfg;
}

json to_json(const EndpointConfig& e) {
  return json{{"base_url", e.base_url},   {"model", e.model},         {"api_key_env", e.api_key_env},
              {"temperature", e.temperature}, {"max_tokens", e.max_tokens}, {"timeout_s", e.timeout_s},
              {"multimodal", e.multimodal}};
}

json to_json(const TaskConfig& c) {
  json task{{"path", std::string(to_string(c.task.path))},
            {"id", c.task.id},
            {"instruction", c.task.instruction},
            {"domain", c.task.domain},
            {"language", c.task.language},
            {"num_samples", c.task.num_samples},
            {"seed", c.task.seed},
            {"batch_size", c.task.batch_size}};
  if (c.task.seed_examples) task["seed_examples"] = c.task.seed_examples->string();
  if (c.task.prompt_template) task["prompt_template"] = c.task.prompt_template->string();

  json source = json::object();
  if (c.local) {
    source["local"] = {{"corpus_dir", c.local->corpus_dir.string()},
                       {"retriever", c.local->retriever},
                       {"top_k", c.local->top_k},
                       {"chunk_size", c.local->chunk_size},
                       {"overlap", c.local->overlap},
                       {"k1", c.local->k1},
                       {"b", c.local->b}};
  }
  if (c.web) {
    source["web"] = {{"hub_token_env", c.web->hub_token_env},
                     {"max_candidate_datasets", c.web->max_candidate_datasets},
                     {"preview_rows", c.web->preview_rows},
                     {"split", c.web->split}};
  }
  if (c.distill) source["distill"] = {{"teacher", to_json(c.distill->teacher)}};

  json quality{{"enabled", c.quality.enabled},
               {"judge", to_json(c.quality.judge)},
               {"attempts_k", c.quality.attempts_k},
               {"threshold_solved", c.quality.threshold_solved},
               {"threshold_unsolved", c.quality.threshold_unsolved},
               {"max_rewrite_rounds", c.quality.max_rewrite_rounds}};
  if (!c.quality.base_model.base_url.empty()) quality["base_model"] = to_json(c.quality.base_model);

  json multimodal{{"enabled", c.multimodal.enabled}};
  if (c.multimodal.seed_images_dir) multimodal["seed_images_dir"] = c.multimodal.seed_images_dir->string();
  json translate{{"enabled", c.translate.enabled}};
  if (!c.translate.target_language.empty()) translate["target_language"] = c.translate.target_language;

  json parallel{{"n_workers", c.parallel.n_workers}, {"retry_limit", c.parallel.retry_limit}};
  if (!c.parallel.checkpoint_dir.empty()) parallel["checkpoint_dir"] = c.parallel.checkpoint_dir.string();

  return json{{"task", task},
              {"source", source},
              {"generator", to_json(c.generator)},
              {"quality", quality},
              {"parallel", parallel},
              {"output", {{"dir", c.output.dir.string()}, {"format", c.output.format}}},
              {"multimodal", multimodal},
              {"translate", translate}};
}

json to_json(const TrainConfig& c) {
  json t{{"method", c.method == TrainMethod::Sft ? "sft" : "grpo"},
         {"data", c.data.string()},
         {"output_dir", c.output_dir.string()},
         {"trainer_cmd", c.trainer_cmd}};
  if (c.judge) t["judge"] = to_json(*c.judge);
  if (!c.rubric.empty()) t["rubric"] = c.rubric;
  return json{{"train", t}};
}

json to_json(const EvalConfig& c) {
  json metrics = json::array();
  for (auto m : c.metrics) metrics.push_back(std::string(to_string(m)));
  json e{{"dataset", c.dataset.string()}, {"model", to_json(c.model)},          {"judge", to_json(c.judge)},
         {"metrics", metrics},            {"output_dir", c.output_dir.string()}, {"n_workers", c.n_workers}};
  if (c.model_b) e["model_b"] = to_json(*c.model_b);
  return json{{"eval", e}};
}

}  // namespace sdg
