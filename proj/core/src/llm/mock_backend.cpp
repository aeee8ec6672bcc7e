#include "sdg/llm/mock_backend.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <set>
#include <thread>

#include "sdg/core/text.hpp"
#include "sdg/prompts.hpp"

namespace sdg::llm {

using nlohmann::json;

std::int64_t count_whitespace_tokens(std::string_view text) {
  return static_cast<std::int64_t>(text::split_whitespace(text).size());
}

void MockBackend::add_rule(MockRule rule) {
  std::lock_guard lock(mutex_);
  rules_.push_back(std::move(rule));
}

void MockBackend::add_rules(std::vector<MockRule> rules) {
  std::lock_guard lock(mutex_);
  for (auto& r : rules) rules_.push_back(std::move(r));
}

void MockBackend::add_priority_rule(MockRule rule) {
  std::lock_guard lock(mutex_);
  rules_.insert(rules_.begin(), std::move(rule));
}

std::size_t MockBackend::request_count() const {
  std::lock_guard lock(mutex_);
  return log_.size();
}

std::vector<ChatRequest> MockBackend::requests() const {
  std::lock_guard lock(mutex_);
  return log_;
}

ChatResponse MockBackend::send(const EndpointConfig& endpoint, const ChatRequest& request) {
  const std::string transcript = request.transcript();
  std::optional<MockRule> matched;
  std::smatch match;
  {
    std::lock_guard lock(mutex_);
    log_.push_back(request);
    for (const auto& rule : rules_) {
      if (rule.model && *rule.model != endpoint.model) continue;
      if (rule.seed && (!request.seed || *rule.seed != *request.seed)) continue;
      if (std::regex_search(transcript, match, rule.pattern)) {
        matched = rule;
        break;
      }
    }
  }

  std::string content;
  if (matched) {
    if (matched->latency_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(matched->latency_ms));
    switch (matched->failure) {
      case MockFailure::None: break;
      case MockFailure::Transport:
        throw TransportFailure("mock rule `" + matched->name + "` failed the request", false, 500);
      case MockFailure::TransientTransport:
        throw TransportFailure("mock rule `" + matched->name + "` failed the request", true, 503);
      case MockFailure::Auth: throw Error(Errc::AuthError, "mock rule `" + matched->name + "` rejected credentials");
    }
    if (const auto* text = std::get_if<std::string>(&matched->response)) {
      content = match.format(*text);
    } else {
      content = std::get<MockHandler>(matched->response)(endpoint, request, match);
    }
  } else {
    const ChatMessage* last = request.last_user();
    content = last ? last->content : std::string();
    if (text::trim(content) == "ping") content = "pong";
  }

  ChatResponse response;
  response.content = std::move(content);
  response.tokens_prompt = count_whitespace_tokens(transcript);
  response.tokens_completion = count_whitespace_tokens(response.content);
  return response;
}

std::vector<MockRule> parse_mock_rules(const json& doc) {
  std::vector<MockRule> rules;
  const json& list = doc.is_array() ? doc : doc.at("rules");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const json& r = list[i];
    MockRule rule;
    rule.name = r.value("name", fmt::format("rule{}", i));
    try {
      rule.pattern = std::regex(r.at("pattern").get<std::string>());
    } catch (const std::regex_error& e) {
      throw Error(Errc::InvalidValue, fmt::format("mock rule {}: bad pattern: {}", rule.name, e.what()));
    }
    if (r.contains("model")) rule.model = r["model"].get<std::string>();
    if (r.contains("seed")) rule.seed = r["seed"].get<std::int64_t>();
    if (r.contains("response")) {
      const auto& resp = r["response"];
      rule.response = resp.is_string() ? resp.get<std::string>() : resp.dump();
    }
    if (r.contains("fail")) {
      auto f = r["fail"].get<std::string>();
      if (f == "transport") {
        rule.failure = MockFailure::Transport;
      } else if (f == "transient") {
        rule.failure = MockFailure::TransientTransport;
      } else if (f == "auth") {
        rule.failure = MockFailure::Auth;
      } else {
        throw Error(Errc::InvalidValue, "mock rule " + rule.name + ": unknown failure kind " + f);
      }
    }
    rule.latency_ms = r.value("latency_ms", 0);
    rules.push_back(std::move(rule));
  }
  return rules;
}

std::vector<MockRule> load_mock_rules(const std::filesystem::path& path) {
  auto doc = json::parse(text::read_file(path), nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::InvalidValue, "mock rules file is not valid JSON: " + path.string());
  return parse_mock_rules(doc);
}

namespace {

std::string hex8(std::string_view s) { return fmt::format("{:08x}", text::fnv1a64(s) & 0xffffffffULL); }

std::vector<std::string> content_words(std::string_view s) {
  static const std::set<std::string> kStop = {"the",  "and",  "for",  "with", "that", "this", "from", "into",
                                              "about", "their", "which", "what", "when", "where", "your",
                                              "generate", "write", "question", "questions", "answer", "answers"};
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= 4 && !kStop.contains(cur) && seen.insert(cur).second) out.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

std::string sec_or(const ChatRequest& req, std::string_view heading, std::string fallback = {}) {
  auto v = prompts::section(req.transcript(), heading);
  return v ? *v : fallback;
}

MockRule handler_rule(std::string name, std::string_view pattern, MockHandler handler) {
  MockRule r;
  r.name = std::move(name);
  r.pattern = std::regex(std::string(pattern));
  r.response = std::move(handler);
  return r;
}

std::string regex_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::string_view(".^$|()[]{}*+?\\").find(c) != std::string_view::npos) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::vector<MockRule> default_pipeline_rules() {
  std::vector<MockRule> rules;

  rules.push_back(handler_rule("keywords", regex_escape(prompts::kKeywordMarker),
                               [](const EndpointConfig&, const ChatRequest& req, const std::smatch&) {
                                 auto words = content_words(sec_or(req, "Instruction") + " " + sec_or(req, "Domain"));
                                 if (words.size() > 10) words.resize(10);
                                 if (words.empty()) words.push_back("general");
                                 return json(words).dump();
                               }));

  rules.push_back(handler_rule(
      "generation", regex_escape(prompts::kGenerationMarker),
      [](const EndpointConfig&, const ChatRequest& req, const std::smatch&) {
        const std::string transcript = req.transcript();
        std::smatch m;
        int count = 5;
        static const std::regex kCount(R"(exactly (\d+) new)");
        if (std::regex_search(transcript, m, kCount)) count = std::stoi(m[1].str());
        const std::string tag = hex8(transcript);
        std::string material = sec_or(req, "Reference passages");
        if (material.empty() || material == "(none)") material = sec_or(req, "Pattern constraints");
        auto words = content_words(material + " " + sec_or(req, "Instruction"));
        if (words.empty()) words.push_back("topic");
        const std::string domain = sec_or(req, "Domain", "the domain");
        json arr = json::array();
        for (int i = 0; i < count; ++i) {
          std::string topic;
          for (int w = 0; w < 3; ++w) {
            if (w) topic += ' ';
            topic += words[(static_cast<std::size_t>(i) * 3 + static_cast<std::size_t>(w)) % words.size()];
          }
          arr.push_back({{"input", fmt::format("[{}-{}] Explain how {} applies in {}.", tag, i, topic, domain)},
                         {"output", fmt::format("In {}, {} is applied by reasoning from the source material "
                                                "step by step (ref {}-{}).",
                                                domain, topic, tag, i)}});
        }
        return "```json\n" + arr.dump(2) + "\n```";
      }));

  rules.push_back(handler_rule("patterns", regex_escape(prompts::kPatternMarker),
                               [](const EndpointConfig&, const ChatRequest& req, const std::smatch&) {
                                 const std::string domain = sec_or(req, "Domain", "the domain");
                                 return fmt::format(
                                     "Here are the patterns:\n"
                                     "- State the scenario in {0} terms before asking the question.\n"
                                     "- Require at least two reasoning steps to reach the answer.\n"
                                     "- Give the answer first, then a short justification.\n"
                                     "- Avoid ambiguous wording and keep one correct answer.",
                                     domain);
                               }));

  rules.push_back(handler_rule(
      "field_selection", regex_escape(prompts::kFieldSelectionMarker),
      [](const EndpointConfig&, const ChatRequest& req, const std::smatch&) {
        std::vector<std::string> columns;
        for (auto& c : text::split_whitespace(sec_or(req, "Columns"))) {
          if (!c.empty() && c.back() == ',') c.pop_back();
          columns.push_back(c);
        }
        auto pick = [&](std::initializer_list<std::string_view> prefs, std::size_t fallback) -> std::string {
          for (auto p : prefs) {
            for (const auto& c : columns) {
              if (text::to_lower_ascii(c) == p) return c;
            }
          }
          return fallback < columns.size() ? columns[fallback] : std::string();
        };
        auto in = pick({"question", "input", "prompt", "instruction", "query", "q"}, 0);
        auto out = pick({"answer", "output", "response", "completion", "target", "a"}, 1);
        return json{{"input", in}, {"output", out}}.dump();
      }));

  rules.push_back(handler_rule("dataset_score", regex_escape(prompts::kDatasetScoreMarker),
                               [](const EndpointConfig&, const ChatRequest& req, const std::smatch&) {
                                 auto h = text::fnv1a64(sec_or(req, "Dataset"));
                                 return json{{"task_consistency", 1 + static_cast<int>(h % 10)},
                                             {"quality", 1 + static_cast<int>((h >> 8) % 10)}}
                                     .dump();
                               }));

  rules.push_back(handler_rule("correctness", regex_escape(prompts::kCorrectnessMarker),
                               [](const EndpointConfig&, const ChatRequest& req, const std::smatch&) {
                                 auto reference = sec_or(req, "Reference answer");
                                 auto candidate = sec_or(req, "Candidate answer");
                                 bool correct = candidate == reference || text::fnv1a64(candidate) % 4 != 0;
                                 return json{{"correct", correct}}.dump();
                               }));

  rules.push_back(handler_rule("rewrite_validation", regex_escape(prompts::kRewriteValidationMarker),
                               [](const EndpointConfig&, const ChatRequest&, const std::smatch&) {
                                 return json{{"follows_instruction", true}, {"correct", true}}.dump();
                               }));

  rules.push_back(handler_rule("rewrite", regex_escape(prompts::kRewriteMarker),
                               [](const EndpointConfig&, const ChatRequest& req, const std::smatch&) {
                                 bool harden = sec_or(req, "Direction") == "harden";
                                 return json{{"input", (harden ? std::string("(harder) ") : std::string("(simpler) ")) +
                                                           sec_or(req, "Original input")},
                                             {"output", sec_or(req, "Original output")}}
                                     .dump();
                               }));

  rules.push_back(handler_rule("translation", regex_escape(prompts::kTranslationMarker),
                               [](const EndpointConfig&, const ChatRequest& req, const std::smatch&) {
                                 auto lang = sec_or(req, "Target language", "xx");
                                 return json{{"input", "[" + lang + "] " + sec_or(req, "Input")},
                                             {"output", "[" + lang + "] " + sec_or(req, "Output")}}
                                     .dump();
                               }));

  rules.push_back(handler_rule("geval", regex_escape(prompts::kGEvalMarker),
                               [](const EndpointConfig&, const ChatRequest& req, const std::smatch&) {
                                 auto reference = sec_or(req, "Reference answer");
                                 auto candidate = sec_or(req, "Candidate answer");
                                 int score = candidate == reference ? 5 : 1 + static_cast<int>(text::fnv1a64(candidate) % 4);
                                 return fmt::format("The candidate was compared with the reference.\n<score>{}</score>",
                                                    score);
                               }));

  rules.push_back(handler_rule("pairwise", regex_escape(prompts::kPairwiseMarker),
                               [](const EndpointConfig&, const ChatRequest& req, const std::smatch&) {
                                 auto reference = sec_or(req, "Reference answer");
                                 bool a = sec_or(req, "Candidate A") == reference;
                                 bool b = sec_or(req, "Candidate B") == reference;
                                 std::string choice = a == b ? "tie" : (a ? "A" : "B");
                                 return "Both responses were read.\n<choice>" + choice + "</choice>";
                               }));

  rules.push_back(handler_rule("attempt", regex_escape(prompts::kAttemptMarker),
                               [](const EndpointConfig& ep, const ChatRequest& req, const std::smatch&) {
                                 const ChatMessage* q = req.last_user();
                                 std::string question = q ? q->content : std::string();
                                 return fmt::format("Answer from {} ({}): {}", ep.model,
                                                    hex8(question + "#" + std::to_string(req.seed.value_or(0))),
                                                    question.substr(0, 48));
                               }));
  return rules;
}

}  // namespace sdg::llm
