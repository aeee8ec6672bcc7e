#pragma once

#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <variant>
#include <vector>

#include "sdg/error.hpp"
#include "sdg/llm/chat.hpp"

namespace sdg::llm {

using MockHandler = std::function<std::string(const EndpointConfig&, const ChatRequest&, const std::smatch&)>;

enum class MockFailure { None, Transport, TransientTransport, Auth };

// One scripted behaviour. Rules are tried in insertion order; the first whose
// pattern matches the request transcript (and whose model/seed filters pass)
// produces the response.
struct MockRule {
  std::string name;
  std::regex pattern;
  std::optional<std::string> model;  // only requests to this model
  std::optional<std::int64_t> seed;  // only requests carrying this seed
  // Canned text (may use $1..$9 capture references) or a handler.
  std::variant<std::string, MockHandler> response;
  MockFailure failure = MockFailure::None;
  int latency_ms = 0;
};

// Deterministic offline chat backend. Identical requests always produce
// identical responses; tokens are counted by whitespace splitting.
// Without a matching rule the last user message is echoed back, except
// "ping" which answers "pong".
class MockBackend : public ChatBackend {
 public:
  MockBackend() = default;
  explicit MockBackend(std::vector<MockRule> rules) : rules_(std::move(rules)) {}

  void add_rule(MockRule rule);
  void add_rules(std::vector<MockRule> rules);
  // Rules added with priority run before every existing rule.
  void add_priority_rule(MockRule rule);

  ChatResponse send(const EndpointConfig& endpoint, const ChatRequest& request) override;

  std::size_t request_count() const;
  std::vector<ChatRequest> requests() const;

 private:
  mutable std::mutex mutex_;
  std::vector<MockRule> rules_;
  std::vector<ChatRequest> log_;
};

std::int64_t count_whitespace_tokens(std::string_view text);

// Loads rules from a JSON file:
// {"rules": [{"pattern": "...", "model": "...", "seed": 1, "response": "...",
//             "fail": "transport|transient|auth", "latency_ms": 10}]}
std::vector<MockRule> load_mock_rules(const std::filesystem::path& path);
std::vector<MockRule> parse_mock_rules(const nlohmann::json& doc);

// Rules that understand every built-in pipeline prompt, producing
// deterministic, well-formed content so full runs work offline.
std::vector<MockRule> default_pipeline_rules();

}  // namespace sdg::llm
