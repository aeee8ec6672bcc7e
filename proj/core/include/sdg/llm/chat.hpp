#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sdg/core/config.hpp"

namespace sdg::llm {

enum class Role { System, User, Assistant };
std::string_view to_string(Role r) noexcept;

struct ChatMessage {
  Role role = Role::User;
  std::string content;
  std::optional<std::string> image;  // resource URI (file://...) of an attached image

  static ChatMessage system(std::string content) { return {Role::System, std::move(content), std::nullopt}; }
  static ChatMessage user(std::string content, std::optional<std::string> image = std::nullopt) {
    return {Role::User, std::move(content), std::move(image)};
  }
  static ChatMessage assistant(std::string content) { return {Role::Assistant, std::move(content), std::nullopt}; }
};

enum class ResponseHint { FreeText, JsonObject, JsonLines };

struct ChatRequest {
  std::vector<ChatMessage> messages;
  std::optional<double> temperature;  // falls back to the endpoint's temperature
  std::optional<int> max_tokens;      // falls back to the endpoint's max_tokens
  ResponseHint hint = ResponseHint::FreeText;
  // Forwarded as the OpenAI `seed` parameter; also lets repeated attempts of
  // one prompt be told apart.
  std::optional<std::int64_t> seed;

  // All message contents joined by newlines; what mock rules match against.
  std::string transcript() const;
  const ChatMessage* last_user() const;
};

struct ChatResponse {
  std::string content;
  std::int64_t tokens_prompt = 0;
  std::int64_t tokens_completion = 0;
  double latency_s = 0.0;
};

// One round-trip to a chat-completions provider. Implementations throw
// sdg::Error(AuthError) or sdg::TransportFailure; they never retry.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse send(const EndpointConfig& endpoint, const ChatRequest& request) = 0;
};

}  // namespace sdg::llm
