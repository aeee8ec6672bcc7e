#pragma once

#include "sdg/llm/chat.hpp"

namespace sdg::llm {

// OpenAI-compatible chat-completions over HTTP(S):
// POST {base_url}/chat/completions with a bearer key read from the
// environment variable named by endpoint.api_key_env.
class HttpBackend : public ChatBackend {
 public:
  ChatResponse send(const EndpointConfig& endpoint, const ChatRequest& request) override;

  // Request body as sent on the wire; exposed for tests.
  static nlohmann::json build_body(const EndpointConfig& endpoint, const ChatRequest& request);
  static ChatResponse parse_body(const nlohmann::json& body);
};

struct ParsedUrl {
  std::string scheme_host_port;  // "https://api.example.com:443"
  std::string path_prefix;       // "/v1" (no trailing slash)
};

// Throws sdg::Error(InvalidValue) for anything but absolute http(s) URLs.
ParsedUrl parse_base_url(std::string_view url);

}  // namespace sdg::llm
