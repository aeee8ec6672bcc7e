#include "sdg/llm/gateway.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <thread>

#include "sdg/error.hpp"
#include "sdg/llm/http_backend.hpp"
#include "sdg/llm/json_payload.hpp"
#include "sdg/llm/mock_backend.hpp"

namespace sdg::llm {

std::string_view to_string(Role r) noexcept {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

std::string ChatRequest::transcript() const {
  std::string out;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (i) out += '\n';
    out += messages[i].content;
  }
  return out;
}

const ChatMessage* ChatRequest::last_user() const {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::User) return &*it;
  }
  return nullptr;
}

EndpointUsage UsageLedger::total() const {
  EndpointUsage t;
  for (const auto& [_, u] : endpoints) {
    t.calls += u.calls;
    t.attempts += u.attempts;
    t.tokens_prompt += u.tokens_prompt;
    t.tokens_completion += u.tokens_completion;
    t.failures += u.failures;
  }
  return t;
}

std::string endpoint_key(const EndpointConfig& endpoint) { return endpoint.model + "@" + endpoint.base_url; }

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options)
    : backend_(std::move(backend)), options_(options) {}

std::shared_ptr<ChatBackend> Gateway::backend_from_environment() {
  const char* mock = std::getenv("SDG_MOCK_LLM");
  if (mock && std::string_view(mock) == "1") {
    auto backend = std::make_shared<MockBackend>();
    if (const char* rules = std::getenv("SDG_MOCK_RULES"); rules && *rules) {
      backend->add_rules(load_mock_rules(rules));
    }
    backend->add_rules(default_pipeline_rules());
    return backend;
  }
  return std::make_shared<HttpBackend>();
}

Gateway Gateway::from_environment(GatewayOptions options) { return Gateway(backend_from_environment(), options); }

void Gateway::set_usage_listener(UsageListener listener) {
  std::lock_guard lock(mutex_);
  listener_ = std::move(listener);
}

UsageLedger Gateway::usage() const {
  std::lock_guard lock(mutex_);
  return ledger_;
}

ChatResponse Gateway::send_with_retry(const EndpointConfig& endpoint, const ChatRequest& request,
                                      EndpointUsage& counters) {
  for (int attempt = 0;; ++attempt) {
    ++counters.attempts;
    try {
      return backend_->send(endpoint, request);
    } catch (const TransportFailure& e) {
      if (!e.transient() || attempt >= options_.retry_limit) throw;
      auto delay = options_.backoff_base * (1LL << std::min(attempt, 16));
      delay = std::min<std::chrono::milliseconds>(delay, options_.backoff_cap);
      spdlog::debug("transient failure from {} ({}), retry {} in {} ms", endpoint_key(endpoint), e.what(),
                    attempt + 1, delay.count());
      std::this_thread::sleep_for(delay);
    }
  }
}

ChatResponse Gateway::complete(const EndpointConfig& endpoint, const ChatRequest& request) {
  if (request.messages.empty()) throw Error(Errc::Precondition, "chat request has no messages");
  if (request.messages.back().role != Role::User) {
    throw Error(Errc::Precondition, "the last chat message must come from the user");
  }
  for (const auto& m : request.messages) {
    if (m.image && !endpoint.multimodal) {
      throw Error(Errc::Precondition, "endpoint " + endpoint_key(endpoint) + " is not multimodal-capable");
    }
  }

  EndpointUsage delta;
  delta.calls = 1;
  auto record = [&](const ChatResponse* response) {
    UsageListener listener;
    {
      std::lock_guard lock(mutex_);
      auto& u = ledger_.endpoints[endpoint_key(endpoint)];
      u.calls += delta.calls;
      u.attempts += delta.attempts;
      if (response) {
        u.tokens_prompt += response->tokens_prompt;
        u.tokens_completion += response->tokens_completion;
      } else {
        ++u.failures;
      }
      listener = listener_;
    }
    if (response && listener) listener(endpoint, *response);
  };

  try {
    ChatResponse response = send_with_retry(endpoint, request, delta);
    if (request.hint != ResponseHint::FreeText) {
      auto parse_error = [&](const std::string& content) -> std::optional<std::string> {
        try {
          if (request.hint == ResponseHint::JsonLines) {
            std::size_t pos = 0;
            bool any = false;
            while (pos <= content.size()) {
              auto nl = content.find('\n', pos);
              auto line = content.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
              pos = nl == std::string::npos ? content.size() + 1 : nl + 1;
              if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
              if (nlohmann::json::parse(line, nullptr, false).is_discarded()) return "line is not valid JSON: " + line;
              any = true;
            }
            if (!any) return std::string("no JSON lines found");
          } else {
            (void)extract_json_payload(content);
          }
          return std::nullopt;
        } catch (const Error& e) {
          return std::string(e.what());
        }
      };
      if (auto err = parse_error(response.content)) {
        ChatRequest repair = request;
        repair.messages.push_back(ChatMessage::assistant(response.content));
        repair.messages.push_back(ChatMessage::user("Your previous reply could not be parsed as JSON (" + *err +
                                                    "). Reply again with only the corrected JSON."));
        ChatResponse repaired = send_with_retry(endpoint, repair, delta);
        if (auto err2 = parse_error(repaired.content)) {
          throw Error(Errc::ResponseFormatError, "unparseable JSON after repair: " + *err2);
        }
        repaired.tokens_prompt += response.tokens_prompt;
        repaired.tokens_completion += response.tokens_completion;
        repaired.latency_s += response.latency_s;
        response = std::move(repaired);
      }
    }
    record(&response);
    return response;
  } catch (...) {
    record(nullptr);
    throw;
  }
}

nlohmann::json Gateway::complete_json(const EndpointConfig& endpoint, ChatRequest request) {
  if (request.hint == ResponseHint::FreeText) request.hint = ResponseHint::JsonObject;
  auto response = complete(endpoint, request);
  return extract_json_payload(response.content);
}

}  // namespace sdg::llm
