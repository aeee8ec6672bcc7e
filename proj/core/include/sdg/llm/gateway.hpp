#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "sdg/llm/chat.hpp"

namespace sdg::llm {

struct EndpointUsage {
  std::int64_t calls = 0;     // complete() invocations
  std::int64_t attempts = 0;  // transport round-trips, including retries and repairs
  std::int64_t tokens_prompt = 0;
  std::int64_t tokens_completion = 0;
  std::int64_t failures = 0;

  bool operator==(const EndpointUsage&) const = default;
};

// Cumulative per-endpoint counters keyed by "model@base_url". Counters only grow.
struct UsageLedger {
  std::map<std::string, EndpointUsage> endpoints;

  EndpointUsage total() const;
};

std::string endpoint_key(const EndpointConfig& endpoint);

struct GatewayOptions {
  int retry_limit = defaults::kRetryLimit;
  std::chrono::milliseconds backoff_base{250};
  std::chrono::milliseconds backoff_cap{8000};
};

// Called after every successful complete() with the returned response.
using UsageListener = std::function<void(const EndpointConfig&, const ChatResponse&)>;

// Single entry point for every chat-completion call in the pipeline.
// Safe for concurrent use.
class Gateway {
 public:
  Gateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options = {});

  // Mock backend when SDG_MOCK_LLM=1 (rules from SDG_MOCK_RULES, if set,
  // ahead of the built-in pipeline rules); OpenAI-compatible HTTP otherwise.
  static Gateway from_environment(GatewayOptions options = {});
  static std::shared_ptr<ChatBackend> backend_from_environment();

  // Retries transient transport failures with exponential backoff up to
  // retry_limit. For JSON hints, one repair round re-prompts the endpoint with
  // the parse error before giving up with ResponseFormatError.
  ChatResponse complete(const EndpointConfig& endpoint, const ChatRequest& request);

  // complete() with a JSON hint, returning the extracted payload.
  nlohmann::json complete_json(const EndpointConfig& endpoint, ChatRequest request);

  UsageLedger usage() const;
  void set_usage_listener(UsageListener listener);
  const GatewayOptions& options() const noexcept { return options_; }
  ChatBackend& backend() noexcept { return *backend_; }

 private:
  ChatResponse send_with_retry(const EndpointConfig& endpoint, const ChatRequest& request, EndpointUsage& attempts);

  std::shared_ptr<ChatBackend> backend_;
  GatewayOptions options_;
  mutable std::mutex mutex_;
  UsageLedger ledger_;
  UsageListener listener_;
};

}  // namespace sdg::llm
