#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "sdg/llm/http_backend.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdlib>

#include "sdg/core/text.hpp"
#include "sdg/error.hpp"

namespace sdg::llm {

using nlohmann::json;

ParsedUrl parse_base_url(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw Error(Errc::InvalidValue, "not an absolute URL: " + std::string(url));
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(Errc::InvalidValue, "unsupported URL scheme: " + std::string(url));
  }
  auto host_start = scheme_end + 3;
  auto path_start = url.find('/', host_start);
  ParsedUrl out;
  out.scheme_host_port = std::string(url.substr(0, path_start));
  if (path_start != std::string_view::npos) {
    out.path_prefix = std::string(url.substr(path_start));
    while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  }
  if (host_start >= out.scheme_host_port.size()) throw Error(Errc::InvalidValue, "URL has no host: " + std::string(url));
  return out;
}

namespace {

std::string image_data_url(const std::string& uri) {
  std::string path = uri;
  if (path.rfind("file://", 0) == 0) path = path.substr(7);
  std::string mime = "image/png";
  auto lower = text::to_lower_ascii(path);
  if (lower.ends_with(".jpg") || lower.ends_with(".jpeg")) mime = "image/jpeg";
  return "data:" + mime + ";base64," + text::base64_encode(text::read_file(path));
}

}  // namespace

json HttpBackend::build_body(const EndpointConfig& endpoint, const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    json msg{{"role", std::string(to_string(m.role))}};
    if (m.image) {
      msg["content"] = json::array({json{{"type", "text"}, {"text", m.content}},
                                    json{{"type", "image_url"}, {"image_url", {{"url", image_data_url(*m.image)}}}}});
    } else {
      msg["content"] = m.content;
    }
    messages.push_back(std::move(msg));
  }
  json body{{"model", endpoint.model},
            {"messages", messages},
            {"temperature", request.temperature.value_or(endpoint.temperature)},
            {"max_tokens", request.max_tokens.value_or(endpoint.max_tokens)}};
  if (request.seed) body["seed"] = *request.seed;
  return body;
}

ChatResponse HttpBackend::parse_body(const json& body) {
  ChatResponse r;
  const auto& choices = body.at("choices");
  if (!choices.is_array() || choices.empty()) throw TransportFailure("response has no choices", false);
  const auto& content = choices[0].at("message").at("content");
  r.content = content.is_string() ? content.get<std::string>() : std::string();
  if (auto it = body.find("usage"); it != body.end() && it->is_object()) {
    r.tokens_prompt = it->value("prompt_tokens", std::int64_t{0});
    r.tokens_completion = it->value("completion_tokens", std::int64_t{0});
  }
  return r;
}

ChatResponse HttpBackend::send(const EndpointConfig& endpoint, const ChatRequest& request) {
  httplib::Headers headers;
  if (!endpoint.api_key_env.empty()) {
    const char* key = std::getenv(endpoint.api_key_env.c_str());
    if (!key || !*key) {
      throw Error(Errc::AuthError, "environment variable " + endpoint.api_key_env + " holding the API key is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  auto url = parse_base_url(endpoint.base_url);
  httplib::Client client(url.scheme_host_port);
  auto timeout = std::chrono::duration<double>(endpoint.timeout_s);
  auto secs = static_cast<time_t>(timeout.count());
  auto usecs = static_cast<time_t>((timeout.count() - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(std::min<time_t>(secs, 10), usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  const auto started = std::chrono::steady_clock::now();
  auto result = client.Post(url.path_prefix + "/chat/completions", headers, build_body(endpoint, request).dump(),
                            "application/json");
  if (!result) {
    throw TransportFailure("request to " + endpoint.base_url + " failed: " + httplib::to_string(result.error()), true);
  }
  const int status = result->status;
  if (status == 401 || status == 403) {
    throw Error(Errc::AuthError, "endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
  }
  if (status == 429 || status >= 500) {
    throw TransportFailure("HTTP " + std::to_string(status) + " from " + endpoint.base_url, true, status);
  }
  if (status < 200 || status >= 300) {
    throw TransportFailure("HTTP " + std::to_string(status) + " from " + endpoint.base_url + ": " +
                               result->body.substr(0, 512),
                           false, status);
  }
  auto body = json::parse(result->body, nullptr, false);
  if (body.is_discarded()) throw TransportFailure("response body is not JSON", false, status);
  ChatResponse r;
  try {
    r = parse_body(body);
  } catch (const json::exception& e) {
    throw TransportFailure(std::string("unexpected response shape: ") + e.what(), false, status);
  }
  r.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return r;
}

}  // namespace sdg::llm
