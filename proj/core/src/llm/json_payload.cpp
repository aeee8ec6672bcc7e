#include "sdg/llm/json_payload.hpp"

#include <optional>

#include "sdg/error.hpp"

namespace sdg::llm {

namespace {

using nlohmann::json;

// Index of the bracket closing the value opened at `start`, honouring JSON
// string literals. npos when the brackets never balance.
std::size_t matching_close(std::string_view s, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t j = start; j < s.size(); ++j) {
    const char c = s[j];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      if (--depth == 0) return j;
      if (depth < 0) return std::string_view::npos;
    }
  }
  return std::string_view::npos;
}

std::optional<json> first_balanced_value(std::string_view s, bool& saw_bracket) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '{' && s[i] != '[') continue;
    saw_bracket = true;
    auto end = matching_close(s, i);
    if (end == std::string_view::npos) continue;
    auto value = json::parse(s.substr(i, end - i + 1), nullptr, false);
    if (!value.is_discarded()) return value;
  }
  return std::nullopt;
}

std::optional<std::string_view> fenced_body(std::string_view s) {
  auto open = s.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  auto body_start = s.find('\n', open);
  if (body_start == std::string_view::npos) return std::nullopt;
  ++body_start;
  auto close = s.find("```", body_start);
  if (close == std::string_view::npos) return s.substr(body_start);
  return s.substr(body_start, close - body_start);
}

}  // namespace

json extract_json_payload(std::string_view content) {
  bool saw_bracket = false;
  if (auto body = fenced_body(content)) {
    if (auto v = first_balanced_value(*body, saw_bracket)) return *v;
  }
  if (auto v = first_balanced_value(content, saw_bracket)) return *v;
  if (!saw_bracket) throw Error(Errc::NoJsonFound, "no JSON object or array in model output");
  throw Error(Errc::UnbalancedJson, "model output contains brackets but no parseable JSON value");
}

}  // namespace sdg::llm
