#pragma once

#include <nlohmann/json.hpp>

#include <string_view>

namespace sdg::llm {

// Pulls the first balanced JSON object or array out of model output.
// Fenced ``` blocks are tried first. Throws sdg::Error(NoJsonFound) when no
// bracket appears at all and sdg::Error(UnbalancedJson) when brackets exist
// but no parseable value does.
nlohmann::json extract_json_payload(std::string_view content);

}  // namespace sdg::llm
