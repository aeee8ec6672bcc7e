#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace sdg {

using json = nlohmann::json;

enum class SampleSource { Local, Web, Distill };

std::string_view to_string(SampleSource s) noexcept;
std::optional<SampleSource> parse_source(std::string_view s) noexcept;

// The one record shape every synthesis path emits.
//
// `metadata` must carry `source` (local|web|distill) and `task_id`; known optional
// keys are dataset_id, reference_passage_ids, language, scores, rewrite_history.
// Keys are kept sorted, which is the canonical order on disk.
struct UnifiedSample {
  std::string input;
  std::string output;
  std::optional<std::string> image;
  std::optional<std::string> audio;
  json metadata = json::object();

  bool operator==(const UnifiedSample&) const = default;
};

// Image URIs a sample may reference. Empty set means "multimodal off", in which
// case any image reference is dangling.
using ImageCatalog = std::set<std::string>;

// Trims text fields and checks the sample invariants. Throws sdg::Error with
// EmptyInput, EmptyOutput, BadSource or DanglingImageRef.
UnifiedSample validate_sample(UnifiedSample candidate, const ImageCatalog& images = {});

// Canonical single-line encoding: keys in order input, output, image, audio,
// metadata; absent optionals omitted.
std::string to_jsonl_line(const UnifiedSample& sample);
json to_json_value(const UnifiedSample& sample);

// Structural decode of one JSON object. Throws sdg::Error(SchemaViolation).
UnifiedSample sample_from_json(const json& value);

struct ReadOptions {
  // Also run validate_sample on every line (source/task_id rules).
  bool strict = true;
  // When set, samples missing metadata.source / task_id get these filled in
  // before validation (seed and evaluation files written by hand).
  std::optional<SampleSource> default_source;
  std::optional<std::string> default_task_id;
};

// Throws LineError(MalformedLine|SchemaViolation) or Error(IoError).
std::vector<UnifiedSample> read_jsonl(const std::filesystem::path& path, const ReadOptions& options = {});
std::vector<UnifiedSample> parse_jsonl(std::string_view content, const ReadOptions& options = {});

std::string serialize_jsonl(const std::vector<UnifiedSample>& samples);
void write_jsonl(const std::filesystem::path& path, const std::vector<UnifiedSample>& samples);

}  // namespace sdg
