#include "sdg/core/sample.hpp"

#include "sdg/core/text.hpp"
#include "sdg/error.hpp"

namespace sdg {

std::string_view to_string(SampleSource s) noexcept {
  switch (s) {
    case SampleSource::Local: return "local";
    case SampleSource::Web: return "web";
    case SampleSource::Distill: return "distill";
  }
  return "local";
}

std::optional<SampleSource> parse_source(std::string_view s) noexcept {
  if (s == "local") return SampleSource::Local;
  if (s == "web") return SampleSource::Web;
  if (s == "distill") return SampleSource::Distill;
  return std::nullopt;
}

UnifiedSample validate_sample(UnifiedSample candidate, const ImageCatalog& images) {
  candidate.input = text::trim(candidate.input);
  candidate.output = text::trim(candidate.output);
  if (candidate.input.empty()) throw Error(Errc::EmptyInput, "sample input is empty");
  if (candidate.output.empty()) throw Error(Errc::EmptyOutput, "sample output is empty");

  if (!candidate.metadata.is_object()) throw Error(Errc::BadSource, "metadata must be an object");
  auto src = candidate.metadata.find("source");
  if (src == candidate.metadata.end() || !src->is_string() || !parse_source(src->get<std::string>())) {
    throw Error(Errc::BadSource, "metadata.source must be one of local, web, distill");
  }
  auto task = candidate.metadata.find("task_id");
  if (task == candidate.metadata.end() || !task->is_string() || task->get<std::string>().empty()) {
    throw Error(Errc::BadSource, "metadata.task_id is required");
  }
  if (candidate.image && !images.contains(*candidate.image)) {
    throw Error(Errc::DanglingImageRef, "image " + *candidate.image + " is not a declared seed image");
  }
  return candidate;
}

json to_json_value(const UnifiedSample& sample) {
  json j = json::object();
  j["input"] = sample.input;
  j["output"] = sample.output;
  if (sample.image) j["image"] = *sample.image;
  if (sample.audio) j["audio"] = *sample.audio;
  j["metadata"] = sample.metadata;
  return j;
}

std::string to_jsonl_line(const UnifiedSample& sample) {
  constexpr auto kReplace = json::error_handler_t::replace;
  std::string line = "{\"input\":";
  line += json(sample.input).dump(-1, ' ', false, kReplace);
  line += ",\"output\":";
  line += json(sample.output).dump(-1, ' ', false, kReplace);
  if (sample.image) {
    line += ",\"image\":";
    line += json(*sample.image).dump(-1, ' ', false, kReplace);
  }
  if (sample.audio) {
    line += ",\"audio\":";
    line += json(*sample.audio).dump(-1, ' ', false, kReplace);
  }
  line += ",\"metadata\":";
  line += sample.metadata.dump(-1, ' ', false, kReplace);
  line += '}';
  return line;
}

UnifiedSample sample_from_json(const json& value) {
  if (!value.is_object()) throw Error(Errc::SchemaViolation, "record is not a JSON object");
  UnifiedSample s;
  auto required_string = [&](const char* key) -> std::string {
    auto it = value.find(key);
    if (it == value.end()) throw Error(Errc::SchemaViolation, std::string("missing `") + key + "`");
    if (!it->is_string()) throw Error(Errc::SchemaViolation, std::string("`") + key + "` must be a string");
    return it->get<std::string>();
  };
  auto optional_string = [&](const char* key) -> std::optional<std::string> {
    auto it = value.find(key);
    if (it == value.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw Error(Errc::SchemaViolation, std::string("`") + key + "` must be a string");
    return it->get<std::string>();
  };
  s.input = required_string("input");
  s.output = required_string("output");
  s.image = optional_string("image");
  s.audio = optional_string("audio");
  if (auto it = value.find("metadata"); it != value.end() && !it->is_null()) {
    if (!it->is_object()) throw Error(Errc::SchemaViolation, "`metadata` must be an object");
    s.metadata = *it;
  }
  for (const auto& [key, _] : value.items()) {
    if (key != "input" && key != "output" && key != "image" && key != "audio" && key != "metadata") {
      throw Error(Errc::SchemaViolation, "unexpected key `" + key + "`");
    }
  }
  return s;
}

std::vector<UnifiedSample> parse_jsonl(std::string_view content, const ReadOptions& options) {
  std::vector<UnifiedSample> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto nl = content.find('\n', pos);
    auto line = content.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? content.size() : nl + 1;
    ++line_no;
    if (text::trim(line).empty()) continue;

    json value = json::parse(line, nullptr, false);
    if (value.is_discarded()) throw LineError(Errc::MalformedLine, line_no, "not valid JSON");
    try {
      auto sample = sample_from_json(value);
      if (options.default_source && !sample.metadata.contains("source")) {
        sample.metadata["source"] = std::string(to_string(*options.default_source));
      }
      if (options.default_task_id && !sample.metadata.contains("task_id")) {
        sample.metadata["task_id"] = *options.default_task_id;
      }
      if (options.strict) {
        // Only the invariants are enforced here; trimming is a writer-side concern.
        (void)validate_sample(sample, sample.image ? ImageCatalog{*sample.image} : ImageCatalog{});
      }
      out.push_back(std::move(sample));
    } catch (const LineError&) {
      throw;
    } catch (const Error& e) {
      throw LineError(Errc::SchemaViolation, line_no, e.what());
    }
  }
  return out;
}

std::vector<UnifiedSample> read_jsonl(const std::filesystem::path& path, const ReadOptions& options) {
  return parse_jsonl(text::read_file(path), options);
}

std::string serialize_jsonl(const std::vector<UnifiedSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += to_jsonl_line(s);
    out += '\n';
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<UnifiedSample>& samples) {
  text::write_file_atomic(path, serialize_jsonl(samples));
}

}  // namespace sdg
