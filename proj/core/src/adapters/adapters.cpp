#include "sdg/adapters/adapters.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <map>

#include "sdg/core/text.hpp"
#include "sdg/error.hpp"
#include "sdg/parallel/executor.hpp"
#include "sdg/prompts.hpp"

namespace sdg::adapters {

namespace fs = std::filesystem;
using nlohmann::json;

bool is_readable_image(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char magic[8] = {};
  if (!in.read(reinterpret_cast<char*>(magic), sizeof magic)) return false;
  static constexpr unsigned char kPng[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (std::equal(std::begin(kPng), std::end(kPng), magic)) return true;
  return magic[0] == 0xFF && magic[1] == 0xD8 && magic[2] == 0xFF;
}

std::string file_uri(const fs::path& path) { return "file://" + fs::absolute(path).lexically_normal().string(); }

SeedImageSet SeedImageSet::load(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(Errc::UnreadableImage, "seed image directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = text::to_lower_ascii(entry.path().extension().string());
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::map<std::string, std::string> captions;
  if (auto sidecar = dir / "captions.jsonl"; fs::is_regular_file(sidecar, ec)) {
    std::ifstream in(sidecar);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      auto j = json::parse(line, nullptr, false);
      if (!j.is_object() || !j.contains("uri") || !j["uri"].is_string() || !j.contains("caption") ||
          !j["caption"].is_string()) {
        spdlog::warn("captions.jsonl line {} ignored: expected {{\"uri\", \"caption\"}}", line_no);
        continue;
      }
      captions[j["uri"].get<std::string>()] = j["caption"].get<std::string>();
    }
  }

  SeedImageSet set;
  for (const auto& f : files) {
    if (!is_readable_image(f)) {
      spdlog::warn("skipping unreadable seed image {}", f.string());
      continue;
    }
    SeedImage img{file_uri(f), f, std::nullopt};
    for (const auto& key : {img.uri, f.filename().string()}) {
      if (auto it = captions.find(key); it != captions.end()) img.caption = it->second;
    }
    set.images_.push_back(std::move(img));
  }
  if (set.images_.empty()) throw Error(Errc::UnreadableImage, "no readable png/jpg seed image in " + dir.string());
  return set;
}

std::vector<std::string> SeedImageSet::uris() const {
  std::vector<std::string> out;
  for (const auto& i : images_) out.push_back(i.uri);
  return out;
}

ImageCatalog SeedImageSet::catalog() const {
  ImageCatalog c;
  for (const auto& i : images_) c.insert(i.uri);
  return c;
}

const SeedImage& SeedImageSet::for_batch(std::size_t batch) const { return images_.at(batch % images_.size()); }

std::vector<std::string> placeholders(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = text.find("{{", pos)) != std::string_view::npos) {
    auto end = text.find("}}", pos + 2);
    if (end == std::string_view::npos) break;
    out.emplace_back(text.substr(pos, end + 2 - pos));
    pos = end + 2;
  }
  return out;
}

namespace {

bool same_placeholders(std::string_view before, std::string_view after) {
  auto a = placeholders(before);
  auto b = placeholders(after);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

}  // namespace

TranslationOutcome translate(llm::Gateway& gateway, const std::vector<UnifiedSample>& samples,
                             const std::string& target_language, const EndpointConfig& generator,
                             std::size_t n_workers, parallel::CancelToken cancel) {
  TranslationOutcome out;
  out.samples = samples;
  if (samples.empty()) return out;

  parallel::ExecutorOptions opts;
  opts.n_workers = std::max<std::size_t>(1, n_workers);
  opts.retry_limit = 0;
  opts.cancel = cancel;
  parallel::ParallelExecutor pool(opts);
  auto exec = pool.execute(samples, [&](const UnifiedSample& s) -> json {
    if (s.metadata.is_object() && s.metadata.value("language", std::string()) == target_language) {
      return json{{"status", "skipped"}};
    }
    std::string last_problem;
    for (int attempt = 0; attempt < 2; ++attempt) {
      json payload;
      try {
        payload = gateway.complete_json(generator, prompts::translation_request(target_language, s.input, s.output));
      } catch (const Error& e) {
        if (e.code() == Errc::Cancelled) throw;
        last_problem = e.what();
        continue;
      }
      if (!payload.is_object() || !payload.contains("input") || !payload.contains("output") ||
          !payload["input"].is_string() || !payload["output"].is_string()) {
        last_problem = "translation is not an {input, output} object";
        continue;
      }
      auto in = payload["input"].get<std::string>();
      auto outp = payload["output"].get<std::string>();
      if (text::trim(in).empty() || text::trim(outp).empty()) {
        last_problem = "translation left a field empty";
        continue;
      }
      if (!same_placeholders(s.input, in) || !same_placeholders(s.output, outp)) {
        last_problem = "translation altered a {{placeholder}}";
        continue;
      }
      return json{{"status", "ok"}, {"input", in}, {"output", outp}};
    }
    return json{{"status", "failed"}, {"reason", last_problem}};
  });

  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& s = out.samples[i];
    const auto& r = exec.results[i];
    const std::string status = r ? r->at("status").get<std::string>() : "failed";
    if (status == "skipped") {
      ++out.skipped;
    } else if (status == "ok") {
      s.input = r->at("input").get<std::string>();
      s.output = r->at("output").get<std::string>();
      if (!s.metadata.is_object()) s.metadata = json::object();
      s.metadata["language"] = target_language;
      ++out.translated;
    } else {
      if (!s.metadata.is_object()) s.metadata = json::object();
      s.metadata["translation_failed"] = true;
      ++out.failed;
      spdlog::warn("sample {} kept untranslated: {}", i, r ? r->value("reason", "") : exec.errors[i]);
    }
  }
  return out;
}

}  // namespace sdg::adapters
