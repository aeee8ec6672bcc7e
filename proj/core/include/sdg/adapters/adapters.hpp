#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sdg/core/config.hpp"
#include "sdg/core/sample.hpp"
#include "sdg/llm/gateway.hpp"
#include "sdg/parallel/cancel.hpp"

namespace sdg::adapters {

struct SeedImage {
  std::string uri;  // file://<absolute path>
  std::filesystem::path path;
  std::optional<std::string> caption;

  bool operator==(const SeedImage&) const = default;
};

// PNG or JPEG by magic bytes.
bool is_readable_image(const std::filesystem::path& path);

std::string file_uri(const std::filesystem::path& path);

class SeedImageSet {
 public:
  // *.png / *.jpg / *.jpeg under `dir` (not recursive), sorted by name.
  // Unreadable files are skipped with a warning; throws UnreadableImage when
  // none is usable. Captions come from an optional captions.jsonl whose
  // records are {"uri": <file name or uri>, "caption": text}.
  static SeedImageSet load(const std::filesystem::path& dir);

  const std::vector<SeedImage>& images() const noexcept { return images_; }
  std::vector<std::string> uris() const;
  ImageCatalog catalog() const;

  // Round-robin: batch b gets image b mod |images|.
  const SeedImage& for_batch(std::size_t batch) const;

 private:
  std::vector<SeedImage> images_;
};

// Every {{...}} token in order of appearance.
std::vector<std::string> placeholders(std::string_view text);

struct TranslationOutcome {
  std::vector<UnifiedSample> samples;  // same length and order as the input
  std::size_t translated = 0;
  std::size_t failed = 0;   // kept original, flagged translation_failed
  std::size_t skipped = 0;  // already in the target language
};

// Translates input and output of every sample. On success metadata.language
// becomes `target_language`; every other field is kept verbatim. A reply that
// loses or alters a {{placeholder}} is retried once; after that the original
// sample is kept with metadata.translation_failed = true.
TranslationOutcome translate(llm::Gateway& gateway, const std::vector<UnifiedSample>& samples,
                             const std::string& target_language, const EndpointConfig& generator,
                             std::size_t n_workers = 10, parallel::CancelToken cancel = {});

}  // namespace sdg::adapters
