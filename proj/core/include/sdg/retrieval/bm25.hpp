#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sdg::retrieval {

namespace fs = std::filesystem;

// Stable passage identity: source document (path relative to the corpus
// root) plus chunk ordinal. Ordered by document, then ordinal.
struct PassageId {
  std::string doc;
  std::uint32_t ordinal = 0;

  std::string str() const { return doc + "#" + std::to_string(ordinal); }
  auto operator<=>(const PassageId&) const = default;
};

struct Passage {
  PassageId id;
  std::string text;
  fs::path doc_path;

  bool operator==(const Passage&) const = default;
};

struct ChunkingOptions {
  std::size_t chunk_size = 300;
  std::size_t overlap = 50;
  // A trailing window shorter than this is merged into its predecessor.
  std::size_t min_tail = 20;
};

// Sliding whitespace-token windows; starts at multiples of chunk_size - overlap.
std::vector<Passage> chunk_document(const std::string& doc, const fs::path& doc_path, std::string_view content,
                                    const ChunkingOptions& options);

// Reads every .txt / .md file below `corpus_dir` (sorted, recursive); other
// files are skipped with a warning. Throws EmptyCorpus or IoError.
std::vector<Passage> ingest_corpus(const fs::path& corpus_dir, const ChunkingOptions& options = {});

// SHA-256 over (relative path, content) of every ingestible file.
std::string corpus_content_hash(const fs::path& corpus_dir);

// Lowercase, split on non-alphanumeric bytes, drop empty tokens. Bytes >= 0x80
// count as alphanumeric so non-Latin words stay intact.
std::vector<std::string> tokenize(std::string_view text);

struct Posting {
  std::uint32_t passage = 0;  // index into passages()
  std::uint32_t term_frequency = 0;

  bool operator==(const Posting&) const = default;
};

struct ScoredPassage {
  const Passage* passage = nullptr;
  double score = 0.0;
};

class Bm25Index {
 public:
  static constexpr int kCacheVersion = 1;

  // Throws Precondition on an empty passage list.
  static Bm25Index build(std::vector<Passage> passages, double k1 = 1.2, double b = 0.75);

  // score = sum over query terms of IDF(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))
  // with IDF(t) = ln((N - df + 0.5) / (df + 0.5) + 1). Descending score, ties
  // by ascending passage id; only passages with a positive score.
  // Throws EmptyQueryAfterTokenization, Precondition (top_k == 0).
  std::vector<ScoredPassage> search(std::string_view query, std::size_t top_k) const;

  double idf(std::string_view term) const;

  std::size_t size() const noexcept { return passages_.size(); }
  double avg_doc_len() const noexcept { return avg_doc_len_; }
  double k1() const noexcept { return k1_; }
  double b() const noexcept { return b_; }
  const std::vector<Passage>& passages() const noexcept { return passages_; }
  const std::vector<std::uint32_t>& doc_lengths() const noexcept { return doc_lengths_; }
  const std::vector<Posting>* postings(std::string_view term) const;
  std::size_t vocabulary_size() const noexcept { return postings_.size(); }

  // Versioned on-disk cache; load returns nullopt when the file is missing,
  // stale (different corpus hash or parameters) or from another version.
  void save(const fs::path& path, const std::string& corpus_hash) const;
  static std::optional<Bm25Index> load(const fs::path& path, const std::string& corpus_hash, double k1, double b);

 private:
  Bm25Index() = default;
  void finalize();

  std::vector<Passage> passages_;
  std::vector<std::uint32_t> doc_lengths_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  double avg_doc_len_ = 0.0;
  double k1_ = 1.2;
  double b_ = 0.75;
};

// Retrieval strategy seam; BM25 is the only implementation.
class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual std::vector<ScoredPassage> search(std::string_view query, std::size_t top_k) const = 0;
};

class Bm25Retriever : public Retriever {
 public:
  explicit Bm25Retriever(Bm25Index index) : index_(std::move(index)) {}
  std::vector<ScoredPassage> search(std::string_view query, std::size_t top_k) const override {
    return index_.search(query, top_k);
  }
  const Bm25Index& index() const noexcept { return index_; }

 private:
  Bm25Index index_;
};

}  // namespace sdg::retrieval
