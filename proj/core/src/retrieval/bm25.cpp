#include "sdg/retrieval/bm25.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "sdg/core/text.hpp"
#include "sdg/error.hpp"

namespace sdg::retrieval {

using nlohmann::json;

namespace {

bool ingestible(const fs::path& p) {
  auto ext = text::to_lower_ascii(p.extension().string());
  return ext == ".txt" || ext == ".md";
}

std::vector<fs::path> corpus_files(const fs::path& corpus_dir, bool warn) {
  std::error_code ec;
  if (!fs::is_directory(corpus_dir, ec)) throw Error(Errc::IoError, "corpus directory not found: " + corpus_dir.string());
  std::vector<fs::path> files;
  for (fs::recursive_directory_iterator it(corpus_dir, ec), end; it != end; it.increment(ec)) {
    if (ec) throw Error(Errc::IoError, "cannot list " + corpus_dir.string() + ": " + ec.message());
    if (!it->is_regular_file()) continue;
    if (!ingestible(it->path())) {
      if (warn) spdlog::warn("skipping non-text corpus file {}", it->path().string());
      continue;
    }
    files.push_back(it->path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::vector<Passage> chunk_document(const std::string& doc, const fs::path& doc_path, std::string_view content,
                                    const ChunkingOptions& options) {
  if (options.chunk_size == 0 || options.overlap >= options.chunk_size) {
    throw Error(Errc::Precondition, "chunking requires 0 <= overlap < chunk_size");
  }
  const auto tokens = text::split_whitespace(content);
  const std::size_t n = tokens.size();
  const std::size_t stride = options.chunk_size - options.overlap;

  std::vector<std::pair<std::size_t, std::size_t>> windows;
  for (std::size_t start = 0; start < n; start += stride) {
    const std::size_t end = std::min(start + options.chunk_size, n);
    windows.emplace_back(start, end);
    if (end == n) break;
  }
  if (windows.size() > 1 && windows.back().second - windows.back().first < options.min_tail) {
    windows.pop_back();
    windows.back().second = n;
  }

  std::vector<Passage> passages;
  passages.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto [start, end] = windows[i];
    std::vector<std::string> slice(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                                   tokens.begin() + static_cast<std::ptrdiff_t>(end));
    passages.push_back({PassageId{doc, static_cast<std::uint32_t>(i)}, text::join(slice, " "), doc_path});
  }
  return passages;
}

std::vector<Passage> ingest_corpus(const fs::path& corpus_dir, const ChunkingOptions& options) {
  std::vector<Passage> passages;
  for (const auto& file : corpus_files(corpus_dir, true)) {
    auto rel = fs::relative(file, corpus_dir).generic_string();
    auto chunks = chunk_document(rel, file, text::read_file(file), options);
    passages.insert(passages.end(), std::make_move_iterator(chunks.begin()), std::make_move_iterator(chunks.end()));
  }
  if (passages.empty()) throw Error(Errc::EmptyCorpus, "no text passages found under " + corpus_dir.string());
  return passages;
}

std::string corpus_content_hash(const fs::path& corpus_dir) {
  std::string material;
  for (const auto& file : corpus_files(corpus_dir, false)) {
    auto content = text::read_file(file);
    material += fs::relative(file, corpus_dir).generic_string();
    material += '\0';
    material += std::to_string(content.size());
    material += '\0';
    material += content;
  }
  return text::sha256_hex(material);
}

Bm25Index Bm25Index::build(std::vector<Passage> passages, double k1, double b) {
  if (passages.empty()) throw Error(Errc::Precondition, "cannot build an index over zero passages");
  Bm25Index index;
  index.k1_ = k1;
  index.b_ = b;
  index.passages_ = std::move(passages);
  index.doc_lengths_.reserve(index.passages_.size());
  for (std::size_t i = 0; i < index.passages_.size(); ++i) {
    auto tokens = tokenize(index.passages_[i].text);
    index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
    std::unordered_map<std::string, std::uint32_t> tf;
    for (auto& t : tokens) ++tf[t];
    for (auto& [term, count] : tf) index.postings_[term].push_back({static_cast<std::uint32_t>(i), count});
  }
  index.finalize();
  return index;
}

void Bm25Index::finalize() {
  for (auto& [_, list] : postings_) {
    std::sort(list.begin(), list.end(), [](const Posting& a, const Posting& b) { return a.passage < b.passage; });
  }
  const double total = std::accumulate(doc_lengths_.begin(), doc_lengths_.end(), 0.0);
  avg_doc_len_ = doc_lengths_.empty() ? 0.0 : total / static_cast<double>(doc_lengths_.size());
}

const std::vector<Posting>* Bm25Index::postings(std::string_view term) const {
  auto it = postings_.find(std::string(term));
  return it == postings_.end() ? nullptr : &it->second;
}

double Bm25Index::idf(std::string_view term) const {
  const auto* list = postings(term);
  const double df = list ? static_cast<double>(list->size()) : 0.0;
  const double n = static_cast<double>(passages_.size());
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

std::vector<ScoredPassage> Bm25Index::search(std::string_view query, std::size_t top_k) const {
  if (top_k == 0) throw Error(Errc::Precondition, "top_k must be >= 1");
  const auto terms = tokenize(query);
  if (terms.empty()) throw Error(Errc::EmptyQueryAfterTokenization, "query has no searchable terms");

  std::vector<double> scores(passages_.size(), 0.0);
  std::vector<bool> touched(passages_.size(), false);
  for (const auto& term : terms) {
    const auto* list = postings(term);
    if (!list) continue;
    const double term_idf = idf(term);
    for (const auto& p : *list) {
      const double tf = p.term_frequency;
      const double dl = doc_lengths_[p.passage];
      const double norm = k1_ * (1.0 - b_ + b_ * dl / avg_doc_len_);
      scores[p.passage] += term_idf * tf * (k1_ + 1.0) / (tf + norm);
      touched[p.passage] = true;
    }
  }

  std::vector<ScoredPassage> hits;
  for (std::size_t i = 0; i < passages_.size(); ++i) {
    if (touched[i] && scores[i] > 0.0) hits.push_back({&passages_[i], scores[i]});
  }
  std::sort(hits.begin(), hits.end(), [](const ScoredPassage& a, const ScoredPassage& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.passage->id < b.passage->id;
  });
  if (hits.size() > top_k) hits.resize(top_k);
  return hits;
}

void Bm25Index::save(const fs::path& path, const std::string& corpus_hash) const {
  json passages = json::array();
  for (const auto& p : passages_) {
    passages.push_back({{"doc", p.id.doc}, {"ordinal", p.id.ordinal}, {"text", p.text}, {"path", p.doc_path.string()}});
  }
  json postings = json::object();
  for (const auto& [term, list] : postings_) {
    json arr = json::array();
    for (const auto& p : list) arr.push_back({p.passage, p.term_frequency});
    postings[term] = std::move(arr);
  }
  json doc{{"version", kCacheVersion}, {"corpus_hash", corpus_hash}, {"k1", k1_},         {"b", b_},
           {"passages", passages},     {"doc_lengths", doc_lengths_}, {"postings", postings}};
  text::write_file_atomic(path, doc.dump());
}

std::optional<Bm25Index> Bm25Index::load(const fs::path& path, const std::string& corpus_hash, double k1, double b) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) return std::nullopt;
  auto doc = json::parse(text::read_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  try {
    if (doc.at("version").get<int>() != kCacheVersion) return std::nullopt;
    if (doc.at("corpus_hash").get<std::string>() != corpus_hash) return std::nullopt;
    if (doc.at("k1").get<double>() != k1 || doc.at("b").get<double>() != b) return std::nullopt;
    Bm25Index index;
    index.k1_ = k1;
    index.b_ = b;
    for (const auto& p : doc.at("passages")) {
      index.passages_.push_back({PassageId{p.at("doc").get<std::string>(), p.at("ordinal").get<std::uint32_t>()},
                                 p.at("text").get<std::string>(), fs::path(p.at("path").get<std::string>())});
    }
    index.doc_lengths_ = doc.at("doc_lengths").get<std::vector<std::uint32_t>>();
    if (index.doc_lengths_.size() != index.passages_.size() || index.passages_.empty()) return std::nullopt;
    for (const auto& [term, arr] : doc.at("postings").items()) {
      auto& list = index.postings_[term];
      for (const auto& pair : arr) {
        Posting p{pair.at(0).get<std::uint32_t>(), pair.at(1).get<std::uint32_t>()};
        if (p.passage >= index.passages_.size()) return std::nullopt;
        list.push_back(p);
      }
    }
    index.finalize();
    return index;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

}  // namespace sdg::retrieval
