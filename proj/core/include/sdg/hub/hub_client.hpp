#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

namespace sdg::hub {

using json = nlohmann::json;

struct DatasetCandidate {
  std::string dataset_id;
  std::string description;
  std::vector<std::string> columns;
  // Every row has exactly `columns` as keys; nested values are JSON text.
  std::vector<std::map<std::string, std::string>> preview;
  std::int64_t downloads = 0;

  bool operator==(const DatasetCandidate&) const = default;
};

json to_json(const DatasetCandidate& c);
DatasetCandidate candidate_from_json(const json& j);

struct HubResponse {
  int status = 0;
  std::string body;
};

// Raw hub access. Implementations return the HTTP status and body; network
// failures throw TransportFailure.
class HubTransport {
 public:
  virtual ~HubTransport() = default;
  virtual HubResponse search(const std::string& keyword, std::size_t limit, const std::optional<std::string>& token) = 0;
  virtual HubResponse rows(const std::string& dataset_id, const std::string& split, std::size_t length,
                           const std::optional<std::string>& token) = 0;
};

// huggingface.co dataset search + datasets-server rows API.
class HttpHubTransport : public HubTransport {
 public:
  explicit HttpHubTransport(std::string api_base = "https://huggingface.co",
                            std::string rows_base = "https://datasets-server.huggingface.co");
  HubResponse search(const std::string& keyword, std::size_t limit, const std::optional<std::string>& token) override;
  HubResponse rows(const std::string& dataset_id, const std::string& split, std::size_t length,
                   const std::optional<std::string>& token) override;

 private:
  std::string api_base_;
  std::string rows_base_;
};

// Replays recorded responses from a directory:
//   search/<slug(keyword)>.json   rows/<slug(dataset_id)>.json   (split "train")
//   rows/<slug(dataset_id)>@<split>.json                        (other splits)
// A file is either the response body or {"fixture_status": N, "body": ...}.
// Missing files answer 404. Search fixtures are truncated to `limit`.
class FixtureHubTransport : public HubTransport {
 public:
  explicit FixtureHubTransport(std::filesystem::path root) : root_(std::move(root)) {}
  HubResponse search(const std::string& keyword, std::size_t limit, const std::optional<std::string>& token) override;
  HubResponse rows(const std::string& dataset_id, const std::string& split, std::size_t length,
                   const std::optional<std::string>& token) override;

  static std::string slug(const std::string& s);

 private:
  HubResponse load(const std::filesystem::path& file) const;
  std::filesystem::path root_;
};

// Fixture transport when SDG_HUB_FIXTURES is set, HTTP otherwise.
std::shared_ptr<HubTransport> transport_from_environment();

class HubClient {
 public:
  static constexpr std::ptrdiff_t kMaxInFlight = 4;

  explicit HubClient(std::shared_ptr<HubTransport> transport) : transport_(std::move(transport)) {}

  // One search per keyword; merged by id, sorted by downloads descending (id
  // ascending on ties), truncated to `limit`.
  // Throws Precondition, AuthError, TransportError, NoCandidates.
  std::vector<DatasetCandidate> search_datasets(const std::vector<std::string>& keywords, std::size_t limit,
                                                const std::optional<std::string>& token = std::nullopt);

  // First `rows` rows of `split`. Throws Precondition, DatasetGated,
  // SplitNotFound, TransportError.
  DatasetCandidate fetch_preview(const DatasetCandidate& candidate, std::size_t rows,
                                 const std::optional<std::string>& token = std::nullopt,
                                 const std::string& split = "train");

  HubTransport& transport() noexcept { return *transport_; }

 private:
  std::shared_ptr<HubTransport> transport_;
  std::counting_semaphore<kMaxInFlight> in_flight_{kMaxInFlight};
};

// Flattening rule for preview cells: strings verbatim, null as "", everything
// else as compact JSON.
std::string flatten_cell(const json& value);

}  // namespace sdg::hub
