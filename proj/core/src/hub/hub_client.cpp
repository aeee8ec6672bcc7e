#include "sdg/hub/hub_client.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <set>

#include "sdg/core/text.hpp"
#include "sdg/error.hpp"

namespace sdg::hub {

namespace fs = std::filesystem;

namespace {

class SemaphoreGuard {
 public:
  explicit SemaphoreGuard(std::counting_semaphore<HubClient::kMaxInFlight>& s) : s_(s) { s_.acquire(); }
  ~SemaphoreGuard() { s_.release(); }
  SemaphoreGuard(const SemaphoreGuard&) = delete;
  SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

 private:
  std::counting_semaphore<HubClient::kMaxInFlight>& s_;
};

json parse_body(const HubResponse& r, const std::string& what) {
  auto j = json::parse(r.body, nullptr, false);
  if (j.is_discarded()) throw TransportFailure(what + ": response is not JSON", false, r.status);
  return j;
}

}  // namespace

std::string flatten_cell(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_null()) return "";
  return value.dump(-1, ' ', false, json::error_handler_t::replace);
}

json to_json(const DatasetCandidate& c) {
  json preview = json::array();
  for (const auto& row : c.preview) preview.push_back(json(row));
  return json{{"dataset_id", c.dataset_id}, {"description", c.description}, {"columns", c.columns},
              {"preview", preview},         {"downloads", c.downloads}};
}

DatasetCandidate candidate_from_json(const json& j) {
  DatasetCandidate c;
  c.dataset_id = j.at("dataset_id").get<std::string>();
  c.description = j.value("description", std::string());
  c.columns = j.value("columns", std::vector<std::string>{});
  if (auto it = j.find("preview"); it != j.end()) {
    for (const auto& row : *it) c.preview.push_back(row.get<std::map<std::string, std::string>>());
  }
  c.downloads = j.value("downloads", std::int64_t{0});
  return c;
}

std::string FixtureHubTransport::slug(const std::string& s) {
  std::string out;
  for (unsigned char ch : s) {
    if (std::isalnum(ch) || ch == '-' || ch == '.') {
      out.push_back(static_cast<char>(std::tolower(ch)));
    } else if (ch == '/') {
      out += "__";
    } else {
      out.push_back('_');
    }
  }
  return out;
}

HubResponse FixtureHubTransport::load(const fs::path& file) const {
  std::error_code ec;
  if (!fs::is_regular_file(file, ec)) return {404, R"({"error":"not found"})"};
  auto content = text::read_file(file);
  auto j = json::parse(content, nullptr, false);
  if (j.is_object() && j.contains("fixture_status")) {
    const auto& body = j.contains("body") ? j["body"] : json::object();
    return {j["fixture_status"].get<int>(), body.is_string() ? body.get<std::string>() : body.dump()};
  }
  return {200, content};
}

HubResponse FixtureHubTransport::search(const std::string& keyword, std::size_t limit,
                                        const std::optional<std::string>& /*token*/) {
  auto r = load(root_ / "search" / (slug(keyword) + ".json"));
  if (r.status == 404) return {200, "[]"};
  if (r.status != 200) return r;
  auto j = json::parse(r.body, nullptr, false);
  if (j.is_array() && j.size() > limit) {
    j.erase(j.begin() + static_cast<std::ptrdiff_t>(limit), j.end());
    r.body = j.dump();
  }
  return r;
}

HubResponse FixtureHubTransport::rows(const std::string& dataset_id, const std::string& split, std::size_t length,
                                      const std::optional<std::string>& token) {
  auto file = split == "train" ? root_ / "rows" / (slug(dataset_id) + ".json")
                               : root_ / "rows" / (slug(dataset_id) + "@" + split + ".json");
  auto r = load(file);
  // A gated fixture opens up when any token is presented.
  if ((r.status == 401 || r.status == 403) && token && !token->empty()) {
    auto open = load(root_ / "rows" / (slug(dataset_id) + ".authorized.json"));
    if (open.status == 200) r = open;
  }
  if (r.status != 200) return r;
  auto j = json::parse(r.body, nullptr, false);
  if (j.is_object() && j.contains("rows") && j["rows"].is_array() && j["rows"].size() > length) {
    auto& rows = j["rows"];
    rows.erase(rows.begin() + static_cast<std::ptrdiff_t>(length), rows.end());
    r.body = j.dump();
  }
  return r;
}

std::shared_ptr<HubTransport> transport_from_environment() {
  if (const char* dir = std::getenv("SDG_HUB_FIXTURES"); dir && *dir) {
    return std::make_shared<FixtureHubTransport>(dir);
  }
  return std::make_shared<HttpHubTransport>();
}

std::vector<DatasetCandidate> HubClient::search_datasets(const std::vector<std::string>& keywords, std::size_t limit,
                                                         const std::optional<std::string>& token) {
  if (keywords.empty()) throw Error(Errc::Precondition, "search_datasets needs at least one keyword");
  if (limit == 0) throw Error(Errc::Precondition, "search limit must be >= 1");

  std::map<std::string, DatasetCandidate> merged;
  for (const auto& kw : keywords) {
    HubResponse r;
    {
      SemaphoreGuard guard(in_flight_);
      r = transport_->search(kw, limit, token);
    }
    if (r.status == 401 || r.status == 403) {
      throw Error(Errc::AuthError, "dataset hub rejected the search (HTTP " + std::to_string(r.status) + ")");
    }
    if (r.status == 429 || r.status >= 500) {
      throw TransportFailure("dataset search HTTP " + std::to_string(r.status), true, r.status);
    }
    if (r.status != 200) throw TransportFailure("dataset search HTTP " + std::to_string(r.status), false, r.status);
    auto body = parse_body(r, "dataset search");
    if (!body.is_array()) throw TransportFailure("dataset search: expected a JSON array", false, r.status);
    for (const auto& item : body) {
      if (!item.is_object() || !item.contains("id") || !item["id"].is_string()) continue;
      DatasetCandidate c;
      c.dataset_id = item["id"].get<std::string>();
      if (auto d = item.find("description"); d != item.end() && d->is_string()) c.description = d->get<std::string>();
      if (auto d = item.find("downloads"); d != item.end() && d->is_number()) c.downloads = d->get<std::int64_t>();
      auto [it, inserted] = merged.emplace(c.dataset_id, c);
      if (!inserted) {
        it->second.downloads = std::max(it->second.downloads, c.downloads);
        if (it->second.description.empty()) it->second.description = c.description;
      }
    }
  }
  if (merged.empty()) throw Error(Errc::NoCandidates, "no datasets matched the search keywords");

  std::vector<DatasetCandidate> out;
  out.reserve(merged.size());
  for (auto& [_, c] : merged) out.push_back(std::move(c));
  std::stable_sort(out.begin(), out.end(), [](const DatasetCandidate& a, const DatasetCandidate& b) {
    return a.downloads > b.downloads;  // map order already ascending by id
  });
  if (out.size() > limit) out.resize(limit);
  return out;
}

DatasetCandidate HubClient::fetch_preview(const DatasetCandidate& candidate, std::size_t rows,
                                          const std::optional<std::string>& token, const std::string& split) {
  if (rows == 0) throw Error(Errc::Precondition, "preview rows must be >= 1");
  HubResponse r;
  {
    SemaphoreGuard guard(in_flight_);
    r = transport_->rows(candidate.dataset_id, split, rows, token);
  }
  const std::string& id = candidate.dataset_id;
  if (r.status == 401 || r.status == 403) {
    throw Error(Errc::DatasetGated, "dataset " + id + " is gated" +
                                        (token && !token->empty() ? " and the token was refused" : "; no token set"));
  }
  if (r.status == 404) throw Error(Errc::SplitNotFound, "dataset " + id + " has no readable split '" + split + "'");
  if (r.status == 429 || r.status >= 500) {
    throw TransportFailure("rows HTTP " + std::to_string(r.status) + " for " + id, true, r.status);
  }
  if (r.status != 200) throw TransportFailure("rows HTTP " + std::to_string(r.status) + " for " + id, false, r.status);

  auto body = parse_body(r, "rows for " + id);
  DatasetCandidate out = candidate;
  out.columns.clear();
  out.preview.clear();
  try {
    for (const auto& f : body.at("features")) out.columns.push_back(f.at("name").get<std::string>());
    for (const auto& wrapped : body.at("rows")) {
      if (out.preview.size() >= rows) break;
      const auto& row = wrapped.contains("row") ? wrapped.at("row") : wrapped;
      std::map<std::string, std::string> cells;
      for (const auto& col : out.columns) {
        auto it = row.find(col);
        cells[col] = it == row.end() ? std::string() : flatten_cell(*it);
      }
      out.preview.push_back(std::move(cells));
    }
  } catch (const json::exception& e) {
    throw TransportFailure("rows for " + id + ": unexpected shape: " + e.what(), false, r.status);
  }
  return out;
}

}  // namespace sdg::hub
