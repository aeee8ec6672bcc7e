#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "sdg/error.hpp"
#include "sdg/hub/hub_client.hpp"

namespace sdg::hub {

namespace {

HubResponse get(const std::string& base, const std::string& path, const httplib::Params& params,
                const std::optional<std::string>& token) {
  httplib::Client client(base);
  client.set_connection_timeout(10);
  client.set_read_timeout(60);
  client.set_follow_location(true);
  httplib::Headers headers;
  if (token && !token->empty()) headers.emplace("Authorization", "Bearer " + *token);
  auto res = client.Get(path, params, headers);
  if (!res) throw TransportFailure("hub request " + base + path + " failed: " + httplib::to_string(res.error()), true);
  return {res->status, res->body};
}

}  // namespace

HttpHubTransport::HttpHubTransport(std::string api_base, std::string rows_base)
    : api_base_(std::move(api_base)), rows_base_(std::move(rows_base)) {}

HubResponse HttpHubTransport::search(const std::string& keyword, std::size_t limit,
                                     const std::optional<std::string>& token) {
  return get(api_base_, "/api/datasets",
             {{"search", keyword}, {"limit", std::to_string(limit)}, {"full", "true"}}, token);
}

HubResponse HttpHubTransport::rows(const std::string& dataset_id, const std::string& split, std::size_t length,
                                   const std::optional<std::string>& token) {
  return get(rows_base_, "/rows",
             {{"dataset", dataset_id},
              {"config", "default"},
              {"split", split},
              {"offset", "0"},
              {"length", std::to_string(length)}},
             token);
}

}  // namespace sdg::hub
