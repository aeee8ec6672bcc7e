#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "sdg/service/http_service.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <thread>

#include "sdg/core/config.hpp"
#include "sdg/core/text.hpp"
#include "sdg/error.hpp"

namespace sdg::service {

namespace {

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply_json(res, status, json{{"error", message}});
}

std::size_t query_size(const httplib::Request& req, const char* key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  try {
    const auto v = std::stoll(req.get_param_value(key));
    return v < 0 ? fallback : static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    return fallback;
  }
}

std::string sse_frame(const JobEvent& e) {
  return "id: " + std::to_string(e.seq) + "\nevent: " + e.kind +
         "\ndata: " + to_json(e).dump(-1, ' ', false, json::error_handler_t::replace) + "\n\n";
}

// Non-empty lines of a JSONL file.
std::vector<std::string_view> jsonl_lines(std::string_view content) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto nl = content.find('\n', pos);
    auto line = content.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? content.size() : nl + 1;
    if (!text::trim(line).empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

struct HttpService::Impl {
  JobManager& jobs;
  httplib::Server server;
  std::atomic<bool> stopping{false};
  std::thread thread;

  explicit Impl(JobManager& j) : jobs(j) { routes(); }

  void routes() {
    server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
      reply_json(res, 200, json{{"status", "ok"}});
    });

    server.Post("/api/jobs", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = json::parse(req.body, nullptr, false);
      if (!body.is_object()) return reply_error(res, 400, "request body must be a JSON object");
      const auto type = parse_job_type(body.value("type", ""));
      if (!type) return reply_error(res, 400, "type must be one of generate, train, eval");
      json config = body.value("config", json());
      try {
        if (config.is_string()) config = parse_config_text(config.get<std::string>());
      } catch (const Error& e) {
        return reply_error(res, 400, e.what());
      }
      if (!config.is_object()) return reply_error(res, 400, "config must be an object or YAML/JSON text");
      try {
        const auto id = jobs.submit(*type, config);
        reply_json(res, 201, json{{"job_id", id}});
      } catch (const ConfigError& e) {
        reply_json(res, 422, e.to_json());
      }
    });

    server.Get("/api/jobs", [this](const httplib::Request&, httplib::Response& res) {
      json list = json::array();
      for (const auto& info : jobs.list()) list.push_back(to_json(info));
      reply_json(res, 200, json{{"jobs", list}});
    });

    server.Get("/api/jobs/:id", [this](const httplib::Request& req, httplib::Response& res) {
      auto info = jobs.get(req.path_params.at("id"));
      if (!info) return reply_error(res, 404, "no such job");
      reply_json(res, 200, to_json(*info));
    });

    server.Post("/api/jobs/:id/cancel", [this](const httplib::Request& req, httplib::Response& res) {
      const auto& id = req.path_params.at("id");
      switch (jobs.cancel(id)) {
        case JobManager::CancelResult::Accepted:
          return reply_json(res, 202, json{{"job_id", id}, {"status", "cancelling"}});
        case JobManager::CancelResult::NotFound:
          return reply_error(res, 404, "no such job");
        case JobManager::CancelResult::AlreadyTerminal:
          return reply_error(res, 409, "job already finished");
      }
    });

    server.Get("/api/jobs/:id/events", [this](const httplib::Request& req, httplib::Response& res) {
      const auto id = req.path_params.at("id");
      if (!jobs.get(id)) return reply_error(res, 404, "no such job");
      auto cursor = std::make_shared<std::size_t>(query_size(req, "from", 0));
      if (req.has_header("Last-Event-ID")) {
        try {
          *cursor = static_cast<std::size_t>(std::stoll(req.get_header_value("Last-Event-ID"))) + 1;
        } catch (const std::exception&) {
        }
      }
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [this, id, cursor](std::size_t, httplib::DataSink& sink) {
        auto batch = jobs.events_since(id, *cursor, std::chrono::milliseconds(500));
        if (!batch || stopping) {
          sink.done();
          return true;
        }
        for (const auto& e : batch->events) {
          const auto frame = sse_frame(e);
          if (!sink.write(frame.data(), frame.size())) return false;
          ++*cursor;
        }
        if (batch->terminal) sink.done();
        return true;
      });
    });

    server.Get("/api/jobs/:id/samples", [this](const httplib::Request& req, httplib::Response& res) {
      const auto& id = req.path_params.at("id");
      if (!jobs.get(id)) return reply_error(res, 404, "no such job");
      auto path = jobs.samples_path(id);
      if (!path) return reply_error(res, 404, "job has no samples yet");
      const auto content = text::read_file(*path);
      const auto lines = jsonl_lines(content);
      const auto offset = query_size(req, "offset", 0);
      const auto limit = std::min(query_size(req, "limit", kDefaultPageSize), kMaxPageSize);
      // ordered_json keeps each record's key order, so items re-serialise to the stored bytes.
      nlohmann::ordered_json body{{"total", lines.size()}, {"offset", offset}, {"limit", limit}};
      auto& items = body["items"] = nlohmann::ordered_json::array();
      for (std::size_t i = offset; i < lines.size() && i < offset + limit; ++i) {
        items.push_back(nlohmann::ordered_json::parse(lines[i]));
      }
      res.status = 200;
      res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
    });

    server.Get("/api/jobs/:id/download", [this](const httplib::Request& req, httplib::Response& res) {
      const auto& id = req.path_params.at("id");
      if (!jobs.get(id)) return reply_error(res, 404, "no such job");
      auto path = jobs.samples_path(id);
      if (!path) return reply_error(res, 404, "job has no samples yet");
      res.set_header("Content-Disposition", "attachment; filename=\"" + id + ".jsonl\"");
      res.set_content(text::read_file(*path), "application/x-ndjson");
    });

    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string message = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        message = e.what();
      } catch (...) {
      }
      spdlog::error("http handler failed: {}", message);
      reply_error(res, 500, message);
    });
  }
};

HttpService::HttpService(JobManager& jobs) : impl_(std::make_unique<Impl>(jobs)) {}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpService::listen() { return impl_->server.listen_after_bind(); }

int HttpService::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  if (bound < 0) return -1;
  impl_->thread = std::thread([this] { listen(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpService::stop() {
  impl_->stopping = true;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace sdg::service
