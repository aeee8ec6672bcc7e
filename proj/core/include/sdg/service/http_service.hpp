#pragma once

#include <memory>
#include <string>

#include "sdg/service/job_manager.hpp"

namespace sdg::service {

inline constexpr std::size_t kMaxPageSize = 1000;
inline constexpr std::size_t kDefaultPageSize = 50;

// REST + SSE front end over a JobManager.
//
//   POST /api/jobs                 {type, config} -> 201 {job_id} | 400 | 422
//   GET  /api/jobs                 {jobs: [...]}
//   GET  /api/jobs/{id}            job state
//   GET  /api/jobs/{id}/events     text/event-stream, full replay then live
//   POST /api/jobs/{id}/cancel     202 | 404 | 409
//   GET  /api/jobs/{id}/samples    ?offset&limit -> {total, offset, limit, items}
//   GET  /api/jobs/{id}/download   data.jsonl as an attachment
//   GET  /api/health
class HttpService {
 public:
  explicit HttpService(JobManager& jobs);
  ~HttpService();

  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  // Binds without serving; port 0 picks a free port. Returns the bound port
  // or -1.
  int bind(const std::string& host, int port);
  // Serves until stop(). Call after bind().
  bool listen();
  // bind() + listen() on a background thread; returns the port or -1.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sdg::service
