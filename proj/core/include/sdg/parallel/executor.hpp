#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "sdg/parallel/cancel.hpp"

namespace sdg::parallel {

using json = nlohmann::json;

struct ExecutionReport {
  std::size_t total = 0;
  std::size_t succeeded = 0;
  std::size_t failed = 0;  // includes items never started because of cancellation
  std::size_t skipped_from_cache = 0;
  double wall_time_s = 0.0;
  bool cancelled = false;

  bool operator==(const ExecutionReport&) const = default;
};

json to_json(const ExecutionReport& r);

struct CheckpointOptions {
  std::filesystem::path dir;
  std::string job_id;
  std::string step;
  // Overrides <dir>/<run_id>.ledger.jsonl.
  std::optional<std::filesystem::path> file;
};

struct ExecutorOptions {
  std::size_t n_workers = 10;
  std::size_t retry_limit = 2;  // attempts per item = retry_limit + 1
  std::optional<CheckpointOptions> checkpoint;
  CancelToken cancel;
  // Called from worker threads after each item settles; must be thread-safe.
  std::function<void(std::size_t index, bool ok)> on_item_done;
  std::size_t flush_interval = 0;  // 0: default_flush_interval()
};

template <class Out>
struct Execution {
  std::vector<std::optional<Out>> results;  // one slot per input, input order
  std::vector<std::string> errors;          // last error text per failed slot
  ExecutionReport report;
};

// Runs `work(i)` for i in [0, count) on a bounded worker pool. Results are
// JSON so they can round-trip through the checkpoint ledger.
// Throws CheckpointCorrupt / RunIdMismatch before any item runs.
Execution<json> execute_json(std::size_t count, const std::function<json(std::size_t)>& work,
                             const ExecutorOptions& options);

class ParallelExecutor {
 public:
  explicit ParallelExecutor(ExecutorOptions options) : options_(std::move(options)) {}
  explicit ParallelExecutor(std::size_t n_workers) { options_.n_workers = n_workers; }

  ExecutorOptions& options() noexcept { return options_; }

  // `fn(item)` or `fn(item, index)`; the result type must convert to and from
  // nlohmann::json.
  template <class In, class Fn>
  auto execute(const std::vector<In>& items, Fn fn) const {
    using Out = std::decay_t<decltype(invoke_fn(fn, items.front(), std::size_t{0}))>;
    auto raw = execute_json(
        items.size(), [&](std::size_t i) { return json(invoke_fn(fn, items[i], i)); }, options_);
    Execution<Out> out;
    out.report = raw.report;
    out.errors = std::move(raw.errors);
    out.results.reserve(raw.results.size());
    for (auto& r : raw.results) {
      if (r) {
        out.results.emplace_back(r->template get<Out>());
      } else {
        out.results.emplace_back(std::nullopt);
      }
    }
    return out;
  }

 private:
  template <class Fn, class In>
  static decltype(auto) invoke_fn(Fn& fn, const In& item, std::size_t index) {
    if constexpr (std::is_invocable_v<Fn&, const In&, std::size_t>) {
      return fn(item, index);
    } else {
      (void)index;
      return fn(item);
    }
  }

  ExecutorOptions options_;
};

}  // namespace sdg::parallel
