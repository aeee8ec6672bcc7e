#include "sdg/parallel/executor.hpp"

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <thread>

#include "sdg/error.hpp"
#include "sdg/parallel/ledger.hpp"

namespace sdg::parallel {

json to_json(const ExecutionReport& r) {
  return json{{"total", r.total},
              {"succeeded", r.succeeded},
              {"failed", r.failed},
              {"skipped_from_cache", r.skipped_from_cache},
              {"wall_time_s", r.wall_time_s},
              {"cancelled", r.cancelled}};
}

Execution<json> execute_json(std::size_t count, const std::function<json(std::size_t)>& work,
                             const ExecutorOptions& options) {
  if (options.n_workers == 0) throw Error(Errc::Precondition, "n_workers must be >= 1");
  const auto started = std::chrono::steady_clock::now();

  Execution<json> out;
  out.results.assign(count, std::nullopt);
  out.errors.assign(count, std::string());
  out.report.total = count;

  std::unique_ptr<CheckpointLedger> ledger;
  if (options.checkpoint) {
    const auto& cp = *options.checkpoint;
    LedgerHeader header{make_run_id(cp.job_id, cp.step, count), count, cp.job_id, cp.step};
    auto path = cp.file ? *cp.file : ledger_path(cp.dir, header.run_id);
    ledger = std::make_unique<CheckpointLedger>(
        path, header, options.flush_interval ? options.flush_interval : default_flush_interval());
    for (const auto& [idx, entry] : ledger->resumed()) {
      out.results[idx] = entry.result;
      ++out.report.skipped_from_cache;
    }
  }

  std::vector<std::size_t> pending;
  pending.reserve(count - out.report.skipped_from_cache);
  for (std::size_t i = 0; i < count; ++i) {
    if (!out.results[i]) pending.push_back(i);
  }

  std::atomic<std::size_t> next{0};
  std::mutex errors_mu;
  auto run_one = [&](std::size_t idx) {
    std::size_t attempts = 0;
    std::string last_error;
    while (attempts <= options.retry_limit) {
      ++attempts;
      try {
        json result = work(idx);
        if (ledger) ledger->append({idx, EntryStatus::Done, attempts, result, {}});
        out.results[idx] = std::move(result);
        if (options.on_item_done) options.on_item_done(idx, true);
        return;
      } catch (const Error& e) {
        if (e.code() == Errc::Cancelled) return;  // unsettled; a resumed run retries it
        last_error = e.what();
      } catch (const std::exception& e) {
        last_error = e.what();
      } catch (...) {
        last_error = "unknown exception";
      }
      if (options.cancel.requested()) break;
    }
    if (ledger) ledger->append({idx, EntryStatus::Failed, attempts, nullptr, last_error});
    {
      std::lock_guard lock(errors_mu);
      out.errors[idx] = last_error;
    }
    if (options.on_item_done) options.on_item_done(idx, false);
  };

  auto worker = [&] {
    while (!options.cancel.requested()) {
      const std::size_t slot = next.fetch_add(1, std::memory_order_relaxed);
      if (slot >= pending.size()) return;
      run_one(pending[slot]);
    }
  };

  const std::size_t n_threads = std::min(options.n_workers, pending.size());
  if (n_threads == 1) {
    worker();
  } else if (n_threads > 1) {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (ledger) ledger->sync();

  for (std::size_t i = 0; i < count; ++i) {
    if (out.results[i]) {
      ++out.report.succeeded;
    } else {
      ++out.report.failed;
    }
  }
  out.report.cancelled = options.cancel.requested();
  out.report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

}  // namespace sdg::parallel
