#include <CLI11.hpp>
#include <signal.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "sdg/core/config.hpp"
#include "sdg/core/text.hpp"
#include "sdg/error.hpp"
#include "sdg/service/http_service.hpp"
#include "sdg/service/job_manager.hpp"
#include "sdg/service/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using sdg::json;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitInterrupted = 130;

sdg::parallel::CancelToken* g_cancel = nullptr;

extern "C" void on_interrupt(int) {
  static std::atomic<int> hits{0};
  if (hits.fetch_add(1) > 0) ::_exit(kExitInterrupted);
  if (g_cancel) g_cancel->request();
}

class LogProgress : public sdg::ProgressSink {
 public:
  void step_started(std::string_view step) override { spdlog::info("step {} started", step); }
  void step_done(std::string_view step, const json& payload) override {
    if (payload.is_null() || payload.empty()) {
      spdlog::info("step {} done", step);
    } else {
      spdlog::info("step {} done {}", step, payload.dump());
    }
  }
  void step_failed(std::string_view step, std::string_view error) override {
    spdlog::error("step {} failed: {}", step, error);
  }
  void item_done(std::string_view step, std::size_t index, bool ok) override {
    spdlog::debug("{} item {} {}", step, index, ok ? "ok" : "failed");
  }
  void log_line(std::string_view line) override { spdlog::info("| {}", line); }
};

void print_config_error(const sdg::ConfigError& e) {
  std::cerr << "invalid configuration:\n";
  for (const auto& issue : e.issues()) {
    std::cerr << "  " << (issue.field.empty() ? "<root>" : issue.field) << ": " << issue.message << " ["
              << sdg::to_string(issue.kind) << "]\n";
  }
}

// Loads and validates; every failure here is a user input problem.
template <class Validate>
auto load_or_exit(const fs::path& path, Validate&& validate, std::string& bytes) -> std::optional<decltype(validate(json()))> {
  try {
    bytes = sdg::text::read_file(path);
  } catch (const std::exception&) {
    std::cerr << "config file not found: " << path.string() << "\n";
    return std::nullopt;
  }
  try {
    return validate(sdg::parse_config_text(bytes));
  } catch (const sdg::ConfigError& e) {
    print_config_error(e);
  } catch (const std::exception& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
  }
  return std::nullopt;
}

template <class F>
int run_guarded(F&& body) {
  sdg::parallel::CancelToken cancel;
  g_cancel = &cancel;
  struct sigaction sa {};
  sa.sa_handler = on_interrupt;
  ::sigemptyset(&sa.sa_mask);
  ::sigaction(SIGINT, &sa, nullptr);
  ::sigaction(SIGTERM, &sa, nullptr);

  LogProgress progress;
  sdg::service::RunContext ctx;
  ctx.progress = &progress;
  ctx.cancel = cancel;
  try {
    json summary = body(ctx);
    std::cout << summary.dump(2) << std::endl;
    return kExitOk;
  } catch (const sdg::ConfigError& e) {
    print_config_error(e);
    return kExitInvalid;
  } catch (const sdg::Error& e) {
    if (e.code() == sdg::Errc::Cancelled) {
      std::cerr << "interrupted; completed work is checkpointed, rerun the same command to resume\n";
      return kExitInterrupted;
    }
    std::cerr << "error";
    if (!e.step().empty()) std::cerr << " in " << e.step();
    std::cerr << " [" << sdg::to_string(e.code()) << "]: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_generate(const fs::path& path) {
  std::string bytes;
  auto config = load_or_exit(path, sdg::validate_config, bytes);
  if (!config) return kExitInvalid;
  return run_guarded([&](sdg::service::RunContext& ctx) {
    ctx.job_id = sdg::service::cli_job_id(bytes);
    return to_json(sdg::service::run_generate(*config, ctx));
  });
}

int cmd_train(const fs::path& path) {
  std::string bytes;
  auto config = load_or_exit(path, sdg::validate_train_config, bytes);
  if (!config) return kExitInvalid;
  return run_guarded([&](sdg::service::RunContext& ctx) {
    ctx.job_id = sdg::service::cli_job_id(bytes);
    return to_json(sdg::service::run_train(*config, fs::absolute(path), ctx));
  });
}

int cmd_eval(const fs::path& path) {
  std::string bytes;
  auto config = load_or_exit(path, sdg::validate_eval_config, bytes);
  if (!config) return kExitInvalid;
  return run_guarded([&](sdg::service::RunContext& ctx) {
    ctx.job_id = sdg::service::cli_job_id(bytes);
    return to_json(sdg::service::run_eval(*config, ctx));
  });
}

int cmd_validate(const fs::path& path, const std::string& type) {
  std::string bytes;
  bool ok = false;
  if (type == "train") {
    ok = load_or_exit(path, sdg::validate_train_config, bytes).has_value();
  } else if (type == "eval") {
    ok = load_or_exit(path, sdg::validate_eval_config, bytes).has_value();
  } else {
    ok = load_or_exit(path, sdg::validate_config, bytes).has_value();
  }
  if (ok) std::cout << "ok\n";
  return ok ? kExitOk : kExitInvalid;
}

int cmd_serve(const std::string& host, int port, const fs::path& data_dir, std::size_t max_jobs) {
  sigset_t signals;
  ::sigemptyset(&signals);
  ::sigaddset(&signals, SIGINT);
  ::sigaddset(&signals, SIGTERM);
  ::pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  if (max_jobs == 0) {
    const char* env = std::getenv("SDG_MAX_JOBS");
    max_jobs = env ? std::strtoul(env, nullptr, 10) : 1;
    if (max_jobs == 0) max_jobs = 1;
  }
  try {
    sdg::service::JobManager jobs({data_dir, max_jobs, {}});
    sdg::service::HttpService http(jobs);
    const int bound = http.bind(host, port);
    if (bound < 0) {
      std::cerr << "cannot bind " << host << ":" << port << "\n";
      return kExitRuntime;
    }
    std::cout << "listening on http://" << host << ":" << bound << std::endl;
    spdlog::info("data dir {}, max concurrent jobs {}", data_dir.string(), max_jobs);

    std::thread waiter([&] {
      int sig = 0;
      ::sigwait(&signals, &sig);
      spdlog::info("signal {} received, shutting down", sig);
      http.stop();
    });
    http.listen();
    ::pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("sdg");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");

  CLI::App app{"Configuration-driven synthetic instruction data engine"};
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  fs::path config_path;
  auto* generate = app.add_subcommand("generate", "Synthesize a dataset from a task config");
  generate->add_option("config", config_path, "Task config (YAML or JSON)")->required();
  auto* train = app.add_subcommand("train", "Export learnable data and run the trainer command");
  train->add_option("config", config_path, "Train config")->required();
  auto* eval = app.add_subcommand("eval", "Score a model on an evaluation set with an LLM judge");
  eval->add_option("config", config_path, "Eval config")->required();

  std::string validate_type = "generate";
  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", config_path, "Config file")->required();
  validate->add_option("--type", validate_type, "generate, train or eval")
      ->check(CLI::IsMember({"generate", "train", "eval"}));

  std::string host = "127.0.0.1";
  int port = 8000;
  fs::path data_dir = "sdg-data";
  std::size_t max_jobs = 0;
  auto* serve = app.add_subcommand("serve", "Run the HTTP job service");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port; 0 picks a free one");
  serve->add_option("--data-dir", data_dir, "Job records and outputs");
  serve->add_option("--max-jobs", max_jobs, "Concurrent jobs (default: SDG_MAX_JOBS or 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInvalid;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

  if (generate->parsed()) return cmd_generate(config_path);
  if (train->parsed()) return cmd_train(config_path);
  if (eval->parsed()) return cmd_eval(config_path);
  if (validate->parsed()) return cmd_validate(config_path, validate_type);
  return cmd_serve(host, port, data_dir, max_jobs);
}
