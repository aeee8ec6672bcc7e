#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "test_support.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <stdexcept>

#include "sdg/core/text.hpp"

namespace sdg::testing {

fs::path fixtures_dir() { return SDG_FIXTURES_DIR; }
fs::path tool_path() { return SDG_TOOL_PATH; }
fs::path crash_worker_path() { return SDG_CRASH_WORKER_PATH; }

TempDir::TempDir() {
  std::string tmpl = (fs::temp_directory_path() / "sdg-test-XXXXXX").string();
  if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

ScriptedLlm scripted_llm(std::vector<llm::MockRule> rules, bool with_defaults, llm::GatewayOptions options) {
  ScriptedLlm s;
  s.backend = std::make_shared<llm::MockBackend>(std::move(rules));
  if (with_defaults) s.backend->add_rules(llm::default_pipeline_rules());
  options.backoff_base = std::chrono::milliseconds(1);
  options.backoff_cap = std::chrono::milliseconds(2);
  s.gateway = std::make_shared<llm::Gateway>(s.backend, options);
  return s;
}

std::string literal(std::string_view marker) {
  static const std::string special = R"(\^$.|?*+()[]{})";
  std::string out;
  for (char c : marker) {
    if (special.find(c) != std::string::npos) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

llm::MockRule text_rule(const std::string& pattern, const std::string& response) {
  llm::MockRule r;
  r.name = "test:" + pattern.substr(0, 24);
  r.pattern = std::regex(pattern);
  r.response = response;
  return r;
}

llm::MockRule handler_rule(const std::string& pattern, llm::MockHandler handler) {
  llm::MockRule r;
  r.name = "test:" + pattern.substr(0, 24);
  r.pattern = std::regex(pattern);
  r.response = std::move(handler);
  return r;
}

EndpointConfig endpoint(const std::string& model) {
  EndpointConfig e;
  e.base_url = "http://mock.local/v1";
  e.model = model;
  return e;
}

namespace {
json gen_endpoint() { return json{{"base_url", "http://mock.local/v1"}, {"model", "mock-generator"}}; }
}  // namespace

json local_config_json(const fs::path& out_dir, int n) {
  return json{{"task",
               {{"path", "local"},
                {"instruction", "Write physics word problems with worked numeric answers."},
                {"domain", "physics"},
                {"num_samples", n},
                {"seed", 7}}},
              {"source", {{"local", {{"corpus_dir", (fixtures_dir() / "corpus").string()}}}}},
              {"generator", gen_endpoint()},
              {"parallel", {{"n_workers", 8}}},
              {"output", {{"dir", out_dir.string()}}}};
}

json distill_config_json(const fs::path& out_dir, int n) {
  return json{{"task",
               {{"path", "distill"},
                {"instruction", "Write grade-school arithmetic word problems with answers."},
                {"domain", "math"},
                {"num_samples", n},
                {"seed", 11}}},
              {"source",
               {{"distill", {{"teacher", {{"base_url", "http://mock.local/v1"}, {"model", "mock-teacher"}}}}}}},
              {"generator", gen_endpoint()},
              {"parallel", {{"n_workers", 8}}},
              {"output", {{"dir", out_dir.string()}}}};
}

json web_config_json(const fs::path& out_dir, int n) {
  return json{{"task",
               {{"path", "web"},
                {"instruction", "Physics questions"},
                {"domain", "physics"},
                {"num_samples", n},
                {"seed", 5}}},
              {"source", {{"web", {{"max_candidate_datasets", 5}, {"preview_rows", 25}}}}},
              {"generator", gen_endpoint()},
              {"parallel", {{"n_workers", 4}}},
              {"output", {{"dir", out_dir.string()}}}};
}

std::string write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  text::write_file_atomic(path, content);
  return path.string();
}

namespace {

[[noreturn]] void exec_child(const std::vector<std::string>& argv, const std::map<std::string, std::string>& env,
                             const fs::path& cwd) {
  for (const auto& [k, v] : env) ::setenv(k.c_str(), v.c_str(), 1);
  if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) ::_exit(126);
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  ::execv(args[0], args.data());
  ::_exit(127);
}

int redirect(const fs::path& p, int target) {
  int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) return -1;
  ::dup2(fd, target);
  ::close(fd);
  return 0;
}

}  // namespace

pid_t spawn_process(const std::vector<std::string>& argv, const std::map<std::string, std::string>& env,
                    const fs::path& stdout_path, const fs::path& stderr_path) {
  const pid_t pid = ::fork();
  if (pid < 0) throw std::runtime_error("fork failed");
  if (pid == 0) {
    redirect(stdout_path, STDOUT_FILENO);
    redirect(stderr_path, STDERR_FILENO);
    exec_child(argv, env, {});
  }
  return pid;
}

int wait_process(pid_t pid) {
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) return -1;
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

ProcessResult run_process(const std::vector<std::string>& argv, const std::map<std::string, std::string>& env,
                          const fs::path& cwd) {
  TempDir io;
  const auto out = io / "stdout";
  const auto err = io / "stderr";
  const pid_t pid = ::fork();
  if (pid < 0) throw std::runtime_error("fork failed");
  if (pid == 0) {
    redirect(out, STDOUT_FILENO);
    redirect(err, STDERR_FILENO);
    exec_child(argv, env, cwd);
  }
  ProcessResult r;
  r.exit_code = wait_process(pid);
  r.out = fs::exists(out) ? text::read_file(out) : std::string();
  r.err = fs::exists(err) ? text::read_file(err) : std::string();
  return r;
}

HttpReply http_get(int port, const std::string& path) {
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(std::chrono::seconds(30));
  auto res = cli.Get(path);
  if (!res) throw std::runtime_error("GET " + path + " failed: " + httplib::to_string(res.error()));
  return {res->status, res->body, res->get_header_value("Content-Type"),
          res->get_header_value("Content-Disposition")};
}

HttpReply http_post(int port, const std::string& path, const std::string& body) {
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(std::chrono::seconds(30));
  auto res = cli.Post(path, body, "application/json");
  if (!res) throw std::runtime_error("POST " + path + " failed: " + httplib::to_string(res.error()));
  return {res->status, res->body, res->get_header_value("Content-Type"),
          res->get_header_value("Content-Disposition")};
}

std::vector<json> sse_events(int port, const std::string& path, std::chrono::milliseconds timeout) {
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(timeout);
  std::string buffer;
  std::vector<json> events;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  cli.Get(path, [&](const char* data, std::size_t len) {
    buffer.append(data, len);
    std::size_t end;
    while ((end = buffer.find("\n\n")) != std::string::npos) {
      const auto frame = buffer.substr(0, end);
      buffer.erase(0, end + 2);
      std::size_t pos = 0;
      while (pos < frame.size()) {
        auto nl = frame.find('\n', pos);
        auto line = frame.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? frame.size() : nl + 1;
        if (line.rfind("data: ", 0) == 0) events.push_back(json::parse(line.substr(6)));
      }
    }
    return std::chrono::steady_clock::now() < deadline;
  });
  return events;
}

}  // namespace sdg::testing
