#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <deque>

#include "sdg/core/text.hpp"
#include "sdg/error.hpp"
#include "sdg/evaluation/evaluation.hpp"

namespace sdg::evaluation {

std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  out += "'";
  return out;
}

TrainerFailure::TrainerFailure(int exit_code, std::vector<std::string> tail)
    : Error(Errc::NonZeroExit, "trainer exited with status " + std::to_string(exit_code) +
                                   (tail.empty() ? std::string() : "; last output: " + tail.back())),
      exit_code_(exit_code),
      tail_(std::move(tail)) {}

TrainerResult invoke_trainer(const TrainExport& exported, const std::string& trainer_cmd,
                             const std::optional<fs::path>& config_path,
                             const std::function<void(const std::string&)>& on_line, parallel::CancelToken cancel) {
  if (trainer_cmd.find("{data}") == std::string::npos) {
    throw Error(Errc::Precondition, "trainer command must contain the {data} placeholder");
  }
  TrainerResult result;
  std::vector<std::pair<std::string, std::string>> values{{"data", shell_quote(exported.data_path.string())}};
  values.emplace_back("config", config_path ? shell_quote(config_path->string()) : std::string("''"));
  result.command = text::render_template(trainer_cmd, values);

  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) throw Error(Errc::SpawnFailure, std::string("pipe: ") + std::strerror(errno));
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(fds[0]);
    ::close(fds[1]);
    throw Error(Errc::SpawnFailure, std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::dup2(fds[1], STDOUT_FILENO);
    ::dup2(fds[1], STDERR_FILENO);
    ::setpgid(0, 0);
    ::execl("/bin/sh", "sh", "-c", result.command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(fds[1]);

  std::deque<std::string> tail;
  std::string pending;
  auto emit = [&](std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (on_line) on_line(line);
    tail.push_back(std::move(line));
    if (tail.size() > kLogTailLines) tail.pop_front();
  };

  bool killed = false;
  char buf[4096];
  for (;;) {
    if (!killed && cancel.requested()) {
      ::kill(-pid, SIGTERM);
      killed = true;
    }
    pollfd p{fds[0], POLLIN, 0};
    const int ready = ::poll(&p, 1, 200);
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (ready == 0) continue;
    const auto n = ::read(fds[0], buf, sizeof buf);
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (n == 0) break;
    pending.append(buf, static_cast<std::size_t>(n));
    std::size_t nl;
    while ((nl = pending.find('\n')) != std::string::npos) {
      emit(pending.substr(0, nl));
      pending.erase(0, nl + 1);
    }
  }
  if (!pending.empty()) emit(pending);
  ::close(fds[0]);

  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  result.tail.assign(tail.begin(), tail.end());
  if (killed) throw Error(Errc::Cancelled, "trainer cancelled");
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.exit_code = 128 + WTERMSIG(status);
  }
  if (result.exit_code != 0) throw TrainerFailure(result.exit_code, result.tail);
  return result;
}

}  // namespace sdg::evaluation
