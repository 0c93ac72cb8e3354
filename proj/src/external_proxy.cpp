#include "catflow/external_proxy.hpp"

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>

#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"

namespace catflow::proxy {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace

ExternalProxyClient::ExternalProxyClient(std::string command,
                                         double timeout_seconds)
    : command_(std::move(command)), timeout_seconds_(timeout_seconds) {
  if (command_.empty()) {
    throw ExternalProxyError("external proxy: empty command");
  }
  int to_child[2];
  int from_child[2];
  if (pipe(to_child) != 0 || pipe(from_child) != 0) {
    throw ExternalProxyError("external proxy: pipe() failed");
  }
  const pid_t pid = fork();
  if (pid < 0) {
    throw ExternalProxyError("external proxy: fork() failed");
  }
  if (pid == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    close(to_child[0]);
    close(to_child[1]);
    close(from_child[0]);
    close(from_child[1]);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(to_child[0]);
  close(from_child[1]);
  child_pid_ = pid;
  to_child_ = to_child[1];
  from_child_ = from_child[0];
}

ExternalProxyClient::~ExternalProxyClient() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (child_pid_ > 0) {
    kill(child_pid_, SIGTERM);
    int status = 0;
    waitpid(child_pid_, &status, 0);
  }
}

void ExternalProxyClient::send_line(const std::string& line) {
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = write(to_child_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ExternalProxyError("external proxy: write failed (" +
                               std::string(std::strerror(errno)) + ")");
    }
    written += static_cast<std::size_t>(n);
  }
}

double ExternalProxyClient::await_response(std::int64_t id) {
  const auto start = std::chrono::steady_clock::now();
  while (true) {
    if (const auto it = pending_.find(id); it != pending_.end()) {
      const double value = it->second;
      pending_.erase(it);
      return value;
    }
    // Pull one complete line from the buffer if available.
    const auto newline = read_buffer_.find('\n');
    if (newline != std::string::npos) {
      std::string line = read_buffer_.substr(0, newline);
      read_buffer_.erase(0, newline + 1);
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw ExternalProxyError("external proxy: malformed response line: " + line);
      }
      if (!j.contains("id") || !j.contains("e_h")) {
        throw ExternalProxyError(
            "external proxy: response missing id or e_h: " + line);
      }
      pending_[j["id"].get<std::int64_t>()] = j["e_h"].get<double>();
      continue;
    }

    const double remaining = timeout_seconds_ - seconds_since(start);
    if (remaining <= 0.0) {
      throw ExternalProxyError("external proxy: timeout after " +
                               std::to_string(timeout_seconds_) +
                               " s awaiting response id " + std::to_string(id));
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = poll(&pfd, 1, static_cast<int>(remaining * 1000.0) + 1);
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw ExternalProxyError("external proxy: poll failed");
    }
    if (rc == 0) {
      throw ExternalProxyError("external proxy: timeout after " +
                               std::to_string(timeout_seconds_) +
                               " s awaiting response id " + std::to_string(id));
    }
    char chunk[4096];
    const ssize_t n = read(from_child_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ExternalProxyError("external proxy: read failed");
    }
    if (n == 0) {
      throw ExternalProxyError(
          "external proxy: child closed its output stream before answering id " +
          std::to_string(id));
    }
    read_buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

double ExternalProxyClient::request(const std::string& xyz,
                                    const std::string& adsorbate) {
  const std::int64_t id = next_id_++;
  nlohmann::json j;
  j["id"] = id;
  j["xyz"] = xyz;
  j["adsorbate"] = adsorbate;
  send_line(j.dump() + "\n");
  return await_response(id);
}

}  // namespace catflow::proxy
