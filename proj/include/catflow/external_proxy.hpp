#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace catflow::proxy {

struct ExternalProxyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Client for an adsorption-energy predictor running as a child process.
//
// Protocol: one JSON object per line. Request {"id": n, "xyz": "...",
// "adsorbate": "H"} on the child's stdin; response {"id": n, "e_h": x} on its
// stdout. Responses may arrive out of order and are matched by id. Each
// request must be answered within the configured timeout.
//
// A client owns one child process and serializes its own requests; pool
// several clients for concurrent evaluation.
// TODO: add a process pool once a real learned proxy lands.
class ExternalProxyClient {
 public:
  explicit ExternalProxyClient(std::string command, double timeout_seconds = 30.0);
  ~ExternalProxyClient();

  ExternalProxyClient(const ExternalProxyClient&) = delete;
  ExternalProxyClient& operator=(const ExternalProxyClient&) = delete;

  // Sends one request and blocks until its response arrives. Throws
  // ExternalProxyError on timeout, malformed output, or child exit.
  double request(const std::string& xyz, const std::string& adsorbate);

  const std::string& command() const { return command_; }

 private:
  void send_line(const std::string& line);
  // Reads lines until `id` is answered, buffering other responses.
  double await_response(std::int64_t id);

  std::string command_;
  double timeout_seconds_;
  int child_pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::int64_t next_id_ = 1;
  std::string read_buffer_;
  std::map<std::int64_t, double> pending_;
};

}  // namespace catflow::proxy
