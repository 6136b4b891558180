// SPDX-License-Identifier: Apache-2.0
//
// Blocking POSIX stream sockets (unix and TCP) and endpoint parsing.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "lurkt/bytes.hpp"
#include "lurkt/error.hpp"

namespace lurkt::net {

struct Endpoint {
  enum class Kind { InProcess, Unix, Tcp };
  Kind kind = Kind::InProcess;
  std::string path;  // Unix
  std::string host;  // Tcp
  std::uint16_t port = 0;

  std::string to_string() const;
};

// "inprocess", "unix:PATH", "tcp:HOST:PORT".
Result<Endpoint> parse_endpoint(std::string_view text);
// "HOST:PORT", "tcp:HOST:PORT" or "unix:PATH": listen and connect addresses.
Result<Endpoint> parse_listen(std::string_view text);

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }
  void close();
  // Unblocks readers and accept() on other threads.
  void shutdown();

  Status write_all(ByteView data);
  // Io on EOF before n bytes.
  Result<Bytes> read_exact(std::size_t n);
  // Empty result on orderly EOF.
  Result<Bytes> read_some(std::size_t max);

 private:
  int fd_ = -1;
};

Result<Socket> connect(const Endpoint& ep);
Result<Socket> listen(const Endpoint& ep, int backlog = 64);
Result<Socket> accept(const Socket& listener);
// Port actually bound, for listeners opened on port 0.
std::uint16_t local_port(const Socket& s);

}  // namespace lurkt::net
