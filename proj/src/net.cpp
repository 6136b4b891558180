// SPDX-License-Identifier: Apache-2.0
#include "lurkt/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

namespace lurkt::net {

namespace {

Error io_error(const std::string& what) { return make_error(Errc::Io, what + ": " + std::strerror(errno)); }

Result<std::uint16_t> parse_port(std::string_view s) {
  unsigned v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v > 65535) {
    return make_error(Errc::InvalidConfig, "bad port '" + std::string(s) + "'");
  }
  return static_cast<std::uint16_t>(v);
}

Result<Endpoint> parse_host_port(std::string_view hp) {
  auto colon = hp.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    return make_error(Errc::InvalidConfig, "expected HOST:PORT, got '" + std::string(hp) + "'");
  }
  Endpoint ep;
  ep.kind = Endpoint::Kind::Tcp;
  ep.host = std::string(hp.substr(0, colon));
  LURKT_ASSIGN(ep.port, parse_port(hp.substr(colon + 1)));
  return ep;
}

Result<sockaddr_un> unix_addr(const std::string& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.empty() || path.size() >= sizeof(addr.sun_path)) {
    return make_error(Errc::InvalidConfig, "unix socket path length");
  }
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  return addr;
}

}  // namespace

std::string Endpoint::to_string() const {
  switch (kind) {
    case Kind::InProcess: return "inprocess";
    case Kind::Unix: return "unix:" + path;
    case Kind::Tcp: return "tcp:" + host + ":" + std::to_string(port);
  }
  return {};
}

Result<Endpoint> parse_endpoint(std::string_view text) {
  if (text == "inprocess") return Endpoint{};
  if (text.rfind("unix:", 0) == 0) {
    Endpoint ep;
    ep.kind = Endpoint::Kind::Unix;
    ep.path = std::string(text.substr(5));
    if (ep.path.empty()) return make_error(Errc::InvalidConfig, "empty unix socket path");
    return ep;
  }
  if (text.rfind("tcp:", 0) == 0) return parse_host_port(text.substr(4));
  return make_error(Errc::InvalidConfig,
                    "endpoint '" + std::string(text) + "'; expected inprocess, unix:PATH or tcp:HOST:PORT");
}

Result<Endpoint> parse_listen(std::string_view text) {
  if (text.rfind("unix:", 0) == 0 || text.rfind("tcp:", 0) == 0) return parse_endpoint(text);
  return parse_host_port(text);
}

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.fd_;
    o.fd_ = -1;
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void Socket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Status Socket::write_all(ByteView data) {
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return io_error("send");
    }
    off += static_cast<std::size_t>(n);
  }
  return {};
}

Result<Bytes> Socket::read_exact(std::size_t n) {
  Bytes out(n);
  std::size_t off = 0;
  while (off < n) {
    ssize_t r = ::recv(fd_, out.data() + off, n - off, 0);
    if (r < 0) {
      if (errno == EINTR) continue;
      return io_error("recv");
    }
    if (r == 0) return make_error(Errc::Io, "connection closed");
    off += static_cast<std::size_t>(r);
  }
  return out;
}

Result<Bytes> Socket::read_some(std::size_t max) {
  Bytes out(max);
  for (;;) {
    ssize_t r = ::recv(fd_, out.data(), max, 0);
    if (r < 0) {
      if (errno == EINTR) continue;
      return io_error("recv");
    }
    out.resize(static_cast<std::size_t>(r));
    return out;
  }
}

Result<Socket> connect(const Endpoint& ep) {
  if (ep.kind == Endpoint::Kind::Unix) {
    LURKT_ASSIGN(auto addr, unix_addr(ep.path));
    Socket s(::socket(AF_UNIX, SOCK_STREAM, 0));
    if (!s.valid()) return io_error("socket");
    if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) return io_error("connect " + ep.path);
    return s;
  }
  if (ep.kind != Endpoint::Kind::Tcp) return make_error(Errc::InvalidConfig, "cannot connect to inprocess");
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  std::string port = std::to_string(ep.port);
  if (int rc = ::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    return make_error(Errc::Io, "resolve " + ep.host + ": " + gai_strerror(rc));
  }
  Error last = make_error(Errc::Io, "no address for " + ep.host);
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!s.valid()) continue;
    if (::connect(s.fd(), ai->ai_addr, ai->ai_addrlen) == 0) {
      int one = 1;
      ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      ::freeaddrinfo(res);
      return s;
    }
    last = io_error("connect " + ep.to_string());
  }
  ::freeaddrinfo(res);
  return last;
}

Result<Socket> listen(const Endpoint& ep, int backlog) {
  if (ep.kind == Endpoint::Kind::Unix) {
    LURKT_ASSIGN(auto addr, unix_addr(ep.path));
    ::unlink(ep.path.c_str());
    Socket s(::socket(AF_UNIX, SOCK_STREAM, 0));
    if (!s.valid()) return io_error("socket");
    if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) return io_error("bind " + ep.path);
    if (::listen(s.fd(), backlog) != 0) return io_error("listen");
    return s;
  }
  if (ep.kind != Endpoint::Kind::Tcp) return make_error(Errc::InvalidConfig, "cannot listen on inprocess");
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  std::string port = std::to_string(ep.port);
  if (int rc = ::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    return make_error(Errc::Io, "resolve " + ep.host + ": " + gai_strerror(rc));
  }
  Error last = make_error(Errc::Io, "no address for " + ep.host);
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!s.valid()) continue;
    int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(s.fd(), ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(s.fd(), backlog) == 0) {
      ::freeaddrinfo(res);
      return s;
    }
    last = io_error("bind " + ep.to_string());
  }
  ::freeaddrinfo(res);
  return last;
}

Result<Socket> accept(const Socket& listener) {
  for (;;) {
    int fd = ::accept(listener.fd(), nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return io_error("accept");
    }
    Socket s(fd);
    sockaddr_storage addr{};
    socklen_t len = sizeof(addr);
    if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0 && addr.ss_family != AF_UNIX) {
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    }
    return s;
  }
}

std::uint16_t local_port(const Socket& s) {
  sockaddr_storage addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) return 0;
  if (addr.ss_family == AF_INET) return ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  if (addr.ss_family == AF_INET6) return ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
  return 0;
}

}  // namespace lurkt::net
