/*
 * Copyright 2026 The modred Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/**
 * @file transport.hpp
 * @brief Reliable byte streams carrying wire frames: an in-process pipe
 *        pair and POSIX TCP.
 */
#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>

#include "modred/disttrain/wire.hpp"
#include "modred/errors.hpp"

namespace modred::dist {

class Stream {
 public:
  virtual ~Stream() = default;
  virtual void write_all(std::span<const std::uint8_t> bytes) = 0;
  // Throws DisconnectError if the peer closes before n bytes arrive.
  virtual void read_exact(std::uint8_t* out, std::size_t n) = 0;
  virtual void close() = 0;
};

using StreamPtr = std::shared_ptr<Stream>;

inline void send_message(Stream& s, const Message& m) { s.write_all(encode_frame(m)); }

inline Message recv_message(Stream& s) {
  std::array<std::uint8_t, kFrameHeaderSize> h{};
  s.read_exact(h.data(), h.size());
  const FrameHeader fh = decode_header(h);
  std::vector<std::uint8_t> payload(fh.payload_len);
  if (!payload.empty()) s.read_exact(payload.data(), payload.size());
  return decode_payload(fh.type, payload);
}

namespace detail {

struct Pipe {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::uint8_t> buf;
  bool closed = false;
};

class MemoryStream final : public Stream {
 public:
  MemoryStream(std::shared_ptr<Pipe> in, std::shared_ptr<Pipe> out) : in_(std::move(in)), out_(std::move(out)) {}
  ~MemoryStream() override { close(); }

  void write_all(std::span<const std::uint8_t> bytes) override {
    std::lock_guard lock(out_->mu);
    if (out_->closed) throw DisconnectError("write on a closed in-memory stream");
    out_->buf.insert(out_->buf.end(), bytes.begin(), bytes.end());
    out_->cv.notify_all();
  }

  void read_exact(std::uint8_t* out, std::size_t n) override {
    std::unique_lock lock(in_->mu);
    std::size_t got = 0;
    while (got < n) {
      in_->cv.wait(lock, [&] { return !in_->buf.empty() || in_->closed; });
      if (in_->buf.empty()) throw DisconnectError("peer closed the in-memory stream");
      while (got < n && !in_->buf.empty()) {
        out[got++] = in_->buf.front();
        in_->buf.pop_front();
      }
    }
  }

  // Closes both directions; buffered bytes stay readable by the peer.
  void close() override {
    for (auto* p : {in_.get(), out_.get()}) {
      std::lock_guard lock(p->mu);
      p->closed = true;
      p->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Pipe> in_, out_;
};

}  // namespace detail

// Two connected in-process endpoints.
inline std::pair<StreamPtr, StreamPtr> memory_stream_pair() {
  auto a = std::make_shared<detail::Pipe>();
  auto b = std::make_shared<detail::Pipe>();
  return {std::make_shared<detail::MemoryStream>(a, b), std::make_shared<detail::MemoryStream>(b, a)};
}

class TcpStream final : public Stream {
 public:
  explicit TcpStream(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpStream() override { close(); }
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;

  void write_all(std::span<const std::uint8_t> bytes) override {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
      const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw DisconnectError(std::string("socket send failed: ") + std::strerror(errno));
      sent += static_cast<std::size_t>(n);
    }
  }

  void read_exact(std::uint8_t* out, std::size_t n) override {
    std::size_t got = 0;
    while (got < n) {
      const ssize_t r = ::recv(fd_, out + got, n - got, 0);
      if (r < 0 && errno == EINTR) continue;
      if (r == 0) throw DisconnectError("peer closed the connection");
      if (r < 0) throw DisconnectError(std::string("socket recv failed: ") + std::strerror(errno));
      got += static_cast<std::size_t>(r);
    }
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  std::string str() const { return host + ":" + std::to_string(port); }
};

inline Endpoint parse_endpoint(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == s.size()) {
    throw ConfigError("endpoint must be HOST:PORT, got '" + s + "'");
  }
  Endpoint e;
  e.host = s.substr(0, colon);
  const std::string port = s.substr(colon + 1);
  std::size_t used = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(port, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != port.size() || v > 65535) throw ConfigError("invalid port in endpoint '" + s + "'");
  e.port = static_cast<std::uint16_t>(v);
  return e;
}

namespace detail {

inline sockaddr_in resolve_ipv4(const Endpoint& e) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(e.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw ConfigError("cannot resolve host '" + e.host + "'");
  }
  sockaddr_in addr = *reinterpret_cast<sockaddr_in*>(res->ai_addr);
  ::freeaddrinfo(res);
  addr.sin_port = htons(e.port);
  return addr;
}

}  // namespace detail

class TcpListener {
 public:
  explicit TcpListener(const Endpoint& e) {
    const sockaddr_in addr = detail::resolve_ipv4(e);
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw ProtocolError(std::string("socket() failed: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd_, 64) != 0) {
      const std::string why = std::strerror(errno);
      ::close(fd_);
      throw ProtocolError("cannot listen on " + e.str() + ": " + why);
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
  }
  ~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
  }
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }

  StreamPtr accept() {
    for (;;) {
      const int c = ::accept(fd_, nullptr, nullptr);
      if (c >= 0) return std::make_shared<TcpStream>(c);
      if (errno != EINTR) throw ProtocolError(std::string("accept() failed: ") + std::strerror(errno));
    }
  }

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// Retries until the coordinator is up or the timeout passes.
inline StreamPtr tcp_connect(const Endpoint& e, std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
  const sockaddr_in addr = detail::resolve_ipv4(e);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw ProtocolError(std::string("socket() failed: ") + std::strerror(errno));
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) {
      return std::make_shared<TcpStream>(fd);
    }
    const std::string why = std::strerror(errno);
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline) {
      throw DisconnectError("cannot connect to " + e.str() + ": " + why);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

}  // namespace modred::dist
