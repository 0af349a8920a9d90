// SPDX-License-Identifier: Apache-2.0
#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <mutex>

#include "flux/transport.hpp"

namespace flux {

namespace {

constexpr std::chrono::milliseconds kConnectTimeout{2000};

Result<sockaddr_in> resolve(const std::string& address) {
  auto parsed = parse_address(address);
  if (!parsed) return parsed.error();
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(parsed.value().second);
  std::string host = parsed.value().first;
  if (host == "localhost") host = "127.0.0.1";
  if (inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1)
    return Error{Errc::bad_address, "not an IPv4 address: " + host};
  return sa;
}

std::string addr_to_string(const sockaddr_in& sa) {
  char buf[INET_ADDRSTRLEN] = {};
  inet_ntop(AF_INET, &sa.sin_addr, buf, sizeof(buf));
  return std::string(buf) + ":" + std::to_string(ntohs(sa.sin_port));
}

int poll_fd(int fd, short events, std::chrono::milliseconds timeout) {
  pollfd p{fd, events, 0};
  return ::poll(&p, 1, static_cast<int>(timeout.count()));
}

class TcpChannel final : public Channel {
 public:
  TcpChannel(int fd, std::string peer) : fd_(fd), peer_(std::move(peer)) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpChannel() override { close(); }

  Result<void> send_frame(const Frame& f) override {
    if (f.body.size() > kTcpMaxFrame) return Error{Errc::frame_too_large, ""};
    const std::string bytes = f.encode();
    std::lock_guard lk(write_mu_);
    if (closed_.load()) return Error{Errc::channel_closed, ""};
    std::size_t off = 0;
    while (off < bytes.size()) {
      const ssize_t n = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        return Error{Errc::channel_closed, std::strerror(errno)};
      }
      off += static_cast<std::size_t>(n);
    }
    tap_frame(f.body);
    return {};
  }

  Result<Frame> recv_frame(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::lock_guard lk(read_mu_);
    for (;;) {
      Frame f;
      auto consumed = Frame::try_decode(buffer_, kTcpMaxFrame, f);
      if (!consumed) return consumed.error();
      if (consumed.value() > 0) {
        buffer_.erase(0, consumed.value());
        return f;
      }
      if (closed_.load()) return Error{Errc::channel_closed, ""};
      const auto now = std::chrono::steady_clock::now();
      if (now >= deadline) return Error{Errc::timeout, ""};
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now);
      const int pr = poll_fd(fd_, POLLIN, left);
      if (pr == 0) return Error{Errc::timeout, ""};
      if (pr < 0) {
        if (errno == EINTR) continue;
        return Error{Errc::channel_closed, std::strerror(errno)};
      }
      char chunk[16384];
      const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (n == 0) return Error{Errc::channel_closed, "peer closed"};
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        return Error{Errc::channel_closed, std::strerror(errno)};
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void close() override {
    if (closed_.exchange(true)) return;
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
  }
  bool closed() const override { return closed_.load(); }
  std::string peer_address() const override { return peer_; }
  std::string transport_id() const override { return "tcp"; }

 private:
  int fd_;
  std::string peer_;
  std::string buffer_;
  std::mutex write_mu_, read_mu_;
  std::atomic<bool> closed_{false};
};

class TcpListener final : public Listener {
 public:
  TcpListener(int fd, std::string address) : fd_(fd), address_(std::move(address)) {}
  ~TcpListener() override { close(); }

  Result<ChannelPtr> accept(std::chrono::milliseconds timeout) override {
    if (closed_.load()) return Error{Errc::channel_closed, "listener closed"};
    const int pr = poll_fd(fd_, POLLIN, timeout);
    if (pr == 0) return Error{Errc::timeout, ""};
    if (pr < 0) return Error{Errc::channel_closed, std::strerror(errno)};
    sockaddr_in peer{};
    socklen_t len = sizeof(peer);
    const int cfd = ::accept(fd_, reinterpret_cast<sockaddr*>(&peer), &len);
    if (cfd < 0) return Error{Errc::channel_closed, std::strerror(errno)};
    return ChannelPtr(std::make_shared<TcpChannel>(cfd, addr_to_string(peer)));
  }

  void close() override {
    if (closed_.exchange(true)) return;
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
  }
  std::string address() const override { return address_; }

 private:
  int fd_;
  std::string address_;
  std::atomic<bool> closed_{false};
};

class TcpTransport final : public TransportModule {
 public:
  std::string id() const override { return "tcp"; }
  bool reliable() const override { return true; }
  std::size_t max_frame() const override { return kTcpMaxFrame; }

  Result<ListenerPtr> listen(const std::string& address) override {
    auto sa = resolve(address);
    if (!sa) return sa.error();
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) return Error{Errc::bind_failure, std::strerror(errno)};
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd, reinterpret_cast<sockaddr*>(&sa.value()), sizeof(sockaddr_in)) < 0) {
      const Error err{Errc::bind_failure, std::strerror(errno)};
      ::close(fd);
      return err;
    }
    if (::listen(fd, 64) < 0) {
      const Error err{Errc::bind_failure, std::strerror(errno)};
      ::close(fd);
      return err;
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
    return ListenerPtr(std::make_shared<TcpListener>(fd, addr_to_string(bound)));
  }

  Result<ChannelPtr> connect(const std::string& address) override {
    auto sa = resolve(address);
    if (!sa) return sa.error();
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) return Error{Errc::connect_refused, std::strerror(errno)};
    const int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&sa.value()), sizeof(sockaddr_in));
    if (rc < 0 && errno != EINPROGRESS) {
      const Error err{Errc::connect_refused, std::strerror(errno)};
      ::close(fd);
      return err;
    }
    if (rc < 0) {
      const int pr = poll_fd(fd, POLLOUT, kConnectTimeout);
      int soerr = 0;
      socklen_t slen = sizeof(soerr);
      ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &soerr, &slen);
      if (pr <= 0 || soerr != 0) {
        ::close(fd);
        return Error{pr <= 0 ? Errc::peer_unreachable : Errc::connect_refused,
                     pr <= 0 ? "connect timeout" : std::strerror(soerr)};
      }
    }
    ::fcntl(fd, F_SETFL, flags);
    return ChannelPtr(std::make_shared<TcpChannel>(fd, address));
  }
};

}  // namespace

std::unique_ptr<TransportModule> make_tcp_transport() { return std::make_unique<TcpTransport>(); }

}  // namespace flux
