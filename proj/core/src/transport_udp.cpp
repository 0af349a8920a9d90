// SPDX-License-Identifier: Apache-2.0
#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

#include "flux/transport.hpp"

namespace flux {

namespace {

Result<sockaddr_in> resolve_udp(const std::string& address) {
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

std::string udp_addr_string(const sockaddr_in& sa) {
  char buf[INET_ADDRSTRLEN] = {};
  inet_ntop(AF_INET, &sa.sin_addr, buf, sizeof(buf));
  return std::string(buf) + ":" + std::to_string(ntohs(sa.sin_port));
}

struct FrameQueue {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Frame> frames;
  bool closed = false;

  Result<Frame> pop(std::chrono::milliseconds timeout) {
    std::unique_lock lk(mu);
    if (!cv.wait_for(lk, timeout, [&] { return !frames.empty() || closed; }))
      return Error{Errc::timeout, ""};
    if (frames.empty()) return Error{Errc::channel_closed, ""};
    Frame f = std::move(frames.front());
    frames.pop_front();
    return f;
  }
  void push(Frame f) {
    {
      std::lock_guard lk(mu);
      if (closed) return;
      frames.push_back(std::move(f));
    }
    cv.notify_all();
  }
  void close() {
    {
      std::lock_guard lk(mu);
      closed = true;
    }
    cv.notify_all();
  }
};

// Client side: one connected datagram socket per channel.
class UdpClientChannel final : public Channel {
 public:
  UdpClientChannel(int fd, std::string peer) : fd_(fd), peer_(std::move(peer)) {}
  ~UdpClientChannel() override { close(); }

  Result<void> send_frame(const Frame& f) override {
    if (f.body.size() > kUdpMaxFrame) return Error{Errc::frame_too_large, ""};
    if (closed_.load()) return Error{Errc::channel_closed, ""};
    const std::string bytes = f.encode();
    const ssize_t n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) return Error{Errc::channel_closed, std::strerror(errno)};
    tap_frame(f.body);
    return {};
  }

  Result<Frame> recv_frame(std::chrono::milliseconds timeout) override {
    if (closed_.load()) return Error{Errc::channel_closed, ""};
    pollfd p{fd_, POLLIN, 0};
    const int pr = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (pr == 0) return Error{Errc::timeout, ""};
    if (pr < 0) return Error{Errc::channel_closed, std::strerror(errno)};
    std::string buf(kUdpMaxFrame + 4, '\0');
    const ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
    if (n < 0) return Error{Errc::channel_closed, std::strerror(errno)};
    Frame f;
    auto consumed = Frame::try_decode(std::string_view(buf.data(), static_cast<std::size_t>(n)),
                                      kUdpMaxFrame, f);
    if (!consumed) return consumed.error();
    if (consumed.value() == 0) return Error{Errc::not_json, "truncated datagram"};
    return f;
  }

  void close() override {
    if (closed_.exchange(true)) return;
    ::close(fd_);
  }
  bool closed() const override { return closed_.load(); }
  std::string peer_address() const override { return peer_; }
  std::string transport_id() const override { return "udp"; }

 private:
  int fd_;
  std::string peer_;
  std::atomic<bool> closed_{false};
};

class UdpListener;

// Server side: shares the listener's socket; frames arrive via the
// listener's pump thread, sends go out with sendto.
class UdpServerChannel final : public Channel {
 public:
  UdpServerChannel(int fd, sockaddr_in peer) : fd_(fd), peer_sa_(peer), peer_(udp_addr_string(peer)) {}

  Result<void> send_frame(const Frame& f) override {
    if (f.body.size() > kUdpMaxFrame) return Error{Errc::frame_too_large, ""};
    if (closed_.load()) return Error{Errc::channel_closed, ""};
    const std::string bytes = f.encode();
    const ssize_t n = ::sendto(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL,
                               reinterpret_cast<const sockaddr*>(&peer_sa_), sizeof(peer_sa_));
    if (n < 0) return Error{Errc::channel_closed, std::strerror(errno)};
    tap_frame(f.body);
    return {};
  }

  Result<Frame> recv_frame(std::chrono::milliseconds timeout) override {
    if (closed_.load()) return Error{Errc::channel_closed, ""};
    return queue_.pop(timeout);
  }

  void close() override {
    if (closed_.exchange(true)) return;
    queue_.close();
  }
  bool closed() const override { return closed_.load(); }
  std::string peer_address() const override { return peer_; }
  std::string transport_id() const override { return "udp"; }

  void deliver(Frame f) { queue_.push(std::move(f)); }

 private:
  int fd_;
  sockaddr_in peer_sa_;
  std::string peer_;
  FrameQueue queue_;
  std::atomic<bool> closed_{false};
};

class UdpListener final : public Listener {
 public:
  UdpListener(int fd, std::string address) : fd_(fd), address_(std::move(address)) {
    pump_ = std::thread([this] { pump(); });
  }
  ~UdpListener() override {
    close();
    if (pump_.joinable()) pump_.join();
  }

  Result<ChannelPtr> accept(std::chrono::milliseconds timeout) override {
    std::unique_lock lk(mu_);
    if (!cv_.wait_for(lk, timeout, [&] { return !backlog_.empty() || closed_; }))
      return Error{Errc::timeout, ""};
    if (backlog_.empty()) return Error{Errc::channel_closed, "listener closed"};
    ChannelPtr ch = std::move(backlog_.front());
    backlog_.pop_front();
    return ch;
  }

  void close() override {
    {
      std::lock_guard lk(mu_);
      if (closed_) return;
      closed_ = true;
      for (auto& [key, ch] : channels_) {
        if (auto c = ch.lock()) c->close();
      }
      channels_.clear();
    }
    cv_.notify_all();
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
  }
  std::string address() const override { return address_; }

 private:
  void pump() {
    std::string buf(kUdpMaxFrame + 4, '\0');
    for (;;) {
      sockaddr_in from{};
      socklen_t len = sizeof(from);
      const ssize_t n = ::recvfrom(fd_, buf.data(), buf.size(), 0,
                                   reinterpret_cast<sockaddr*>(&from), &len);
      if (n < 0) {
        if (errno == EINTR) continue;
        return;  // socket closed
      }
      Frame f;
      auto consumed = Frame::try_decode(std::string_view(buf.data(), static_cast<std::size_t>(n)),
                                        kUdpMaxFrame, f);
      if (!consumed || consumed.value() == 0) continue;  // drop malformed datagrams

      const std::string key = udp_addr_string(from);
      std::shared_ptr<UdpServerChannel> target;
      bool fresh = false;
      {
        std::lock_guard lk(mu_);
        if (closed_) return;
        auto it = channels_.find(key);
        if (it != channels_.end()) target = it->second.lock();
        if (!target || target->closed()) {
          target = std::make_shared<UdpServerChannel>(fd_, from);
          channels_[key] = target;
          backlog_.push_back(target);
          fresh = true;
        }
      }
      target->deliver(std::move(f));
      if (fresh) cv_.notify_all();
    }
  }

  int fd_;
  std::string address_;
  std::thread pump_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<ChannelPtr> backlog_;
  std::map<std::string, std::weak_ptr<UdpServerChannel>> channels_;
  bool closed_ = false;
};

class UdpTransport final : public TransportModule {
 public:
  std::string id() const override { return "udp"; }
  bool reliable() const override { return false; }
  std::size_t max_frame() const override { return kUdpMaxFrame; }

  Result<ListenerPtr> listen(const std::string& address) override {
    auto sa = resolve_udp(address);
    if (!sa) return sa.error();
    const int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd < 0) return Error{Errc::bind_failure, std::strerror(errno)};
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd, reinterpret_cast<sockaddr*>(&sa.value()), sizeof(sockaddr_in)) < 0) {
      const Error err{Errc::bind_failure, std::strerror(errno)};
      ::close(fd);
      return err;
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
    return ListenerPtr(std::make_shared<UdpListener>(fd, udp_addr_string(bound)));
  }

  Result<ChannelPtr> connect(const std::string& address) override {
    auto sa = resolve_udp(address);
    if (!sa) return sa.error();
    const int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd < 0) return Error{Errc::connect_refused, std::strerror(errno)};
    if (::connect(fd, reinterpret_cast<sockaddr*>(&sa.value()), sizeof(sockaddr_in)) < 0) {
      const Error err{Errc::connect_refused, std::strerror(errno)};
      ::close(fd);
      return err;
    }
    return ChannelPtr(std::make_shared<UdpClientChannel>(fd, address));
  }
};

}  // namespace

std::unique_ptr<TransportModule> make_udp_transport() { return std::make_unique<UdpTransport>(); }

}  // namespace flux
