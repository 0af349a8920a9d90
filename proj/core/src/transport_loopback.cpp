// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>

#include "flux/transport.hpp"

namespace flux {

namespace {

// One half-duplex frame pipe; a channel owns one for each direction.
struct Pipe {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Frame> frames;
  bool closed = false;

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

class LoopbackChannel final : public Channel {
 public:
  LoopbackChannel(std::shared_ptr<Pipe> out, std::shared_ptr<Pipe> in, std::string peer)
      : out_(std::move(out)), in_(std::move(in)), peer_(std::move(peer)) {}

  ~LoopbackChannel() override { close(); }

  Result<void> send_frame(const Frame& f) override {
    if (f.body.size() > kLoopbackMaxFrame) return Error{Errc::frame_too_large, ""};
    {
      std::lock_guard lk(out_->mu);
      if (out_->closed || local_closed_.load()) return Error{Errc::channel_closed, ""};
      out_->frames.push_back(f);
    }
    tap_frame(f.body);
    out_->cv.notify_all();
    return {};
  }

  Result<Frame> recv_frame(std::chrono::milliseconds timeout) override {
    std::unique_lock lk(in_->mu);
    if (!in_->cv.wait_for(lk, timeout, [&] { return !in_->frames.empty() || in_->closed; }))
      return Error{Errc::timeout, ""};
    if (in_->frames.empty()) return Error{Errc::channel_closed, ""};
    Frame f = std::move(in_->frames.front());
    in_->frames.pop_front();
    return f;
  }

  void close() override {
    if (local_closed_.exchange(true)) return;
    out_->close();
    in_->close();
  }
  bool closed() const override { return local_closed_.load(); }
  std::string peer_address() const override { return peer_; }
  std::string transport_id() const override { return "loopback"; }

 private:
  std::shared_ptr<Pipe> out_, in_;
  std::string peer_;
  std::atomic<bool> local_closed_{false};
};

struct PendingConnect {
  ChannelPtr server_side;
};

class LoopbackListener final : public Listener {
 public:
  explicit LoopbackListener(std::string address) : address_(std::move(address)) {}

  Result<ChannelPtr> accept(std::chrono::milliseconds timeout) override {
    std::unique_lock lk(mu_);
    if (!cv_.wait_for(lk, timeout, [&] { return !backlog_.empty() || closed_; }))
      return Error{Errc::timeout, ""};
    if (closed_ && backlog_.empty()) return Error{Errc::channel_closed, "listener closed"};
    ChannelPtr ch = std::move(backlog_.front());
    backlog_.pop_front();
    return ch;
  }

  void offer(ChannelPtr server_side) {
    {
      std::lock_guard lk(mu_);
      if (closed_) return;
      backlog_.push_back(std::move(server_side));
    }
    cv_.notify_all();
  }

  void close() override;
  std::string address() const override { return address_; }
  bool is_closed() {
    std::lock_guard lk(mu_);
    return closed_;
  }

 private:
  std::string address_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<ChannelPtr> backlog_;
  bool closed_ = false;
};

// Process-wide address table shared by all loopback module instances, so two
// in-process components can talk to each other.
struct LoopbackNet {
  std::mutex mu;
  std::map<std::string, std::weak_ptr<LoopbackListener>> listeners;
  std::uint64_t auto_port = 1;

  static LoopbackNet& instance() {
    static LoopbackNet net;
    return net;
  }
};

void LoopbackListener::close() {
  {
    std::lock_guard lk(mu_);
    if (closed_) return;
    closed_ = true;
    backlog_.clear();
  }
  cv_.notify_all();
  auto& net = LoopbackNet::instance();
  std::lock_guard lk(net.mu);
  net.listeners.erase(address_);
}

class LoopbackTransport final : public TransportModule {
 public:
  std::string id() const override { return "loopback"; }
  bool reliable() const override { return true; }
  std::size_t max_frame() const override { return kLoopbackMaxFrame; }

  Result<ListenerPtr> listen(const std::string& address) override {
    auto parsed = parse_address(address);
    if (!parsed) return parsed.error();
    auto& net = LoopbackNet::instance();
    std::lock_guard lk(net.mu);
    std::string addr = address;
    if (parsed.value().second == 0)
      addr = parsed.value().first + ":" + std::to_string(100000 + net.auto_port++);
    auto it = net.listeners.find(addr);
    if (it != net.listeners.end() && !it->second.expired())
      return Error{Errc::bind_failure, addr + " already in use"};
    auto listener = std::make_shared<LoopbackListener>(addr);
    net.listeners[addr] = listener;
    return ListenerPtr(listener);
  }

  Result<ChannelPtr> connect(const std::string& address) override {
    std::shared_ptr<LoopbackListener> listener;
    {
      auto& net = LoopbackNet::instance();
      std::lock_guard lk(net.mu);
      auto it = net.listeners.find(address);
      if (it != net.listeners.end()) listener = it->second.lock();
    }
    if (!listener || listener->is_closed())
      return Error{Errc::connect_refused, "no loopback listener at " + address};
    auto a_to_b = std::make_shared<Pipe>();
    auto b_to_a = std::make_shared<Pipe>();
    auto client = std::make_shared<LoopbackChannel>(a_to_b, b_to_a, address);
    auto server = std::make_shared<LoopbackChannel>(b_to_a, a_to_b, "loopback-peer");
    listener->offer(server);
    return ChannelPtr(client);
  }
};

}  // namespace

std::unique_ptr<TransportModule> make_loopback_transport() {
  return std::make_unique<LoopbackTransport>();
}

}  // namespace flux
