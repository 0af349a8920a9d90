// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "flux/error.hpp"

namespace flux {

/// Wire unit: [len: u32 big-endian][body: len bytes]. The body is an
/// encoded Envelope except on stream mappings after the status-15 header.
struct Frame {
  std::string body;

  std::string encode() const;
  /// Consumes one frame from the front of `buffer` if complete; returns the
  /// number of bytes consumed (0 = need more data).
  static Result<std::size_t> try_decode(std::string_view buffer, std::size_t max_frame, Frame& out);
};

/// Observation hook for tests: sees every frame body any channel sends.
/// Installed process-wide; keep handlers cheap and thread-safe.
void set_frame_tap(std::function<void(const std::string&)> tap);
void tap_frame(const std::string& body);

class Channel {
 public:
  virtual ~Channel() = default;
  virtual Result<void> send_frame(const Frame& f) = 0;
  /// Blocks up to `timeout`; Errc::timeout on expiry, Errc::channel_closed
  /// once the peer is gone and the inbound queue is drained.
  virtual Result<Frame> recv_frame(std::chrono::milliseconds timeout) = 0;
  virtual void close() = 0;
  virtual bool closed() const = 0;
  virtual std::string peer_address() const = 0;
  virtual std::string transport_id() const = 0;
};

using ChannelPtr = std::shared_ptr<Channel>;

class Listener {
 public:
  virtual ~Listener() = default;
  virtual Result<ChannelPtr> accept(std::chrono::milliseconds timeout) = 0;
  virtual void close() = 0;
  /// Actual bound address ("host:port"; port resolved when 0 was requested).
  virtual std::string address() const = 0;
};

using ListenerPtr = std::shared_ptr<Listener>;

/// A pluggable communication substrate. Modules are compiled in and
/// activated/deactivated at runtime; an inactive module accepts no
/// listens or connects.
class TransportModule {
 public:
  virtual ~TransportModule() = default;
  virtual std::string id() const = 0;
  virtual bool reliable() const = 0;
  virtual std::size_t max_frame() const = 0;
  virtual Result<ListenerPtr> listen(const std::string& address) = 0;
  virtual Result<ChannelPtr> connect(const std::string& address) = 0;
};

std::unique_ptr<TransportModule> make_tcp_transport();
std::unique_ptr<TransportModule> make_udp_transport();
/// In-process transport; all instances share one address table.
std::unique_ptr<TransportModule> make_loopback_transport();

constexpr std::size_t kTcpMaxFrame = 16u * 1024 * 1024;
constexpr std::size_t kUdpMaxFrame = 60u * 1024;
constexpr std::size_t kLoopbackMaxFrame = 16u * 1024 * 1024;

/// Splits "host:port" at the last colon.
Result<std::pair<std::string, std::uint16_t>> parse_address(const std::string& address);

}  // namespace flux
