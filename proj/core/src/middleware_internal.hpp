// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "flux/middleware.hpp"

namespace flux {

struct Middleware::PendingRequest {
  std::mutex mu;
  std::condition_variable cv;
  std::vector<json> bodies;
  bool done = false;
  std::optional<Error> err;

  void finish(std::optional<Error> e) {
    {
      std::lock_guard lk(mu);
      if (done) return;
      done = true;
      err = std::move(e);
    }
    cv.notify_all();
  }
};

struct Middleware::EndpointRec {
  EndpointDescriptor desc;
  std::uint64_t next_msg_id = 1;
  std::vector<Filter> send_filters, recv_filters;
  std::vector<std::int64_t> send_rate_state, recv_rate_state;
  std::deque<Received> inbound;
  EndpointStats stats;
  RequestHandler handler;
  StreamRequestHandler stream_handler;
  std::map<std::string, std::shared_ptr<PendingRequest>> pending;  // by request msg_id
  std::mutex send_mu;  // serializes send() per endpoint so per-mapping order follows msg_id
};

struct Middleware::MappingRec {
  std::string id;
  std::string local_ep;
  std::string peer_component;
  std::string peer_endpoint;
  std::string peer_address;
  std::string transport;
  Manifest peer_manifest;  // from HELLO
  std::vector<Identity> peer_identities;
  MappingPhase phase = MappingPhase::hello_sent;
  std::string close_reason;

  ChannelPtr channel;
  std::mutex write_mu;
  std::uint64_t chan_msg_id = 1;       // handshake counter (per channel)
  bool stream_header_sent = false;
  std::atomic<bool> stream_recv_mode{false};
  std::atomic<bool> closed_flag{false};

  MappingInfo info() const {
    MappingInfo i;
    i.mapping_id = id;
    i.local_endpoint = local_ep;
    i.peer_component = peer_component;
    i.peer_endpoint = peer_endpoint;
    i.peer_address = peer_address;
    i.transport = transport;
    i.state = phase;
    i.close_reason = close_reason;
    i.peer_identities = peer_identities;
    return i;
  }
};

}  // namespace flux
