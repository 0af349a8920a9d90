// SPDX-License-Identifier: Apache-2.0
//
// Data plane: send/receive on source-sink mappings, request/response
// correlation, raw streaming, inbound queue management.
#include <algorithm>

#include "middleware_internal.hpp"

namespace flux {

namespace {

json wrap_reply(const std::string& request_id, const json* body) {
  json j;
  j["re"] = request_id;
  if (body != nullptr) j["body"] = *body;
  return j;
}

json wrap_reply_error(const std::string& request_id, std::string_view code) {
  json j;
  j["re"] = request_id;
  j["error"] = std::string(code);
  return j;
}

}  // namespace

void Middleware::enqueue_received(EndpointRec& ep, Received r) {
  if (ep.inbound.size() >= kInboundQueueLimit) {
    ep.inbound.pop_front();  // drop oldest
    ep.stats.overflow_drops++;
  }
  ep.inbound.push_back(std::move(r));
  ep.stats.delivered++;
  recv_cv_.notify_all();
}

void Middleware::fail_pending(EndpointRec& ep, const std::string& mapping_id, const Error& err) {
  (void)mapping_id;  // all pendings of the endpoint ride the closed mapping
  for (auto& [id, pending] : ep.pending) pending->finish(err);
  ep.pending.clear();
}

Result<DeliveryReport> Middleware::send(const std::string& endpoint, const json& payload) {
  EndpointRec* ep = nullptr;
  {
    std::lock_guard lk(mu_);
    auto it = endpoints_.find(endpoint);
    if (it == endpoints_.end()) return Error{Errc::unknown_endpoint, endpoint};
    ep = it->second.get();
    if (ep->desc.type != EndpointType::source)
      return Error{Errc::bad_args, "send() needs a source endpoint"};
  }

  // per-endpoint serialization keeps per-mapping delivery in msg_id order
  std::lock_guard send_lk(ep->send_mu);

  DeliveryReport report;
  std::vector<std::shared_ptr<MappingRec>> targets;
  bool pass;
  {
    std::lock_guard lk(mu_);
    auto v = validate(payload, *ep->desc.msg_schema);
    if (!v.ok()) {
      std::string detail;
      for (const auto& viol : v.violations) detail += (detail.empty() ? "" : ", ") + viol;
      return Error{Errc::schema_violation, detail};
    }
    ep->stats.sends++;
    report.msg_id = ep->next_msg_id++;
    pass = filters_pass(ep->send_filters, ep->send_rate_state, payload, steady_ms());
    if (!pass) ep->stats.filtered_drops++;
    for (auto& [id, rec] : mappings_) {
      if (rec->local_ep == endpoint && rec->phase == MappingPhase::established)
        targets.push_back(rec);
    }
  }

  const Envelope env = Envelope::make_data(report.msg_id, Status::data, payload);
  const std::string encoded = encode_envelope(env);
  for (auto& rec : targets) {
    DeliveryOutcome o;
    o.mapping_id = rec->id;
    if (!pass) {
      o.filtered = true;
    } else {
      std::lock_guard wl(rec->write_mu);
      auto r = rec->channel->send_frame(Frame{encoded});
      if (r) {
        o.delivered = true;
      } else {
        o.error = r.error().to_string();
      }
    }
    report.outcomes.push_back(std::move(o));
  }
  if (pass && !targets.empty()) {
    std::lock_guard lk(mu_);
    ep->stats.frames_out += report.delivered_count();
  }
  return report;
}

Result<DeliveryReport> Middleware::send_stream(const std::string& endpoint, std::string_view bytes) {
  EndpointRec* ep = nullptr;
  {
    std::lock_guard lk(mu_);
    auto it = endpoints_.find(endpoint);
    if (it == endpoints_.end()) return Error{Errc::unknown_endpoint, endpoint};
    ep = it->second.get();
    if (ep->desc.type != EndpointType::stream_source)
      return Error{Errc::bad_args, "send_stream() needs a stream_source endpoint"};
  }
  std::lock_guard send_lk(ep->send_mu);
  DeliveryReport report;
  std::vector<std::shared_ptr<MappingRec>> targets;
  {
    std::lock_guard lk(mu_);
    report.msg_id = ep->next_msg_id++;
    for (auto& [id, rec] : mappings_) {
      if (rec->local_ep == endpoint && rec->phase == MappingPhase::established)
        targets.push_back(rec);
    }
  }
  for (auto& rec : targets) {
    DeliveryOutcome o;
    o.mapping_id = rec->id;
    std::lock_guard wl(rec->write_mu);
    if (!rec->stream_header_sent) {
      // one status-15 header, then opaque frames
      Envelope header = Envelope::make_ctrl(rec->chan_msg_id++, Status::stream, json::object());
      if (auto r = rec->channel->send_frame(Frame{encode_envelope(header)}); !r) {
        o.error = r.error().to_string();
        report.outcomes.push_back(std::move(o));
        continue;
      }
      rec->stream_header_sent = true;
    }
    auto r = rec->channel->send_frame(Frame{std::string(bytes)});
    if (r) {
      o.delivered = true;
    } else {
      o.error = r.error().to_string();
    }
    report.outcomes.push_back(std::move(o));
  }
  return report;
}

Result<Received> Middleware::receive(const std::string& endpoint,
                                     std::chrono::milliseconds timeout) {
  std::unique_lock lk(mu_);
  auto it = endpoints_.find(endpoint);
  if (it == endpoints_.end()) return Error{Errc::unknown_endpoint, endpoint};
  EndpointRec* ep = it->second.get();
  if (!recv_cv_.wait_for(lk, timeout, [&] { return !ep->inbound.empty() || stopping_.load(); }))
    return Error{Errc::timeout, ""};
  if (ep->inbound.empty()) return Error{Errc::terminated, ""};
  Received r = std::move(ep->inbound.front());
  ep->inbound.pop_front();
  return r;
}

void Middleware::handle_data(const std::shared_ptr<MappingRec>& rec, Envelope& env) {
  std::lock_guard lk(mu_);
  if (rec->phase != MappingPhase::established) return;
  auto it = endpoints_.find(rec->local_ep);
  if (it == endpoints_.end()) return;
  EndpointRec& ep = *it->second;
  if (ep.desc.type != EndpointType::sink || !env.msg_json) {
    ep.stats.invalid_drops++;
    return;
  }
  // the receiver checks the message against the schema as well
  auto v = validate(*env.msg_json, *ep.desc.msg_schema);
  if (!v.ok()) {
    ep.stats.invalid_drops++;
    return;
  }
  if (!filters_pass(ep.recv_filters, ep.recv_rate_state, *env.msg_json, steady_ms())) {
    ep.stats.filtered_drops++;
    return;
  }
  Received r;
  r.payload = std::move(*env.msg_json);
  r.mapping_id = rec->id;
  r.msg_id = std::stoull(env.msg_id);
  enqueue_received(ep, std::move(r));
}

void Middleware::handle_request_frame(const std::shared_ptr<MappingRec>& rec, Envelope& env) {
  RequestHandler handler;
  StreamRequestHandler stream_handler;
  EndpointDescriptor desc;
  {
    std::lock_guard lk(mu_);
    if (rec->phase != MappingPhase::established) return;
    auto it = endpoints_.find(rec->local_ep);
    if (it == endpoints_.end()) return;
    EndpointRec& ep = *it->second;
    if (ep.desc.type != EndpointType::response && ep.desc.type != EndpointType::response_plus_server) {
      ep.stats.invalid_drops++;
      return;
    }
    desc = ep.desc;
    handler = ep.handler;
    stream_handler = ep.stream_handler;
  }
  auto reply = [&](Status s, json body) {
    std::uint64_t id;
    {
      std::lock_guard lk(mu_);
      auto it = endpoints_.find(rec->local_ep);
      id = it == endpoints_.end() ? 0 : it->second->next_msg_id++;
    }
    (void)send_envelope(rec, Envelope::make_data(id, s, std::move(body)));
  };

  if (!env.msg_json) {
    reply(Status::response_final, wrap_reply_error(env.msg_id, "bad-args"));
    return;
  }
  {
    auto v = validate(*env.msg_json, *desc.msg_schema);
    if (!v.ok()) {
      reply(Status::response_final, wrap_reply_error(env.msg_id, "schema-violation"));
      return;
    }
  }

  if (desc.type == EndpointType::response) {
    if (!handler) {
      reply(Status::response_final, wrap_reply_error(env.msg_id, "no-handler"));
      return;
    }
    json body = handler(*env.msg_json);
    if (!validate(body, *desc.reply_schema).ok()) {
      reply(Status::response_final, wrap_reply_error(env.msg_id, "schema-violation"));
      return;
    }
    reply(Status::response_final, wrap_reply(env.msg_id, &body));
    return;
  }

  // response+: zero or more RESPONSE frames, then a bare FINAL
  if (!stream_handler) {
    reply(Status::response_final, wrap_reply_error(env.msg_id, "no-handler"));
    return;
  }
  bool emit_failed = false;
  stream_handler(*env.msg_json, [&](const json& body) {
    if (emit_failed) return;
    if (!validate(body, *desc.reply_schema).ok()) {
      emit_failed = true;
      return;
    }
    reply(Status::response, wrap_reply(env.msg_id, &body));
  });
  if (emit_failed) {
    reply(Status::response_final, wrap_reply_error(env.msg_id, "schema-violation"));
  } else {
    reply(Status::response_final, wrap_reply(env.msg_id, nullptr));
  }
}

void Middleware::handle_response_frame(const std::shared_ptr<MappingRec>& rec, Envelope& env) {
  if (!env.msg_json || !env.msg_json->contains("re")) return;
  const std::string re = (*env.msg_json)["re"].get<std::string>();
  std::shared_ptr<PendingRequest> pending;
  {
    std::lock_guard lk(mu_);
    auto it = endpoints_.find(rec->local_ep);
    if (it == endpoints_.end()) return;
    auto pit = it->second->pending.find(re);
    if (pit == it->second->pending.end()) return;
    pending = pit->second;
    if (env.status == Status::response_final) it->second->pending.erase(pit);
  }
  if (env.msg_json->contains("error")) {
    auto code = errc_from_name((*env.msg_json)["error"].get<std::string>());
    pending->finish(Error{code.value_or(Errc::peer_closed), "peer reported error"});
    return;
  }
  {
    std::lock_guard plk(pending->mu);
    if (env.msg_json->contains("body")) pending->bodies.push_back((*env.msg_json)["body"]);
    if (env.status == Status::response_final) pending->done = true;
  }
  if (env.status == Status::response_final) pending->cv.notify_all();
}

Result<std::vector<json>> Middleware::request_impl(const std::string& endpoint, const json& payload,
                                                   std::chrono::milliseconds timeout, Status status,
                                                   const std::string& mapping_id) {
  std::shared_ptr<MappingRec> target;
  auto pending = std::make_shared<PendingRequest>();
  std::uint64_t msg_id;
  {
    std::lock_guard lk(mu_);
    auto it = endpoints_.find(endpoint);
    if (it == endpoints_.end()) return Error{Errc::unknown_endpoint, endpoint};
    EndpointRec& ep = *it->second;
    const bool control = status == Status::control_request;
    if (!control && ep.desc.type != EndpointType::request &&
        ep.desc.type != EndpointType::response_plus_client)
      return Error{Errc::bad_args, "request() needs a request-kind endpoint"};
    if (!control) {
      auto v = validate(payload, *ep.desc.msg_schema);
      if (!v.ok()) {
        std::string detail;
        for (const auto& viol : v.violations) detail += (detail.empty() ? "" : ", ") + viol;
        return Error{Errc::schema_violation, detail};
      }
    }
    for (auto& [id, rec] : mappings_) {
      if (rec->local_ep != endpoint || rec->phase != MappingPhase::established) continue;
      if (!mapping_id.empty() && rec->id != mapping_id) continue;
      target = rec;
      break;
    }
    if (!target) return Error{Errc::peer_closed, "endpoint has no established mapping"};
    msg_id = ep.next_msg_id++;
    ep.pending[std::to_string(msg_id)] = pending;
  }

  const Envelope env = Envelope::make_data(msg_id, status, payload);
  if (auto r = send_envelope(target, env); !r) {
    std::lock_guard lk(mu_);
    endpoints_[endpoint]->pending.erase(std::to_string(msg_id));
    return Error{Errc::peer_closed, r.error().to_string()};
  }

  std::unique_lock plk(pending->mu);
  const bool finished = pending->cv.wait_for(plk, timeout, [&] { return pending->done; });
  if (!finished) {
    plk.unlock();
    std::lock_guard lk(mu_);
    auto it = endpoints_.find(endpoint);
    if (it != endpoints_.end()) it->second->pending.erase(std::to_string(msg_id));
    return Error{Errc::timeout, "no response within deadline"};
  }
  if (pending->err) return *pending->err;
  return pending->bodies;
}

Result<json> Middleware::request(const std::string& endpoint, const json& payload,
                                 std::chrono::milliseconds timeout) {
  auto bodies = request_impl(endpoint, payload, timeout, Status::request);
  if (!bodies) return bodies.error();
  if (bodies.value().empty()) return Error{Errc::peer_closed, "empty response"};
  return bodies.value().back();
}

Result<std::vector<json>> Middleware::request_all(const std::string& endpoint, const json& payload,
                                                  std::chrono::milliseconds timeout) {
  return request_impl(endpoint, payload, timeout, Status::request);
}

}  // namespace flux
