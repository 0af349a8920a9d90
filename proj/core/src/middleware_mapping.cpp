// SPDX-License-Identifier: Apache-2.0
//
// Mapping lifecycle: candidate selection, the handshake state machine
// (HELLO -> AUTH -> MAP_REQUEST -> MAP_ACCEPT/REJECT), the per-channel
// reader loop and mapping teardown.
#include <algorithm>

#include "middleware_internal.hpp"

namespace flux {

namespace {

constexpr std::chrono::milliseconds kHandshakeStepTimeout{3000};
constexpr std::chrono::milliseconds kReaderTick{200};

Errc reject_reason_to_errc(const std::string& reason) {
  if (reason == "acl-denied") return Errc::acl_denied_remote;
  auto c = errc_from_name(reason);
  if (!c) return Errc::peer_closed;
  if (*c == Errc::acl_denied_local || *c == Errc::denied) return Errc::acl_denied_remote;
  return *c;
}

}  // namespace

// Candidate remote endpoints for mapping `local` against `peer`, honoring the
// pairing table, the selector and schema equality. `why` explains an empty
// result: schema_mismatch when pairing+selector matched but schemas differ,
// unknown_endpoint otherwise.
std::vector<const EndpointDescriptor*> Middleware::select_candidates(
    const EndpointDescriptor& local, const Manifest& peer, const Query& selector,
    Error& why) const {
  std::vector<const EndpointDescriptor*> out;
  bool saw_pairing_match = false;
  for (const auto& remote : peer.endpoints) {
    if (!endpoint_types_pair(local.type, remote.type)) continue;

    bool selected = true;
    for (const auto& c : selector.clauses) {
      bool holds = true;
      if (c.path == "ep_name") {
        holds = clause_holds_on_value(c, json{{"ep_name", remote.name}});
      } else if (c.path == "ep_type") {
        holds = clause_holds_on_value(c, json{{"ep_type", std::string(endpoint_type_name(remote.type))}});
      } else if (c.path == "schema_hash") {
        holds = remote.msg_schema && clause_holds_on_value(c, json{{"schema_hash", remote.msg_schema->hash()}});
      } else {
        auto m = manifest_matches(peer, Query{{c}});
        holds = m.ok() && m.value();
      }
      if (!holds) {
        selected = false;
        break;
      }
    }
    if (!selected) continue;
    saw_pairing_match = true;

    if (!endpoint_type_is_stream(local.type)) {
      if (!remote.msg_schema || !schemas_compatible(*local.msg_schema, *remote.msg_schema)) continue;
      if (endpoint_type_is_request_kind(local.type)) {
        if (!remote.reply_schema || !schemas_compatible(*local.reply_schema, *remote.reply_schema))
          continue;
      }
    }
    out.push_back(&remote);
  }
  std::sort(out.begin(), out.end(),
            [](const auto* a, const auto* b) { return a->name < b->name; });
  if (out.empty())
    why = saw_pairing_match
              ? Error{Errc::schema_mismatch, "no schema-compatible endpoint on " + peer.component_id}
              : Error{Errc::unknown_endpoint, "no matching endpoint on " + peer.component_id};
  return out;
}

Result<MapReport> Middleware::map(const std::string& endpoint, const Manifest& peer,
                                  const Query& selector) {
  EndpointDescriptor local;
  std::string module, address;
  {
    std::lock_guard lk(mu_);
    auto it = endpoints_.find(endpoint);
    if (it == endpoints_.end()) return Error{Errc::unknown_endpoint, endpoint};
    local = it->second->desc;

    // transport negotiation: first active module the peer also advertises
    for (const auto& m : active_transports_) {
      for (const auto& [pm, paddr] : peer.addresses) {
        if (pm == m) {
          module = m;
          address = paddr;
          break;
        }
      }
      if (!module.empty()) break;
    }
  }
  if (module.empty())
    return Error{Errc::no_shared_transport, "no transport shared with " + peer.component_id};

  {
    // access-module negotiation is decidable from the manifest before connecting
    std::lock_guard lk(mu_);
    bool shared = false;
    for (const auto& m : active_access_) {
      if (std::find(peer.access_modules.begin(), peer.access_modules.end(), m) !=
          peer.access_modules.end()) {
        shared = true;
        break;
      }
    }
    if (!shared)
      return Error{Errc::no_shared_access_module,
                   "no access module shared with " + peer.component_id};
  }

  Error why{Errc::unknown_endpoint, "no matching endpoint"};
  auto candidates = select_candidates(local, peer, selector, why);
  if (candidates.empty()) return why;
  if (endpoint_type_is_request_kind(local.type)) candidates.resize(1);

  MapReport report;
  for (const auto* cand : candidates) {
    TransportModule* transport = nullptr;
    {
      std::lock_guard lk(mu_);
      auto it = transports_.find(module);
      transport = it == transports_.end() ? nullptr : it->second.get();
    }
    if (!transport) {
      report.failures.emplace_back(Errc::no_shared_transport, module);
      continue;
    }
    auto ch = transport->connect(address);
    if (!ch) {
      report.failures.emplace_back(Errc::peer_unreachable, ch.error().to_string());
      continue;
    }
    auto rec = initiate_handshake(std::move(ch).value(), endpoint, cand->name, Query{});
    if (rec) {
      report.established.push_back(rec.value()->info());
    } else {
      report.failures.push_back(rec.error());
    }
  }
  if (report.established.empty() && !report.failures.empty() && candidates.size() == 1)
    return report.failures.front();
  return report;
}

Result<MapReport> Middleware::map_direct(const std::string& endpoint, const std::string& module,
                                         const std::string& address, const Query& selector) {
  TransportModule* transport = nullptr;
  {
    std::lock_guard lk(mu_);
    if (!endpoints_.count(endpoint)) return Error{Errc::unknown_endpoint, endpoint};
    if (std::find(active_transports_.begin(), active_transports_.end(), module) ==
        active_transports_.end())
      return Error{Errc::no_shared_transport, module + " is not active locally"};
    transport = transports_.at(module).get();
  }
  auto ch = transport->connect(address);
  if (!ch) return Error{Errc::peer_unreachable, ch.error().to_string()};
  auto rec = initiate_handshake(std::move(ch).value(), endpoint, "", selector);
  if (!rec) return rec.error();
  MapReport report;
  report.established.push_back(rec.value()->info());
  return report;
}

Result<void> Middleware::send_envelope(const std::shared_ptr<MappingRec>& rec, const Envelope& env) {
  std::lock_guard lk(rec->write_mu);
  return rec->channel->send_frame(Frame{encode_envelope(env)});
}

// Waits for a frame with one of the expected statuses. Unexpected data
// frames abort the handshake. On unreliable transports the last outbound
// frame is resent up to kUdpHandshakeRetries times.
Result<Envelope> Middleware::await_status(const std::shared_ptr<MappingRec>& rec,
                                          std::initializer_list<Status> expected,
                                          std::chrono::milliseconds timeout, const Envelope* resend) {
  bool reliable = true;
  {
    std::lock_guard lk(mu_);
    auto it = transports_.find(rec->transport);
    if (it != transports_.end()) reliable = it->second->reliable();
  }
  int attempts_left = reliable ? 1 : 1 + kUdpHandshakeRetries;
  const auto step = reliable ? timeout : kUdpHandshakeTimeout;
  while (attempts_left-- > 0) {
    const auto deadline = std::chrono::steady_clock::now() + step;
    for (;;) {
      const auto now = std::chrono::steady_clock::now();
      if (now >= deadline) break;
      auto f = rec->channel->recv_frame(
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now));
      if (!f) {
        if (f.error().code == Errc::timeout) break;
        return f.error();
      }
      auto env = decode_envelope(f.value().body);
      if (!env) continue;  // garbage during handshake is dropped
      for (Status s : expected) {
        if (env.value().status == s) return env;
      }
      if (env.value().status == Status::unmap) {
        const std::string reason = env.value().ctrl && env.value().ctrl->contains("reason")
                                       ? (*env.value().ctrl)["reason"].get<std::string>()
                                       : "peer-closed";
        return Error{reject_reason_to_errc(reason), "peer aborted handshake"};
      }
      // duplicate of an earlier handshake frame (possible on udp): ignore
    }
    if (attempts_left > 0 && resend != nullptr) {
      if (auto r = send_envelope(rec, *resend); !r) return r.error();
    }
  }
  return Error{Errc::peer_unreachable, "handshake timeout"};
}

// One mutual challenge-response attempt per shared module until a module
// yields at least one identity in each direction.
std::vector<Identity> Middleware::run_auth_initiator(const std::shared_ptr<MappingRec>& rec,
                                                     const std::vector<std::string>& modules) {
  for (const auto& module : modules) {
    const std::string nonce_i = fresh_nonce();
    json challenge;
    challenge["module"] = module;
    challenge["nonce"] = nonce_i;
    Envelope ch_env = Envelope::make_ctrl(rec->chan_msg_id++, Status::auth_challenge, challenge);
    if (!send_envelope(rec, ch_env)) return {};

    auto resp = await_status(rec, {Status::auth_response}, kHandshakeStepTimeout, &ch_env);
    if (!resp) return {};
    const json& body = *resp.value().ctrl;
    if (body.contains("error") || body["module"] != module) continue;

    // verify the responder's proofs against our store
    std::vector<Identity> peer_ids;
    if (body.contains("entries") && body["entries"].is_array()) {
      for (const auto& e : body["entries"]) {
        if (!e.is_object() || !e.contains("principal") || !e.contains("proof")) continue;
        auto cred = access_.credential_by_principal(module, e["principal"].get<std::string>());
        if (cred && auth_verify(*cred, nonce_i, e["proof"].get<std::string>()))
          peer_ids.push_back(Identity{module, cred->principal()});
      }
    }

    json result;
    result["module"] = module;
    result["ok"] = !peer_ids.empty();
    if (!peer_ids.empty() && body.contains("nonce")) {
      const std::string nonce_a = body["nonce"].get<std::string>();
      json entries = json::array();
      for (const auto& cred : access_.credentials_for_module(module)) {
        json e;
        e["principal"] = cred.principal();
        e["proof"] = auth_proof(cred, nonce_a);
        entries.push_back(std::move(e));
      }
      result["entries"] = std::move(entries);
    }
    Envelope res_env = Envelope::make_ctrl(rec->chan_msg_id++, Status::auth_result, result);
    if (!send_envelope(rec, res_env)) return {};
    if (peer_ids.empty()) continue;

    auto final = await_status(rec, {Status::auth_result}, kHandshakeStepTimeout, &res_env);
    if (!final) return {};
    const json& fin = *final.value().ctrl;
    if (fin.contains("ok") && fin["ok"].is_boolean() && fin["ok"].get<bool>()) return peer_ids;
  }
  return {};
}

// Responder half of the auth phase; returns true once a module succeeded and
// leaves the verified initiator identities on the mapping record.
bool Middleware::run_auth_responder(const std::shared_ptr<MappingRec>& rec,
                                    std::chrono::milliseconds timeout) {
  Envelope last_reply;
  bool have_reply = false;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::string pending_module, my_nonce;
  while (std::chrono::steady_clock::now() < deadline) {
    auto f = rec->channel->recv_frame(kReaderTick);
    if (!f) {
      if (f.error().code == Errc::timeout) continue;
      return false;
    }
    auto env_r = decode_envelope(f.value().body);
    if (!env_r) continue;
    Envelope env = std::move(env_r).value();

    if (env.status == Status::auth_challenge && env.ctrl) {
      const json& body = *env.ctrl;
      if (!body.contains("module") || !body.contains("nonce")) continue;
      const std::string module = body["module"].get<std::string>();
      const std::string nonce_i = body["nonce"].get<std::string>();
      bool active;
      {
        std::lock_guard lk(mu_);
        active = std::find(active_access_.begin(), active_access_.end(), module) !=
                 active_access_.end();
      }
      json resp;
      resp["module"] = module;
      const auto creds = access_.credentials_for_module(module);
      if (!active || creds.empty()) {
        resp["error"] = "no-credential";
        pending_module.clear();
      } else {
        my_nonce = fresh_nonce();
        pending_module = module;
        resp["nonce"] = my_nonce;
        json entries = json::array();
        for (const auto& cred : creds) {
          json e;
          e["principal"] = cred.principal();
          e["proof"] = auth_proof(cred, nonce_i);
          entries.push_back(std::move(e));
        }
        resp["entries"] = std::move(entries);
      }
      last_reply = Envelope::make_ctrl(rec->chan_msg_id++, Status::auth_response, resp);
      have_reply = true;
      if (!send_envelope(rec, last_reply)) return false;
      continue;
    }

    if (env.status == Status::auth_result && env.ctrl) {
      const json& body = *env.ctrl;
      if (pending_module.empty() || !body.contains("ok")) continue;
      if (!body["ok"].is_boolean() || !body["ok"].get<bool>()) {
        pending_module.clear();
        continue;  // initiator moves to its next module
      }
      std::vector<Identity> ids;
      if (body.contains("entries") && body["entries"].is_array()) {
        for (const auto& e : body["entries"]) {
          if (!e.is_object() || !e.contains("principal") || !e.contains("proof")) continue;
          auto cred = access_.credential_by_principal(pending_module, e["principal"].get<std::string>());
          if (cred && auth_verify(*cred, my_nonce, e["proof"].get<std::string>()))
            ids.push_back(Identity{pending_module, cred->principal()});
        }
      }
      json fin;
      fin["module"] = pending_module;
      fin["ok"] = !ids.empty();
      last_reply = Envelope::make_ctrl(rec->chan_msg_id++, Status::auth_result, fin);
      have_reply = true;
      if (!send_envelope(rec, last_reply)) return false;
      if (!ids.empty()) {
        rec->peer_identities = std::move(ids);
        return true;
      }
      pending_module.clear();
      continue;
    }

    if (env.status == Status::unmap) return false;
    if (env.status == Status::hello && have_reply) {
      // duplicate HELLO on a lossy transport: resend nothing here; the
      // initiator retries its challenge on timeout
      continue;
    }
  }
  return false;
}

Result<std::shared_ptr<Middleware::MappingRec>> Middleware::initiate_handshake(
    ChannelPtr ch, const std::string& local_ep, const std::string& target_ep,
    const Query& selector) {
  auto rec = std::make_shared<MappingRec>();
  {
    std::lock_guard lk(mu_);
    rec->id = "m" + std::to_string(next_mapping_seq_++);
  }
  rec->local_ep = local_ep;
  rec->peer_address = ch->peer_address();
  rec->transport = ch->transport_id();
  rec->channel = std::move(ch);
  rec->phase = MappingPhase::hello_sent;

  auto abort = [&](Errc code, const std::string& detail,
                   const std::string& wire_reason) -> Result<std::shared_ptr<MappingRec>> {
    json body;
    body["reason"] = wire_reason;
    (void)send_envelope(rec, Envelope::make_ctrl(rec->chan_msg_id++, Status::unmap, body));
    rec->channel->close();
    return Error{code, detail};
  };

  // HELLO exchange
  json hello;
  hello["manifest"] = manifest().to_json();
  Envelope hello_env = Envelope::make_ctrl(rec->chan_msg_id++, Status::hello, hello);
  if (auto r = send_envelope(rec, hello_env); !r)
    return Error{Errc::peer_unreachable, r.error().to_string()};
  auto peer_hello = await_status(rec, {Status::hello}, kHandshakeStepTimeout, &hello_env);
  if (!peer_hello) {
    rec->channel->close();
    return peer_hello.error();
  }
  if (!peer_hello.value().ctrl || !peer_hello.value().ctrl->contains("manifest"))
    return abort(Errc::peer_closed, "malformed HELLO", "bad-hello");
  auto peer_manifest = Manifest::from_json((*peer_hello.value().ctrl)["manifest"]);
  if (!peer_manifest) return abort(Errc::peer_closed, "malformed peer manifest", "bad-hello");
  rec->peer_manifest = std::move(peer_manifest).value();
  rec->peer_component = rec->peer_manifest.component_id;

  // resolve the target endpoint if the caller gave only a selector
  EndpointDescriptor local;
  {
    std::lock_guard lk(mu_);
    auto it = endpoints_.find(local_ep);
    if (it == endpoints_.end()) return abort(Errc::unknown_endpoint, local_ep, "unknown-endpoint");
    local = it->second->desc;
  }
  std::string target = target_ep;
  if (target.empty()) {
    Error why{Errc::unknown_endpoint, ""};
    auto candidates = select_candidates(local, rec->peer_manifest, selector, why);
    if (candidates.empty()) return abort(why.code, why.detail, std::string(errc_name(why.code)));
    target = candidates.front()->name;
  }
  rec->peer_endpoint = target;

  // shared access modules, in local activation order
  std::vector<std::string> shared;
  {
    std::lock_guard lk(mu_);
    for (const auto& m : active_access_) {
      if (std::find(rec->peer_manifest.access_modules.begin(), rec->peer_manifest.access_modules.end(),
                    m) != rec->peer_manifest.access_modules.end())
        shared.push_back(m);
    }
  }
  if (shared.empty())
    return abort(Errc::no_shared_access_module, "peer " + rec->peer_component,
                 "no-shared-access-module");

  rec->phase = MappingPhase::authenticating;
  auto identities = run_auth_initiator(rec, shared);
  if (identities.empty()) return abort(Errc::auth_failed, "no mutual identity", "auth-failed");
  rec->peer_identities = std::move(identities);

  // schema negotiation + remote authorization
  rec->phase = MappingPhase::negotiating;
  json map_req;
  map_req["endpoint"] = local.to_json();
  map_req["target"] = target;
  Envelope req_env = Envelope::make_ctrl(rec->chan_msg_id++, Status::map_request, map_req);
  if (auto r = send_envelope(rec, req_env); !r)
    return Error{Errc::peer_unreachable, r.error().to_string()};
  auto verdict = await_status(rec, {Status::map_accept, Status::map_reject}, kHandshakeStepTimeout,
                              &req_env);
  if (!verdict) {
    rec->channel->close();
    return verdict.error();
  }
  if (verdict.value().status == Status::map_reject) {
    std::string reason = "map-reject";
    if (verdict.value().ctrl && verdict.value().ctrl->contains("reason"))
      reason = (*verdict.value().ctrl)["reason"].get<std::string>();
    rec->channel->close();
    return Error{reject_reason_to_errc(reason), "peer rejected: " + reason};
  }

  // local authorization: does the peer get to map to this endpoint?
  auto decision = access_.acl_check(local_ep, "map", rec->peer_identities);
  if (!decision.allowed)
    return abort(Errc::acl_denied_local, decision.reason, "acl-denied");

  {
    std::lock_guard lk(mu_);
    if (stopping_.load()) return Error{Errc::terminated, ""};
    rec->phase = MappingPhase::established;
    mappings_[rec->id] = rec;
  }
  add_worker(std::thread([this, rec] { reader_loop(rec); }));
  return rec;
}

// Acceptor side: runs the entire inbound handshake on the connection thread,
// then stays as the mapping's reader loop.
void Middleware::accept_connection(ChannelPtr ch) {
  auto rec = std::make_shared<MappingRec>();
  {
    std::lock_guard lk(mu_);
    rec->id = "m" + std::to_string(next_mapping_seq_++);
  }
  rec->peer_address = ch->peer_address();
  rec->transport = ch->transport_id();
  rec->channel = std::move(ch);
  rec->phase = MappingPhase::hello_sent;

  auto reject_close = [&](const char* reason) {
    json body;
    body["reason"] = reason;
    (void)send_envelope(rec, Envelope::make_ctrl(rec->chan_msg_id++, Status::unmap, body));
    rec->channel->close();
  };

  auto hello = await_status(rec, {Status::hello}, kHandshakeStepTimeout, nullptr);
  if (!hello) {
    rec->channel->close();
    return;
  }
  if (!hello.value().ctrl || !hello.value().ctrl->contains("manifest")) {
    reject_close("bad-hello");
    return;
  }
  auto peer_manifest = Manifest::from_json((*hello.value().ctrl)["manifest"]);
  if (!peer_manifest) {
    reject_close("bad-hello");
    return;
  }
  rec->peer_manifest = std::move(peer_manifest).value();
  rec->peer_component = rec->peer_manifest.component_id;

  json hello_reply;
  hello_reply["manifest"] = manifest().to_json();
  if (!send_envelope(rec, Envelope::make_ctrl(rec->chan_msg_id++, Status::hello, hello_reply)))
    return;

  rec->phase = MappingPhase::authenticating;
  if (!run_auth_responder(rec, std::chrono::milliseconds(10000))) {
    rec->channel->close();
    return;
  }

  rec->phase = MappingPhase::negotiating;
  auto req = await_status(rec, {Status::map_request}, kHandshakeStepTimeout, nullptr);
  if (!req) {
    rec->channel->close();
    return;
  }
  const json& body = *req.value().ctrl;
  if (!body.contains("endpoint") || !body.contains("target")) {
    reject_close("bad-args");
    return;
  }
  auto remote_desc = EndpointDescriptor::from_json(body["endpoint"]);
  if (!remote_desc) {
    reject_close("bad-args");
    return;
  }
  const std::string target = body["target"].get<std::string>();

  EndpointDescriptor local;
  {
    std::lock_guard lk(mu_);
    auto it = endpoints_.find(target);
    if (it == endpoints_.end()) {
      // unlocked reject below
    } else {
      local = it->second->desc;
    }
  }
  if (local.name.empty()) {
    reject_close("unknown-endpoint");
    return;
  }
  if (!endpoint_types_pair(local.type, remote_desc.value().type)) {
    reject_close("schema-mismatch");
    return;
  }
  if (!endpoint_type_is_stream(local.type)) {
    const auto& remote = remote_desc.value();
    if (!remote.msg_schema || !schemas_compatible(*local.msg_schema, *remote.msg_schema)) {
      reject_close("schema-mismatch");
      return;
    }
    if (endpoint_type_is_request_kind(local.type) &&
        (!remote.reply_schema || !schemas_compatible(*local.reply_schema, *remote.reply_schema))) {
      reject_close("schema-mismatch");
      return;
    }
  }
  auto decision = access_.acl_check(target, "map", rec->peer_identities);
  if (!decision.allowed) {
    reject_close("acl-denied");
    return;
  }

  rec->local_ep = target;
  rec->peer_endpoint = remote_desc.value().name;
  json accept_body;
  accept_body["endpoint"] = target;
  if (!send_envelope(rec, Envelope::make_ctrl(rec->chan_msg_id++, Status::map_accept, accept_body)))
    return;

  {
    std::lock_guard lk(mu_);
    if (stopping_.load()) {
      rec->channel->close();
      return;
    }
    rec->phase = MappingPhase::established;
    mappings_[rec->id] = rec;
  }
  reader_loop(rec);
}

void Middleware::reader_loop(std::shared_ptr<MappingRec> rec) {
  while (!stopping_.load() && !rec->closed_flag.load()) {
    auto f = rec->channel->recv_frame(kReaderTick);
    if (!f) {
      if (f.error().code == Errc::timeout) continue;
      close_mapping(rec, "transport-lost", false);
      return;
    }
    if (rec->stream_recv_mode.load()) {
      // raw stream frame: no envelope
      Received r;
      r.is_stream = true;
      r.bytes = std::move(f.value().body);
      r.mapping_id = rec->id;
      std::lock_guard lk(mu_);
      auto it = endpoints_.find(rec->local_ep);
      if (it != endpoints_.end()) enqueue_received(*it->second, std::move(r));
      continue;
    }
    auto env = decode_envelope(f.value().body);
    if (!env) {
      std::lock_guard lk(mu_);
      auto it = endpoints_.find(rec->local_ep);
      if (it != endpoints_.end()) it->second->stats.invalid_drops++;
      continue;
    }
    dispatch_frame(rec, std::move(env).value());
    if (rec->closed_flag.load()) return;
  }
}

void Middleware::dispatch_frame(const std::shared_ptr<MappingRec>& rec, Envelope env) {
  switch (env.status) {
    case Status::unmap: {
      std::string reason = "peer-closed";
      if (env.ctrl && env.ctrl->contains("reason")) reason = (*env.ctrl)["reason"].get<std::string>();
      close_mapping(rec, reason, false);
      return;
    }
    case Status::data:
      handle_data(rec, env);
      return;
    case Status::stream:
      rec->stream_recv_mode.store(true);
      return;
    case Status::request:
      handle_request_frame(rec, env);
      return;
    case Status::response:
    case Status::response_final:
      handle_response_frame(rec, env);
      return;
    case Status::control_request:
    case Status::control_response:
      handle_control_frame(rec, env);
      return;
    default:
      // late/duplicate handshake frames on an established mapping: ignore
      return;
  }
}

void Middleware::close_mapping(const std::shared_ptr<MappingRec>& rec, const std::string& reason,
                               bool send_unmap) {
  if (rec->closed_flag.exchange(true)) return;
  if (send_unmap) {
    json body;
    body["reason"] = reason;
    (void)send_envelope(rec, Envelope::make_ctrl(rec->chan_msg_id++, Status::unmap, body));
  }
  rec->channel->close();
  {
    std::lock_guard lk(mu_);
    rec->phase = MappingPhase::closed;
    rec->close_reason = reason;
    auto it = endpoints_.find(rec->local_ep);
    if (it != endpoints_.end()) fail_pending(*it->second, rec->id, Error{Errc::peer_closed, reason});
  }
  recv_cv_.notify_all();
}

bool Middleware::mapping_matches(const MappingRec& rec, const Query& selector) const {
  for (const auto& c : selector.clauses) {
    bool holds;
    if (c.path == "ep_name") {
      holds = clause_holds_on_value(c, json{{"ep_name", rec.peer_endpoint}});
    } else if (c.path == "component_id") {
      holds = clause_holds_on_value(c, json{{"component_id", rec.peer_component}});
    } else {
      auto m = manifest_matches(rec.peer_manifest, Query{{c}});
      holds = m.ok() && m.value();
    }
    if (!holds) return false;
  }
  return true;
}

std::size_t Middleware::unmap(const std::string& endpoint, const Query& peer_selector) {
  std::vector<std::shared_ptr<MappingRec>> doomed;
  {
    std::lock_guard lk(mu_);
    for (auto& [id, rec] : mappings_) {
      if (rec->phase != MappingPhase::established) continue;
      if (!endpoint.empty() && rec->local_ep != endpoint) continue;
      if (!mapping_matches(*rec, peer_selector)) continue;
      doomed.push_back(rec);
    }
  }
  for (auto& rec : doomed) close_mapping(rec, "unmapped", true);
  return doomed.size();
}

std::vector<MappingInfo> Middleware::mappings(const std::string& endpoint) const {
  std::lock_guard lk(mu_);
  std::vector<MappingInfo> out;
  for (const auto& [id, rec] : mappings_) {
    if (!endpoint.empty() && rec->local_ep != endpoint) continue;
    out.push_back(rec->info());
  }
  return out;
}

std::vector<std::string> Middleware::reexamine_mappings() {
  std::vector<std::shared_ptr<MappingRec>> doomed;
  {
    std::lock_guard lk(mu_);
    for (auto& [id, rec] : mappings_) {
      if (rec->phase != MappingPhase::established) continue;
      // identities must still be backed by a local credential to count
      std::vector<Identity> backed;
      for (const auto& ident : rec->peer_identities) {
        if (access_.credential_by_principal(ident.module, ident.principal))
          backed.push_back(ident);
      }
      auto decision = access_.acl_check(rec->local_ep, "map", backed);
      if (decision.allowed) {
        rec->peer_identities = std::move(backed);
      } else {
        doomed.push_back(rec);
      }
    }
  }
  std::vector<std::string> closed;
  for (auto& rec : doomed) {
    close_mapping(rec, "revoked", true);
    closed.push_back(rec->id);
  }
  return closed;
}

}  // namespace flux
