// SPDX-License-Identifier: Apache-2.0
//
// Control plane: the built-in control endpoint, verb dispatch with per-verb
// authorization, the issuer side of remap/divert, and the discovery client.
#include <algorithm>

#include "flux/rdc_protocol.hpp"
#include "middleware_internal.hpp"

namespace flux {

namespace {

constexpr std::chrono::milliseconds kControlTimeout{8000};
constexpr std::chrono::milliseconds kRdcCallTimeout{5000};

std::string caller_label(const std::vector<Identity>& caller) {
  std::string s;
  for (const auto& id : caller) s += (s.empty() ? "" : ",") + id.module + ":" + id.principal;
  return s.empty() ? "anonymous" : s;
}

Result<std::string> arg_string(const json& args, const char* key) {
  if (!args.contains(key) || !args[key].is_string())
    return Error{Errc::bad_args, std::string("missing string arg \"") + key + "\""};
  return args[key].get<std::string>();
}

}  // namespace

void Middleware::handle_control_frame(const std::shared_ptr<MappingRec>& rec, Envelope& env) {
  if (env.status == Status::control_response) {
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
      it->second->pending.erase(pit);
    }
    {
      std::lock_guard plk(pending->mu);
      if (env.msg_json->contains("body")) pending->bodies.push_back((*env.msg_json)["body"]);
      pending->done = true;
    }
    pending->cv.notify_all();
    return;
  }

  // control_request: handled by the core, never by application logic
  if (rec->local_ep != kControlEndpoint || rec->phase != MappingPhase::established) return;
  ControlResponse resp;
  if (!env.msg_json) {
    resp = ControlResponse::failure(Errc::bad_args, "control request carries no command");
  } else {
    auto cmd = ControlCommand::from_json(*env.msg_json);
    resp = cmd ? handle_control(cmd.value(), rec->peer_identities)
               : ControlResponse::failure(cmd.error());
  }
  std::uint64_t id;
  {
    std::lock_guard lk(mu_);
    auto it = endpoints_.find(rec->local_ep);
    id = it == endpoints_.end() ? 0 : it->second->next_msg_id++;
  }
  json body;
  body["re"] = env.msg_id;
  body["body"] = resp.to_json();
  (void)send_envelope(rec, Envelope::make_data(id, Status::control_response, std::move(body)));
}

ControlResponse Middleware::handle_control(const ControlCommand& cmd,
                                           const std::vector<Identity>& caller) {
  const std::string operation{control_verb_operation(cmd.verb)};
  std::string target_ep = "*";
  if (cmd.args.contains("endpoint") && cmd.args["endpoint"].is_string())
    target_ep = cmd.args["endpoint"].get<std::string>();

  auto decision = access_.acl_check(target_ep, operation, caller);
  if (!decision.allowed) return ControlResponse::deny(decision.reason);
  return dispatch_control(cmd, caller);
}

ControlResponse Middleware::dispatch_control(const ControlCommand& cmd,
                                             const std::vector<Identity>& caller) {
  const json& args = cmd.args;
  const std::string actor = caller_label(caller);

  switch (cmd.verb) {
    case ControlVerb::get_manifest: {
      json r;
      r["manifest"] = manifest().to_json();
      return ControlResponse::success(std::move(r));
    }

    case ControlVerb::manifest_add: {
      auto key = arg_string(args, "key");
      auto value = arg_string(args, "value");
      if (!key || !value) return ControlResponse::failure(Errc::bad_args, "need key and value");
      manifest_add(key.value(), value.value());
      json r;
      r["manifest"] = manifest().to_json();
      return ControlResponse::success(std::move(r));
    }

    case ControlVerb::map_to: {
      auto endpoint = arg_string(args, "endpoint");
      if (!endpoint) return ControlResponse::failure(endpoint.error());
      Query ep_selector;
      if (args.contains("ep_selector")) {
        auto q = Query::from_json(args["ep_selector"]);
        if (!q) return ControlResponse::failure(q.error());
        ep_selector = std::move(q).value();
      }
      Result<MapReport> report = Error{Errc::bad_args, "need target or address"};
      if (args.contains("address")) {
        const std::string module =
            args.contains("module") && args["module"].is_string() ? args["module"].get<std::string>() : "tcp";
        report = map_direct(endpoint.value(), module, args["address"].get<std::string>(), ep_selector);
      } else if (args.contains("target")) {
        auto q = selector_to_query(args["target"].get<std::string>());
        if (!q) return ControlResponse::failure(q.error());
        auto manifests = rdc_lookup(q.value());
        if (!manifests) return ControlResponse::failure(manifests.error());
        if (manifests.value().empty())
          return ControlResponse::failure(Errc::unresolved_target, "selector matched no component");
        report = map(endpoint.value(), manifests.value().front(), ep_selector);
      }
      if (!report) return ControlResponse::failure(report.error());
      json r;
      json est = json::array();
      for (const auto& m : report.value().established) {
        json e;
        e["peer_component"] = m.peer_component;
        e["peer_endpoint"] = m.peer_endpoint;
        est.push_back(std::move(e));
      }
      r["established"] = std::move(est);
      json fails = json::array();
      for (const auto& f : report.value().failures) fails.push_back(f.to_string());
      r["failures"] = std::move(fails);
      return ControlResponse::success(std::move(r));
    }

    case ControlVerb::map_lookup: {
      Query q;
      if (args.contains("query")) {
        auto parsed = Query::from_json(args["query"]);
        if (!parsed) return ControlResponse::failure(parsed.error());
        q = std::move(parsed).value();
      } else if (args.contains("selector") && args["selector"].is_string()) {
        auto parsed = selector_to_query(args["selector"].get<std::string>());
        if (!parsed) return ControlResponse::failure(parsed.error());
        q = std::move(parsed).value();
      }
      auto manifests = rdc_lookup(q);
      if (!manifests) return ControlResponse::failure(manifests.error());
      json r;
      json arr = json::array();
      for (const auto& m : manifests.value()) arr.push_back(m.to_json());
      r["manifests"] = std::move(arr);
      if (args.contains("then_map") && args["then_map"].is_boolean() &&
          args["then_map"].get<bool>()) {
        auto endpoint = arg_string(args, "endpoint");
        if (!endpoint) return ControlResponse::failure(endpoint.error());
        json mapped = json::array();
        json failures = json::array();
        for (const auto& m : manifests.value()) {
          auto report = map(endpoint.value(), m, Query{});
          if (report && !report.value().established.empty()) {
            mapped.push_back(m.component_id);
          } else {
            failures.push_back(m.component_id + ": " +
                               (report ? "no endpoint" : report.error().to_string()));
          }
        }
        r["mapped"] = std::move(mapped);
        r["failures"] = std::move(failures);
      }
      return ControlResponse::success(std::move(r));
    }

    case ControlVerb::unmap: {
      auto endpoint = arg_string(args, "endpoint");
      if (!endpoint) return ControlResponse::failure(endpoint.error());
      Query selector;
      if (args.contains("selector") && args["selector"].is_string()) {
        auto q = selector_to_query(args["selector"].get<std::string>());
        if (!q) return ControlResponse::failure(q.error());
        selector = std::move(q).value();
      }
      json r;
      r["closed"] = unmap(endpoint.value(), selector);
      return ControlResponse::success(std::move(r));
    }

    case ControlVerb::remap: {
      auto endpoint = arg_string(args, "endpoint");
      auto new_target = arg_string(args, "new_target");
      if (!endpoint || !new_target)
        return ControlResponse::failure(Errc::bad_args, "need endpoint and new_target");
      auto r = remap_self(endpoint.value(), new_target.value());
      if (!r) return ControlResponse::failure(r.error());
      return ControlResponse::success(std::move(r).value());
    }

    case ControlVerb::divert: {
      auto endpoint = arg_string(args, "endpoint");
      auto new_target = arg_string(args, "new_target");
      if (!endpoint || !new_target)
        return ControlResponse::failure(Errc::bad_args, "need endpoint and new_target");
      auto r = divert(endpoint.value(), new_target.value());
      if (!r) return ControlResponse::failure(r.error());
      return ControlResponse::success(std::move(r).value());
    }

    case ControlVerb::credential_add: {
      auto cred = credential_from_control_args(args, caller);
      if (!cred) return ControlResponse::failure(cred.error());
      if (auto r = credential_add(cred.value(), actor); !r) return ControlResponse::failure(r.error());
      return ControlResponse::success();
    }

    case ControlVerb::credential_remove: {
      auto name = arg_string(args, "name");
      if (!name) return ControlResponse::failure(name.error());
      if (auto r = credential_remove(name.value(), actor); !r)
        return ControlResponse::failure(r.error());
      return ControlResponse::success();
    }

    case ControlVerb::acl_add:
    case ControlVerb::acl_remove: {
      auto entry = AclEntry::from_json(args.contains("entry") ? args["entry"] : args);
      if (!entry) return ControlResponse::failure(entry.error());
      auto r = cmd.verb == ControlVerb::acl_add ? acl_add(entry.value(), actor)
                                                : acl_remove(entry.value(), actor);
      if (!r) return ControlResponse::failure(r.error());
      return ControlResponse::success();
    }

    case ControlVerb::set_filter: {
      auto endpoint = arg_string(args, "endpoint");
      if (!endpoint || !args.contains("filter"))
        return ControlResponse::failure(Errc::bad_args, "need endpoint and filter");
      auto f = Filter::from_json(args["filter"]);
      if (!f) return ControlResponse::failure(f.error());
      if (auto r = set_filter(endpoint.value(), f.value()); !r)
        return ControlResponse::failure(r.error());
      return ControlResponse::success();
    }

    case ControlVerb::clear_filter: {
      auto endpoint = arg_string(args, "endpoint");
      if (!endpoint) return ControlResponse::failure(endpoint.error());
      FilterDirection dir = FilterDirection::send;
      if (args.contains("direction") && args["direction"].is_string() &&
          args["direction"].get<std::string>() == "recv")
        dir = FilterDirection::recv;
      auto r = clear_filters(endpoint.value(), dir);
      if (!r) return ControlResponse::failure(r.error());
      json res;
      res["cleared"] = r.value();
      return ControlResponse::success(std::move(res));
    }

    case ControlVerb::load_com_module: {
      auto module = arg_string(args, "module");
      if (!module) return ControlResponse::failure(module.error());
      if (auto r = activate_transport(module.value()); !r)
        return ControlResponse::failure(r.error());
      if (args.contains("listen") && args["listen"].is_string()) {
        if (auto r = listen_on(module.value(), args["listen"].get<std::string>()); !r)
          return ControlResponse::failure(r.error());
      }
      json res;
      res["comm_modules"] = active_transports();
      return ControlResponse::success(std::move(res));
    }

    case ControlVerb::unload_com_module: {
      auto module = arg_string(args, "module");
      if (!module) return ControlResponse::failure(module.error());
      if (auto r = deactivate_transport(module.value()); !r)
        return ControlResponse::failure(r.error());
      json res;
      res["comm_modules"] = active_transports();
      return ControlResponse::success(std::move(res));
    }

    case ControlVerb::load_access_module: {
      auto module = arg_string(args, "module");
      if (!module) return ControlResponse::failure(module.error());
      if (auto r = activate_access_module(module.value()); !r)
        return ControlResponse::failure(r.error());
      json res;
      res["access_modules"] = json::array();
      for (const auto& m : manifest().access_modules) res["access_modules"].push_back(m);
      return ControlResponse::success(std::move(res));
    }

    case ControlVerb::add_rdc: {
      auto address = arg_string(args, "address");
      if (!address) return ControlResponse::failure(address.error());
      const std::string module =
          args.contains("module") && args["module"].is_string() ? args["module"].get<std::string>() : "tcp";
      add_rdc(module, address.value());
      json res;
      res["rdcs"] = rdcs().size();
      return ControlResponse::success(std::move(res));
    }

    case ControlVerb::register_rdc: {
      auto r = register_with_rdcs();
      if (!r) return ControlResponse::failure(r.error());
      json res;
      res["registered"] = r.value();
      return ControlResponse::success(std::move(res));
    }

    case ControlVerb::terminate: {
      {
        std::lock_guard lk(term_mu_);
        terminate_requested_ = true;
      }
      term_cv_.notify_all();
      return ControlResponse::success();
    }
  }
  return ControlResponse::failure(Errc::unknown_verb, "");
}

Result<Credential> Middleware::credential_from_control_args(const json& args,
                                                            const std::vector<Identity>& caller) {
  auto module = arg_string(args, "module");
  auto name = arg_string(args, "name");
  if (!module || !name) return Error{Errc::bad_args, "need module and name"};
  if (!args.contains("wrap") || !args["wrap"].is_object())
    return Error{Errc::bad_args, "credential secrets must arrive wrapped"};
  const json& wrap = args["wrap"];
  auto by_module = arg_string(wrap, "by_module");
  auto by_principal = arg_string(wrap, "by_principal");
  auto nonce = arg_string(wrap, "nonce");
  auto wrapped = arg_string(wrap, "wrapped");
  if (!by_module || !by_principal || !nonce || !wrapped)
    return Error{Errc::bad_args, "wrap needs by_module, by_principal, nonce, wrapped"};

  // the wrapping identity must be one the caller actually established
  const bool owned = std::any_of(caller.begin(), caller.end(), [&](const Identity& id) {
    return id.module == by_module.value() && id.principal == by_principal.value();
  });
  if (!owned) return Error{Errc::denied, "wrap identity not established by caller"};
  auto wrapping = access_.credential_by_principal(by_module.value(), by_principal.value());
  if (!wrapping) return Error{Errc::unknown_credential, "no local credential backs wrap identity"};

  const std::string secret = unwrap_secret(*wrapping, nonce.value(), wrapped.value());
  Credential c;
  c.module = module.value();
  c.name = name.value();
  if (c.module == "password") {
    auto username = arg_string(args, "username");
    if (!username) return Error{Errc::bad_args, "password credential needs username"};
    c.username = username.value();
    c.password = secret;
  } else {
    c.key_hex = to_hex(secret);
  }
  if (auto r = c.check(); !r) return r.error();
  return c;
}

// --- issuer side -------------------------------------------------------------------

Result<ControlResponse> Middleware::issue_control(const std::string& module,
                                                  const std::string& address,
                                                  const ControlCommand& cmd,
                                                  std::chrono::milliseconds timeout,
                                                  const ArgsFinalizer& finalize) {
  auto report = map_direct(kControlClientEndpoint, module, address,
                           Query::eq("ep_name", kControlEndpoint));
  if (!report) return report.error();
  const MappingInfo info = report.value().established.front();

  json args = cmd.args;
  if (finalize) {
    auto finalized = finalize(info, std::move(args));
    if (!finalized) {
      unmap(kControlClientEndpoint, Query::eq("component_id", info.peer_component));
      return finalized.error();
    }
    args = std::move(finalized).value();
  }
  ControlCommand final_cmd;
  final_cmd.verb = cmd.verb;
  final_cmd.args = std::move(args);

  auto bodies = request_impl(kControlClientEndpoint, final_cmd.to_json(), timeout,
                             Status::control_request, info.mapping_id);
  unmap(kControlClientEndpoint, Query::eq("component_id", info.peer_component));
  if (!bodies) return bodies.error();
  if (bodies.value().empty()) return Error{Errc::peer_closed, "no control response"};
  return ControlResponse::from_json(bodies.value().back());
}

Result<ControlResponse> Middleware::issue_control(const Manifest& target, const ControlCommand& cmd,
                                                  std::chrono::milliseconds timeout,
                                                  const ArgsFinalizer& finalize) {
  std::string module, address;
  {
    std::lock_guard lk(mu_);
    for (const auto& m : active_transports_) {
      for (const auto& [pm, paddr] : target.addresses) {
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
    return Error{Errc::no_shared_transport, "no transport shared with " + target.component_id};
  return issue_control(module, address, cmd, timeout, finalize);
}

Result<std::vector<RemapTargetReport>> Middleware::issue_remap(const std::string& selector,
                                                               const std::string& endpoint,
                                                               const std::string& new_target) {
  auto q = selector_to_query(selector);
  if (!q) return q.error();
  auto manifests = rdc_lookup(q.value());
  if (!manifests) return manifests.error();

  ControlCommand cmd;
  cmd.verb = ControlVerb::remap;
  cmd.args["endpoint"] = endpoint;
  cmd.args["new_target"] = new_target;

  std::vector<RemapTargetReport> reports;
  for (const auto& m : manifests.value()) {
    RemapTargetReport r;
    r.component_id = m.component_id;
    auto resp = issue_control(m, cmd, kControlTimeout);
    r.response = resp ? resp.value()
                      : ControlResponse::failure(resp.error().code, resp.error().detail);
    reports.push_back(std::move(r));
  }
  return reports;
}

Result<json> Middleware::remap_self(const std::string& endpoint, const std::string& new_target) {
  {
    std::lock_guard lk(mu_);
    if (!endpoints_.count(endpoint)) return Error{Errc::unknown_endpoint, endpoint};
  }
  auto q = selector_to_query(new_target);
  if (!q) return q.error();
  auto manifests = rdc_lookup(q.value());
  if (!manifests) return manifests.error();
  if (manifests.value().empty())
    return Error{Errc::unresolved_target, "\"" + new_target + "\" matched no component"};

  const std::size_t unmapped = unmap(endpoint, Query::match_all());
  // endpoint on the target chosen by schema match
  auto report = map(endpoint, manifests.value().front(), Query{});
  if (!report) return report.error();
  if (report.value().established.empty())
    return Error{Errc::schema_mismatch, "no endpoint on " + manifests.value().front().component_id};
  json r;
  r["unmapped"] = unmapped;
  r["mapped_to"] = manifests.value().front().component_id;
  r["established"] = report.value().established.size();
  return r;
}

Result<json> Middleware::divert(const std::string& endpoint, const std::string& new_target) {
  std::vector<std::shared_ptr<MappingRec>> peers;
  {
    std::lock_guard lk(mu_);
    if (!endpoints_.count(endpoint)) return Error{Errc::unknown_endpoint, endpoint};
    for (auto& [id, rec] : mappings_) {
      if (rec->local_ep == endpoint && rec->phase == MappingPhase::established)
        peers.push_back(rec);
    }
  }

  ControlCommand cmd;
  cmd.verb = ControlVerb::remap;
  cmd.args["new_target"] = new_target;

  json reports = json::array();
  std::size_t moved = 0;
  for (const auto& peer : peers) {
    ControlCommand per_peer = cmd;
    per_peer.args["endpoint"] = peer->peer_endpoint;
    auto resp = issue_control(peer->peer_manifest, per_peer, kControlTimeout);
    json entry;
    entry["component"] = peer->peer_component;
    if (resp && resp.value().ok) {
      entry["ok"] = true;
      ++moved;
    } else if (resp && resp.value().denied()) {
      entry["ok"] = false;
      entry["deny"] = resp.value().deny_reason;
    } else {
      entry["ok"] = false;
      entry["error"] = resp ? resp.value().error_code + ": " + resp.value().error_detail
                            : resp.error().to_string();
    }
    reports.push_back(std::move(entry));
  }

  json r;
  r["reports"] = std::move(reports);
  r["moved"] = moved;
  std::size_t remaining = 0;
  for (const auto& m : mappings(endpoint)) {
    if (m.state == MappingPhase::established) ++remaining;
  }
  r["remaining"] = remaining;
  return r;
}

// --- discovery client ------------------------------------------------------------

Result<std::size_t> Middleware::register_with_rdcs() { return push_registration(cfg_.rdc_ttl_s); }

Result<std::size_t> Middleware::push_registration(int ttl_s) {
  const std::string manifest_dump = manifest().dump();
  auto rdc_list = rdcs();
  if (rdc_list.empty()) return Error{Errc::no_rdc, "no known RDC"};
  std::size_t acked = 0;
  for (const auto& [module, addr] : rdc_list) {
    auto report = map_direct(kRdcRegisterClient, module, addr,
                             Query::eq("ep_name", kRdcRegisterEndpoint));
    if (!report) continue;
    json req;
    req["manifest"] = manifest_dump;
    req["ttl_s"] = ttl_s;
    auto bodies = request_impl(kRdcRegisterClient, req, kRdcCallTimeout, Status::request,
                               report.value().established.front().mapping_id);
    unmap(kRdcRegisterClient, Query::match_all());
    if (bodies && !bodies.value().empty() && bodies.value().back().value("ok", false)) ++acked;
  }
  return acked;
}

Result<std::size_t> Middleware::deregister_from_rdcs() {
  auto rdc_list = rdcs();
  if (rdc_list.empty()) return Error{Errc::no_rdc, "no known RDC"};
  std::size_t acked = 0;
  for (const auto& [module, addr] : rdc_list) {
    auto report = map_direct(kRdcDeregisterClient, module, addr,
                             Query::eq("ep_name", kRdcDeregisterEndpoint));
    if (!report) continue;
    json req;
    req["component_id"] = cfg_.component_id;
    auto bodies = request_impl(kRdcDeregisterClient, req, kRdcCallTimeout, Status::request,
                               report.value().established.front().mapping_id);
    unmap(kRdcDeregisterClient, Query::match_all());
    if (bodies && !bodies.value().empty() && bodies.value().back().value("ok", false)) ++acked;
  }
  return acked;
}

Result<std::vector<Manifest>> Middleware::rdc_lookup(const Query& q) {
  auto rdc_list = rdcs();
  if (rdc_list.empty()) return Error{Errc::no_rdc, "no known RDC"};
  std::map<std::string, Manifest> by_id;  // dedup + deterministic order
  bool any_ok = false;
  Error last_err{Errc::no_rdc, "all RDCs unreachable"};
  for (const auto& [module, addr] : rdc_list) {
    auto report = map_direct(kRdcLookupClient, module, addr,
                             Query::eq("ep_name", kRdcLookupEndpoint));
    if (!report) {
      last_err = report.error();
      continue;
    }
    json req;
    req["query"] = q.dump();
    auto bodies = request_impl(kRdcLookupClient, req, kRdcCallTimeout, Status::request,
                               report.value().established.front().mapping_id);
    unmap(kRdcLookupClient, Query::match_all());
    if (!bodies || bodies.value().empty()) {
      if (!bodies) last_err = bodies.error();
      continue;
    }
    const json& reply = bodies.value().back();
    if (!reply.value("ok", false) || !reply.contains("manifests")) {
      last_err = Error{Errc::invalid_query, reply.value("error", "lookup failed")};
      continue;
    }
    any_ok = true;
    for (const auto& ms : reply["manifests"]) {
      if (!ms.is_string()) continue;
      auto m = Manifest::parse(ms.get<std::string>());
      if (m) by_id.emplace(m.value().component_id, std::move(m).value());
    }
  }
  if (!any_ok) return last_err;
  std::vector<Manifest> out;
  for (auto& [id, m] : by_id) out.push_back(std::move(m));
  return out;
}

}  // namespace flux
