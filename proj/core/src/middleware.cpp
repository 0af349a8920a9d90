// SPDX-License-Identifier: Apache-2.0
#include "middleware_internal.hpp"

#include <algorithm>

#include "flux/rdc_protocol.hpp"

namespace flux {

std::string_view mapping_phase_name(MappingPhase p) {
  switch (p) {
    case MappingPhase::hello_sent: return "HELLO_SENT";
    case MappingPhase::authenticating: return "AUTHENTICATING";
    case MappingPhase::negotiating: return "NEGOTIATING";
    case MappingPhase::established: return "ESTABLISHED";
    case MappingPhase::closed: return "CLOSED";
  }
  return "?";
}

std::size_t DeliveryReport::delivered_count() const {
  std::size_t n = 0;
  for (const auto& o : outcomes) {
    if (o.delivered) ++n;
  }
  return n;
}

namespace {

EndpointDescriptor builtin_endpoint(const char* name, EndpointType type, MessageSchema msg,
                                    MessageSchema reply) {
  EndpointDescriptor d;
  d.name = name;
  d.type = type;
  d.msg_schema = std::move(msg);
  d.reply_schema = std::move(reply);
  return d;
}

}  // namespace

Middleware::Middleware(MiddlewareConfig cfg) : cfg_(std::move(cfg)) {
  if (!cfg_.audit_log_path.empty()) access_.audit().set_path(cfg_.audit_log_path);
  for (const auto& c : cfg_.credentials) (void)access_.credential_add(c, "bootstrap");
  for (const auto& e : cfg_.acl) (void)access_.acl_add(e, "bootstrap");

  transports_["tcp"] = make_tcp_transport();
  transports_["udp"] = make_udp_transport();
  transports_["loopback"] = make_loopback_transport();
  for (const auto& t : cfg_.transports) (void)activate_transport(t);
  for (const auto& m : cfg_.access_modules) (void)activate_access_module(m);

  // Control and discovery endpoints exist from component start, independent
  // of application logic.
  (void)define_endpoint(builtin_endpoint(kControlEndpoint, EndpointType::response,
                                         control_command_schema(), control_response_schema()));
  (void)define_endpoint(builtin_endpoint(kControlClientEndpoint, EndpointType::request,
                                         control_command_schema(), control_response_schema()));
  (void)define_endpoint(builtin_endpoint(kRdcRegisterClient, EndpointType::request,
                                         rdc_register_request_schema(), rdc_register_reply_schema()));
  (void)define_endpoint(builtin_endpoint(kRdcLookupClient, EndpointType::request,
                                         rdc_lookup_request_schema(), rdc_lookup_reply_schema()));
  (void)define_endpoint(builtin_endpoint(kRdcDeregisterClient, EndpointType::request,
                                         rdc_deregister_request_schema(),
                                         rdc_deregister_reply_schema()));

  for (const auto& [module, addr] : cfg_.listen) (void)listen_on(module, addr);
  for (const auto& [module, addr] : cfg_.rdcs) rdcs_.emplace_back(module, addr);

  refresh_thread_ = std::jthread([this](std::stop_token st) { refresh_loop(st); });
  terminator_ = std::jthread([this] {
    std::unique_lock lk(term_mu_);
    term_cv_.wait(lk, [&] { return terminate_requested_ || destructing_; });
    const bool run = terminate_requested_ && !destructing_;
    lk.unlock();
    if (run) {
      // let the terminate response flush before tearing channels down
      std::this_thread::sleep_for(std::chrono::milliseconds(200));
      shutdown();
    }
  });
}

Middleware::~Middleware() {
  {
    std::lock_guard lk(term_mu_);
    destructing_ = true;
  }
  term_cv_.notify_all();
  if (terminator_.joinable()) terminator_.join();
  shutdown();
}

void Middleware::shutdown() {
  bool expected = false;
  if (!shutdown_started_.compare_exchange_strong(expected, true)) {
    shutdown_done_.wait();
    return;
  }
  stopping_.store(true);
  refresh_thread_.request_stop();
  {
    std::lock_guard lk(mu_);
    refresh_nudge_ = true;
  }
  refresh_cv_.notify_all();
  if (refresh_thread_.joinable()) refresh_thread_.join();

  std::vector<std::shared_ptr<MappingRec>> live;
  {
    std::lock_guard lk(mu_);
    for (auto& [addr, listener] : listeners_) listener->close();
    for (auto& [id, rec] : mappings_) live.push_back(rec);
  }
  for (auto& rec : live) close_mapping(rec, "terminated", true);

  recv_cv_.notify_all();
  std::vector<std::thread> workers;
  {
    std::lock_guard lk(workers_mu_);
    workers.swap(workers_);
  }
  for (auto& t : workers) {
    if (t.joinable()) t.join();
  }
  shutdown_done_.count_down();
}

void Middleware::wait_terminated() { shutdown_done_.wait(); }

void Middleware::add_worker(std::thread t) {
  std::lock_guard lk(workers_mu_);
  if (stopping_.load()) {
    // shutdown may already be joining the vector; let stragglers finish detached
    t.detach();
    return;
  }
  workers_.push_back(std::move(t));
}

std::int64_t Middleware::steady_ms() const {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// --- endpoints ---------------------------------------------------------------

Result<void> Middleware::define_endpoint(const EndpointDescriptor& d) {
  if (auto r = d.check(); !r) return Error{Errc::malformed_schema, r.error().detail};
  {
    std::lock_guard lk(mu_);
    if (endpoints_.count(d.name))
      return Error{Errc::duplicate_name, "endpoint \"" + d.name + "\" already defined"};
    auto rec = std::make_unique<EndpointRec>();
    rec->desc = d;
    endpoints_[d.name] = std::move(rec);
  }
  manifest_changed();
  return {};
}

void Middleware::on_request(const std::string& endpoint, RequestHandler handler) {
  std::lock_guard lk(mu_);
  auto it = endpoints_.find(endpoint);
  if (it != endpoints_.end()) it->second->handler = std::move(handler);
}

void Middleware::on_request_stream(const std::string& endpoint, StreamRequestHandler handler) {
  std::lock_guard lk(mu_);
  auto it = endpoints_.find(endpoint);
  if (it != endpoints_.end()) it->second->stream_handler = std::move(handler);
}

// --- filters -----------------------------------------------------------------

Result<void> Middleware::set_filter(const std::string& endpoint, const Filter& f) {
  if (auto r = f.check(); !r) return r;
  std::lock_guard lk(mu_);
  auto it = endpoints_.find(endpoint);
  if (it == endpoints_.end()) return Error{Errc::unknown_endpoint, endpoint};
  auto& ep = *it->second;
  if (f.direction == FilterDirection::send) {
    ep.send_filters.push_back(f);
    ep.send_rate_state.assign(ep.send_filters.size(), -1);
  } else {
    ep.recv_filters.push_back(f);
    ep.recv_rate_state.assign(ep.recv_filters.size(), -1);
  }
  return {};
}

Result<std::size_t> Middleware::clear_filters(const std::string& endpoint,
                                              FilterDirection direction) {
  std::lock_guard lk(mu_);
  auto it = endpoints_.find(endpoint);
  if (it == endpoints_.end()) return Error{Errc::unknown_endpoint, endpoint};
  auto& ep = *it->second;
  auto& filters = direction == FilterDirection::send ? ep.send_filters : ep.recv_filters;
  const std::size_t n = filters.size();
  filters.clear();
  (direction == FilterDirection::send ? ep.send_rate_state : ep.recv_rate_state).clear();
  return n;
}

// --- manifest ------------------------------------------------------------------

Manifest Middleware::build_manifest_locked() const {
  Manifest m;
  m.component_id = cfg_.component_id;
  m.comm_modules = active_transports_;
  m.access_modules = active_access_;
  for (const auto& [module, listener] : listeners_) m.addresses.emplace_back(module, listener->address());
  m.identities = access_.identities();
  m.metadata = cfg_.metadata;
  for (const auto& [name, rec] : endpoints_) m.endpoints.push_back(rec->desc);
  return m;
}

Manifest Middleware::manifest() const {
  std::lock_guard lk(mu_);
  return build_manifest_locked();
}

void Middleware::manifest_add(const std::string& key, const std::string& value) {
  {
    std::lock_guard lk(mu_);
    cfg_.metadata[key] = value;
  }
  manifest_changed();
}

void Middleware::manifest_changed() {
  if (stopping_.load()) return;
  {
    std::lock_guard lk(mu_);
    refresh_nudge_ = true;
  }
  refresh_cv_.notify_all();
}

// --- access control --------------------------------------------------------------

Result<void> Middleware::credential_add(const Credential& c, const std::string& actor) {
  auto r = access_.credential_add(c, actor);
  if (r) manifest_changed();
  return r;
}

Result<void> Middleware::credential_remove(const std::string& name, const std::string& actor) {
  auto r = access_.credential_remove(name, actor);
  if (r) {
    reexamine_mappings();
    manifest_changed();
  }
  return r;
}

Result<void> Middleware::acl_add(const AclEntry& e, const std::string& actor) {
  return access_.acl_add(e, actor);
}

Result<void> Middleware::acl_remove(const AclEntry& e, const std::string& actor) {
  auto r = access_.acl_remove(e, actor);
  if (r) reexamine_mappings();
  return r;
}

// --- modules ----------------------------------------------------------------------

Result<void> Middleware::activate_transport(const std::string& module) {
  {
    std::lock_guard lk(mu_);
    if (!transports_.count(module)) return Error{Errc::unknown_module, module};
    if (std::find(active_transports_.begin(), active_transports_.end(), module) ==
        active_transports_.end())
      active_transports_.push_back(module);
  }
  manifest_changed();
  return {};
}

Result<void> Middleware::deactivate_transport(const std::string& module) {
  std::vector<std::shared_ptr<MappingRec>> doomed;
  {
    std::lock_guard lk(mu_);
    if (!transports_.count(module)) return Error{Errc::unknown_module, module};
    std::erase(active_transports_, module);
    for (auto it = listeners_.begin(); it != listeners_.end();) {
      if (it->first == module) {
        it->second->close();
        it = listeners_.erase(it);
      } else {
        ++it;
      }
    }
    for (auto& [id, rec] : mappings_) {
      if (rec->transport == module) doomed.push_back(rec);
    }
  }
  for (auto& rec : doomed) close_mapping(rec, "transport-lost", false);
  manifest_changed();
  return {};
}

Result<void> Middleware::activate_access_module(const std::string& module) {
  if (module != "password" && module != "psk") return Error{Errc::unknown_module, module};
  {
    std::lock_guard lk(mu_);
    if (std::find(active_access_.begin(), active_access_.end(), module) == active_access_.end())
      active_access_.push_back(module);
  }
  manifest_changed();
  return {};
}

Result<void> Middleware::listen_on(const std::string& module, const std::string& address) {
  ListenerPtr listener;
  {
    std::lock_guard lk(mu_);
    auto it = transports_.find(module);
    if (it == transports_.end()) return Error{Errc::unknown_module, module};
    if (std::find(active_transports_.begin(), active_transports_.end(), module) ==
        active_transports_.end())
      return Error{Errc::unknown_module, module + " is not active"};
    auto r = it->second->listen(address);
    if (!r) return r.error();
    listener = std::move(r).value();
    listeners_.emplace_back(module, listener);
  }
  add_worker(std::thread([this, listener] {
    while (!stopping_.load()) {
      auto ch = listener->accept(std::chrono::milliseconds(200));
      if (!ch) {
        if (ch.error().code == Errc::timeout) continue;
        return;  // listener closed
      }
      auto channel = std::move(ch).value();
      add_worker(std::thread([this, channel] { accept_connection(channel); }));
    }
  }));
  manifest_changed();
  return {};
}

std::vector<std::string> Middleware::active_transports() const {
  std::lock_guard lk(mu_);
  return active_transports_;
}

std::vector<std::pair<std::string, std::string>> Middleware::listen_addresses() const {
  std::lock_guard lk(mu_);
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [module, listener] : listeners_) out.emplace_back(module, listener->address());
  return out;
}

// --- introspection -----------------------------------------------------------------

EndpointStats Middleware::endpoint_stats(const std::string& endpoint) const {
  std::lock_guard lk(mu_);
  auto it = endpoints_.find(endpoint);
  return it == endpoints_.end() ? EndpointStats{} : it->second->stats;
}

std::string Middleware::state_fingerprint() const {
  std::lock_guard lk(mu_);
  json j;
  Manifest m = build_manifest_locked();
  m.addresses.clear();  // ephemeral ports
  j["manifest"] = m.to_json();

  json maps = json::array();
  std::vector<std::string> rows;
  for (const auto& [id, rec] : mappings_) {
    if (rec->phase != MappingPhase::established) continue;
    rows.push_back(rec->local_ep + "|" + rec->peer_component + "|" + rec->peer_endpoint);
  }
  std::sort(rows.begin(), rows.end());
  for (auto& r : rows) maps.push_back(r);
  j["mappings"] = std::move(maps);

  json acl = json::array();
  auto entries = access_.acl_entries();
  std::sort(entries.begin(), entries.end());
  for (const auto& e : entries) acl.push_back(e.to_json());
  j["acl"] = std::move(acl);

  json creds = json::array();
  {
    std::vector<std::string> cr;
    for (const auto& c : access_.credentials())
      cr.push_back(c.module + "|" + c.name + "|" + c.principal() + "|" + fnv1a_hex(c.secret_bytes()));
    std::sort(cr.begin(), cr.end());
    for (auto& c : cr) creds.push_back(c);
  }
  j["credentials"] = std::move(creds);

  json filters = json::object();
  for (const auto& [name, rec] : endpoints_) {
    json fs = json::array();
    for (const auto& f : rec->send_filters) fs.push_back(f.to_json());
    for (const auto& f : rec->recv_filters) fs.push_back(f.to_json());
    if (!fs.empty()) filters[name] = std::move(fs);
  }
  j["filters"] = std::move(filters);

  json rdcs = json::array();
  for (const auto& [module, addr] : rdcs_) rdcs.push_back(module + "|" + addr);
  j["rdcs"] = std::move(rdcs);
  j["terminated"] = shutdown_started_.load();

  return fnv1a_hex(j.dump());
}

// --- discovery registration loop ----------------------------------------------------

void Middleware::add_rdc(const std::string& module, const std::string& address) {
  {
    std::lock_guard lk(mu_);
    auto entry = std::make_pair(module, address);
    if (std::find(rdcs_.begin(), rdcs_.end(), entry) == rdcs_.end()) rdcs_.push_back(entry);
  }
  manifest_changed();  // nudges an immediate registration
}

std::vector<std::pair<std::string, std::string>> Middleware::rdcs() const {
  std::lock_guard lk(mu_);
  return rdcs_;
}

void Middleware::refresh_loop(std::stop_token st) {
  std::unique_lock lk(mu_);
  while (!st.stop_requested() && !stopping_.load()) {
    refresh_cv_.wait_for(lk, std::chrono::seconds(cfg_.rdc_refresh_period_s),
                         [&] { return refresh_nudge_ || st.stop_requested() || stopping_.load(); });
    refresh_nudge_ = false;
    if (st.stop_requested() || stopping_.load()) return;
    const bool has_rdcs = !rdcs_.empty();
    lk.unlock();
    if (has_rdcs) (void)push_registration(cfg_.rdc_ttl_s);
    lk.lock();
  }
}

}  // namespace flux
