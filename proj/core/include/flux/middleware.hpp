// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <latch>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "flux/access.hpp"
#include "flux/control.hpp"
#include "flux/envelope.hpp"
#include "flux/filter.hpp"
#include "flux/manifest.hpp"
#include "flux/query.hpp"
#include "flux/transport.hpp"

namespace flux {

enum class MappingPhase { hello_sent, authenticating, negotiating, established, closed };
std::string_view mapping_phase_name(MappingPhase p);

struct MappingInfo {
  std::string mapping_id;
  std::string local_endpoint;
  std::string peer_component;
  std::string peer_endpoint;
  std::string peer_address;
  std::string transport;
  MappingPhase state = MappingPhase::closed;
  std::string close_reason;
  std::vector<Identity> peer_identities;
};

struct MapReport {
  std::vector<MappingInfo> established;
  std::vector<Error> failures;

  bool all_ok() const { return failures.empty() && !established.empty(); }
};

struct DeliveryOutcome {
  std::string mapping_id;
  bool delivered = false;
  bool filtered = false;
  std::string error;
};

struct DeliveryReport {
  std::uint64_t msg_id = 0;
  std::vector<DeliveryOutcome> outcomes;

  std::size_t delivered_count() const;
};

struct Received {
  json payload;          // data/request payloads
  std::string bytes;     // stream frames
  bool is_stream = false;
  std::string mapping_id;
  std::uint64_t msg_id = 0;
};

struct EndpointStats {
  std::uint64_t sends = 0;
  std::uint64_t frames_out = 0;
  std::uint64_t delivered = 0;
  std::uint64_t overflow_drops = 0;
  std::uint64_t invalid_drops = 0;
  std::uint64_t filtered_drops = 0;
};

struct RemapTargetReport {
  std::string component_id;
  ControlResponse response;
};

struct MiddlewareConfig {
  std::string component_id;
  std::map<std::string, std::string> metadata;
  std::vector<std::string> transports = {"tcp"};
  std::vector<std::pair<std::string, std::string>> listen;  // (module, "host:port")
  std::vector<std::string> access_modules = {"password", "psk"};
  std::vector<Credential> credentials;
  std::vector<AclEntry> acl;
  std::vector<std::pair<std::string, std::string>> rdcs;    // (module, address)
  int rdc_refresh_period_s = 10;
  int rdc_ttl_s = 30;
  std::string audit_log_path;
};

/// One middleware instance: endpoint lifecycle, the mapping state machine
/// (manifest exchange, mutual authentication, ACL checks, schema
/// negotiation), message routing, filters, discovery registration and the
/// built-in control endpoint. All state mutations serialize through one
/// lock, so observers never see a mapping that violates the establishment
/// conjunction. Application-facing calls are safe from any thread.
class Middleware {
 public:
  using RequestHandler = std::function<json(const json& payload)>;
  using ResponseEmitter = std::function<void(const json& body)>;
  using StreamRequestHandler = std::function<void(const json& payload, const ResponseEmitter& emit)>;

  explicit Middleware(MiddlewareConfig cfg);
  ~Middleware();

  Middleware(const Middleware&) = delete;
  Middleware& operator=(const Middleware&) = delete;

  const std::string& component_id() const { return cfg_.component_id; }

  // --- endpoints ------------------------------------------------------------
  Result<void> define_endpoint(const EndpointDescriptor& d);
  void on_request(const std::string& endpoint, RequestHandler handler);
  void on_request_stream(const std::string& endpoint, StreamRequestHandler handler);

  // --- mapping --------------------------------------------------------------
  Result<MapReport> map(const std::string& endpoint, const Manifest& peer, const Query& selector);
  Result<MapReport> map_direct(const std::string& endpoint, const std::string& module,
                               const std::string& address, const Query& selector);
  /// Closes every mapping of `endpoint` whose peer matches the selector
  /// (empty selector: all). Returns the number closed.
  std::size_t unmap(const std::string& endpoint, const Query& peer_selector);
  std::vector<MappingInfo> mappings(const std::string& endpoint = "") const;
  /// Re-runs the local map authorization for every established mapping;
  /// mappings that no longer pass close with reason "revoked". Invoked
  /// automatically on credential/ACL removal.
  std::vector<std::string> reexamine_mappings();

  // --- data plane -----------------------------------------------------------
  Result<DeliveryReport> send(const std::string& endpoint, const json& payload);
  Result<Received> receive(const std::string& endpoint, std::chrono::milliseconds timeout);
  Result<json> request(const std::string& endpoint, const json& payload,
                       std::chrono::milliseconds timeout);
  /// request-response+: collects response bodies until the final frame.
  Result<std::vector<json>> request_all(const std::string& endpoint, const json& payload,
                                        std::chrono::milliseconds timeout);
  Result<DeliveryReport> send_stream(const std::string& endpoint, std::string_view bytes);

  // --- filters ----------------------------------------------------------------
  Result<void> set_filter(const std::string& endpoint, const Filter& f);
  Result<std::size_t> clear_filters(const std::string& endpoint, FilterDirection direction);

  // --- manifest ---------------------------------------------------------------
  Manifest manifest() const;
  void manifest_add(const std::string& key, const std::string& value);

  // --- access control ---------------------------------------------------------
  Result<void> credential_add(const Credential& c, const std::string& actor = "local");
  Result<void> credential_remove(const std::string& name, const std::string& actor = "local");
  Result<void> acl_add(const AclEntry& e, const std::string& actor = "local");
  Result<void> acl_remove(const AclEntry& e, const std::string& actor = "local");
  AccessController& access() { return access_; }
  const AccessController& access() const { return access_; }

  // --- modules ----------------------------------------------------------------
  Result<void> activate_transport(const std::string& module);
  Result<void> deactivate_transport(const std::string& module);
  Result<void> activate_access_module(const std::string& module);
  Result<void> listen_on(const std::string& module, const std::string& address);
  std::vector<std::string> active_transports() const;
  std::vector<std::pair<std::string, std::string>> listen_addresses() const;

  // --- discovery --------------------------------------------------------------
  void add_rdc(const std::string& module, const std::string& address);
  std::vector<std::pair<std::string, std::string>> rdcs() const;
  /// Immediate registration push to every known RDC; returns how many acked.
  Result<std::size_t> register_with_rdcs();
  Result<std::vector<Manifest>> rdc_lookup(const Query& q);
  Result<std::size_t> deregister_from_rdcs();

  // --- control plane ------------------------------------------------------------
  /// Lets a caller finish verb args once the control mapping is up (e.g. to
  /// wrap a secret with the identity that authenticated the mapping).
  using ArgsFinalizer = std::function<Result<json>(const MappingInfo&, json args)>;

  ControlResponse handle_control(const ControlCommand& cmd, const std::vector<Identity>& caller);
  Result<ControlResponse> issue_control(const std::string& module, const std::string& address,
                                        const ControlCommand& cmd,
                                        std::chrono::milliseconds timeout,
                                        const ArgsFinalizer& finalize = {});
  Result<ControlResponse> issue_control(const Manifest& target, const ControlCommand& cmd,
                                        std::chrono::milliseconds timeout,
                                        const ArgsFinalizer& finalize = {});
  /// Issuer side of group remapping: resolves the selector through the known
  /// RDCs and sends each match a remap command for `endpoint`.
  Result<std::vector<RemapTargetReport>> issue_remap(const std::string& selector,
                                                     const std::string& endpoint,
                                                     const std::string& new_target);
  /// Executor side of remap: unmap `endpoint` from all peers, then map it to
  /// the component matching `new_target` (endpoint chosen by schema).
  Result<json> remap_self(const std::string& endpoint, const std::string& new_target);
  /// Moves every peer currently mapped to `endpoint` over to `new_target` by
  /// sending each a remap command.
  Result<json> divert(const std::string& endpoint, const std::string& new_target);

  // --- introspection ------------------------------------------------------------
  EndpointStats endpoint_stats(const std::string& endpoint) const;
  /// Hash over semantic state (manifest minus addresses, mappings, ACLs,
  /// credentials, filters, RDC list); used by the control/API equivalence
  /// checks. Ephemeral fields (ports, mapping ids) are excluded.
  std::string state_fingerprint() const;

  void shutdown();
  bool terminated() const { return shutdown_started_.load(); }
  void wait_terminated();

  static constexpr std::size_t kInboundQueueLimit = 1024;
  static constexpr int kUdpHandshakeRetries = 3;
  static constexpr std::chrono::milliseconds kUdpHandshakeTimeout{500};

 private:
  struct PendingRequest;
  struct EndpointRec;
  struct MappingRec;
  friend struct MappingRec;

  // handshake / wire internals (mapping.cpp)
  Result<std::shared_ptr<MappingRec>> initiate_handshake(ChannelPtr ch, const std::string& local_ep,
                                                         const std::string& target_ep,
                                                         const Query& selector);
  void accept_connection(ChannelPtr ch);
  void reader_loop(std::shared_ptr<MappingRec> rec);
  void dispatch_frame(const std::shared_ptr<MappingRec>& rec, Envelope env);
  void close_mapping(const std::shared_ptr<MappingRec>& rec, const std::string& reason,
                     bool send_unmap);
  Result<void> send_envelope(const std::shared_ptr<MappingRec>& rec, const Envelope& env);
  Result<Envelope> await_status(const std::shared_ptr<MappingRec>& rec,
                                std::initializer_list<Status> expected,
                                std::chrono::milliseconds timeout, const Envelope* resend);
  std::vector<Identity> run_auth_initiator(const std::shared_ptr<MappingRec>& rec,
                                           const std::vector<std::string>& modules);
  bool run_auth_responder(const std::shared_ptr<MappingRec>& rec, std::chrono::milliseconds timeout);

  // data plane internals (dataplane.cpp)
  void handle_data(const std::shared_ptr<MappingRec>& rec, Envelope& env);
  void handle_request_frame(const std::shared_ptr<MappingRec>& rec, Envelope& env);
  void handle_response_frame(const std::shared_ptr<MappingRec>& rec, Envelope& env);
  void handle_control_frame(const std::shared_ptr<MappingRec>& rec, Envelope& env);
  void enqueue_received(EndpointRec& ep, Received r);
  Result<std::vector<json>> request_impl(const std::string& endpoint, const json& payload,
                                         std::chrono::milliseconds timeout, Status status,
                                         const std::string& mapping_id = {});

  // helpers
  Manifest build_manifest_locked() const;
  void manifest_changed();
  void refresh_loop(std::stop_token st);
  Result<std::size_t> push_registration(int ttl_s);
  std::vector<const EndpointDescriptor*> select_candidates(const EndpointDescriptor& local,
                                                           const Manifest& peer,
                                                           const Query& selector, Error& why) const;
  bool mapping_matches(const MappingRec& rec, const Query& selector) const;
  void add_worker(std::thread t);
  void fail_pending(EndpointRec& ep, const std::string& mapping_id, const Error& err);
  std::int64_t steady_ms() const;
  ControlResponse dispatch_control(const ControlCommand& cmd, const std::vector<Identity>& caller);
  Result<Credential> credential_from_control_args(const json& args,
                                                  const std::vector<Identity>& caller);

  MiddlewareConfig cfg_;
  AccessController access_;

  mutable std::mutex mu_;  // the mutation queue: all shared state below
  std::map<std::string, std::unique_ptr<EndpointRec>> endpoints_;
  std::map<std::string, std::shared_ptr<MappingRec>> mappings_;
  std::map<std::string, std::unique_ptr<TransportModule>> transports_;
  std::vector<std::string> active_transports_;
  std::vector<std::string> active_access_;
  std::vector<std::pair<std::string, ListenerPtr>> listeners_;
  std::vector<std::pair<std::string, std::string>> rdcs_;
  std::uint64_t next_mapping_seq_ = 1;

  std::condition_variable recv_cv_;     // inbound queue waits
  std::condition_variable refresh_cv_;  // RDC refresh nudges
  bool refresh_nudge_ = false;

  std::mutex workers_mu_;
  std::vector<std::thread> workers_;
  std::jthread refresh_thread_;
  std::jthread terminator_;
  std::atomic<bool> stopping_{false};
  std::atomic<bool> shutdown_started_{false};
  std::latch shutdown_done_{1};
  std::mutex term_mu_;
  std::condition_variable term_cv_;
  bool terminate_requested_ = false;
  bool destructing_ = false;
};

/// Built-in endpoint names defined automatically within the core.
inline constexpr const char* kControlEndpoint = "control";
inline constexpr const char* kControlClientEndpoint = "control_client";
inline constexpr const char* kRdcRegisterClient = "rdc_register_client";
inline constexpr const char* kRdcLookupClient = "rdc_lookup_client";
inline constexpr const char* kRdcDeregisterClient = "rdc_deregister_client";

}  // namespace flux
