// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>

#include "flux/middleware.hpp"
#include "flux/rdc_protocol.hpp"

namespace flux {

struct RdcRecord {
  Manifest manifest;
  std::int64_t registered_at_ms = 0;
  std::int64_t refreshed_at_ms = 0;
  int ttl_s = 0;

  bool live(std::int64_t now_ms) const {
    return now_ms - refreshed_at_ms <= static_cast<std::int64_t>(ttl_s) * 1000;
  }
};

constexpr int kRdcMinTtlS = 1;
constexpr int kRdcMaxTtlS = 86400;
constexpr int kRdcDefaultTtlS = 30;

/// TTL-governed catalog of component manifests, keyed by component_id
/// (re-registration replaces). The clock is injected so expiry boundaries
/// are testable.
class RdcCatalog {
 public:
  using Clock = std::function<std::int64_t()>;  // milliseconds, monotone

  explicit RdcCatalog(Clock clock = {});

  Result<void> upsert(const Manifest& m, int ttl_s);
  Result<void> deregister(const std::string& component_id);
  /// Live records matching q, ascending component_id.
  Result<std::vector<Manifest>> lookup(const Query& q) const;
  std::size_t size() const;
  std::vector<RdcRecord> records() const;

  json snapshot() const;
  Result<void> restore(const json& snap);

 private:
  Clock clock_;
  mutable std::mutex mu_;
  std::map<std::string, RdcRecord> records_;
};

struct RdcServiceConfig {
  std::string component_id = "rdc";
  std::string listen_module = "tcp";
  std::string listen_address = "127.0.0.1:0";
  std::vector<Credential> credentials;
  std::vector<AclEntry> acl;  // empty: allow any authenticated peer to map
  std::string snapshot_path;
  RdcCatalog::Clock clock;
};

/// A discovery service that is itself an ordinary component: it answers
/// rdc_register / rdc_lookup / rdc_deregister over the regular mapping
/// protocol.
class RdcService {
 public:
  explicit RdcService(RdcServiceConfig cfg);
  ~RdcService();

  std::string address() const;    // bound "host:port"
  const std::string& module() const { return cfg_.listen_module; }
  RdcCatalog& catalog() { return catalog_; }
  Middleware& node() { return *node_; }

  void shutdown();

 private:
  RdcServiceConfig cfg_;
  RdcCatalog catalog_;
  std::unique_ptr<Middleware> node_;
};

}  // namespace flux
