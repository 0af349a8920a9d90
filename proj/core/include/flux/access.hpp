// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "flux/schema.hpp"

namespace flux {

/// A secret held by a component. "password" credentials carry a username
/// and password; "psk" credentials carry a named 32-byte shared key.
/// Secrets never leave the process in serialized form: authentication and
/// provisioning use keyed proofs, and manifests expose only (module,
/// principal) pairs.
struct Credential {
  std::string module;  // "password" | "psk"
  std::string name;    // unique per component
  std::string username;  // password module
  std::string password;  // password module (secret)
  std::string key_hex;   // psk module: 64 hex chars (secret)

  /// The public identity this credential backs: username for password,
  /// name for psk.
  std::string principal() const { return module == "password" ? username : name; }
  /// Raw secret bytes (MAC key material).
  std::string secret_bytes() const;

  Result<void> check() const;
  static Result<Credential> from_json(const json& j);
  json to_json() const;  // includes secrets; for local bootstrap files only
  static Result<std::vector<Credential>> load_file(const std::string& path);
};

/// An identity established on a mapping after a successful challenge-response.
struct Identity {
  std::string module;
  std::string principal;

  bool operator==(const Identity& o) const = default;
  bool operator<(const Identity& o) const {
    return std::tie(module, principal) < std::tie(o.module, o.principal);
  }
};

/// Grant of a named operation on an endpoint to holders of a principal.
/// "*" wildcards the endpoint or the principal in the entry; checks match
/// entries whose endpoint and principal equal the queried ones or "*".
struct AclEntry {
  std::string endpoint;   // endpoint name or "*"
  std::string operation;  // one of acl_operations()
  std::string principal;  // principal or "*"

  bool operator==(const AclEntry& o) const = default;
  bool operator<(const AclEntry& o) const {
    return std::tie(endpoint, operation, principal) < std::tie(o.endpoint, o.operation, o.principal);
  }
  json to_json() const;
  static Result<AclEntry> from_json(const json& j);
  static Result<std::vector<AclEntry>> load_file(const std::string& path);
};

/// Operation vocabulary for ACL entries.
const std::vector<std::string>& acl_operations();
bool acl_operation_known(const std::string& op);

struct AccessDecision {
  bool allowed = false;
  std::string reason;  // non-empty explanation when denied
};

/// Append-only record of access-control mutations. Records carry no secret
/// material. Optionally mirrored to a newline-delimited JSON file.
class AuditLog {
 public:
  void set_path(const std::string& path);
  void append(const std::string& actor, const std::string& action, const std::string& detail);
  std::vector<json> records() const;

 private:
  mutable std::mutex mu_;
  std::string path_;
  std::vector<json> records_;
};

/// Credential store plus per-endpoint ACLs; every mutation is audited.
/// Mutations are serialized by the owning middleware's state lock; this
/// class adds its own lock so it is also safe standalone.
class AccessController {
 public:
  Result<void> credential_add(const Credential& c, const std::string& actor = "local");
  Result<void> credential_remove(const std::string& name, const std::string& actor = "local");
  std::optional<Credential> credential_by_name(const std::string& name) const;
  std::optional<Credential> credential_by_principal(const std::string& module,
                                                    const std::string& principal) const;
  std::vector<Credential> credentials_for_module(const std::string& module) const;
  std::vector<Credential> credentials() const;
  /// (module, principal) pairs for the manifest.
  std::vector<std::pair<std::string, std::string>> identities() const;

  Result<void> acl_add(const AclEntry& e, const std::string& actor = "local");
  Result<void> acl_remove(const AclEntry& e, const std::string& actor = "local");
  std::vector<AclEntry> acl_entries() const;

  /// Default-deny: allowed iff some entry matches (endpoint, operation, one
  /// of the identities' principals).
  AccessDecision acl_check(const std::string& endpoint, const std::string& operation,
                           const std::vector<Identity>& identities) const;

  AuditLog& audit() { return audit_; }
  const AuditLog& audit() const { return audit_; }

 private:
  mutable std::mutex mu_;
  std::vector<Credential> credentials_;
  std::vector<AclEntry> acl_;
  AuditLog audit_;
};

// --- challenge-response primitives -----------------------------------------

/// 16 random bytes as 32 hex chars.
std::string fresh_nonce();

/// HMAC-SHA256 proof binding a credential's secret to a handshake nonce and
/// the claimed principal; hex-encoded.
std::string auth_proof(const Credential& c, const std::string& nonce_hex);
bool auth_verify(const Credential& c, const std::string& nonce_hex, const std::string& proof_hex);

/// Secret transport for external credential provisioning: the new secret is
/// XORed with a keystream derived from a credential both ends already share
/// (the one that authenticated the control mapping), so raw secret bytes
/// never appear on the wire.
std::string wrap_secret(const Credential& wrapping, const std::string& nonce_hex,
                        const std::string& secret);
std::string unwrap_secret(const Credential& wrapping, const std::string& nonce_hex,
                          const std::string& wrapped_hex);

std::string to_hex(std::string_view bytes);
Result<std::string> from_hex(std::string_view hex);

}  // namespace flux
