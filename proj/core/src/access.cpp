// SPDX-License-Identifier: Apache-2.0
#include "flux/access.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>

#include <algorithm>
#include <chrono>
#include <fstream>

namespace flux {

namespace {

std::string hmac_sha256(std::string_view key, std::string_view msg) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
       reinterpret_cast<const unsigned char*>(msg.data()), msg.size(), md, &len);
  return std::string(reinterpret_cast<char*>(md), len);
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

std::string to_hex(std::string_view bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char c : bytes) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 0xF]);
  }
  return out;
}

Result<std::string> from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) return Error{Errc::bad_args, "odd hex length"};
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  std::string out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    const int hi = nibble(hex[i]);
    const int lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) return Error{Errc::bad_args, "invalid hex"};
    out.push_back(static_cast<char>((hi << 4) | lo));
  }
  return out;
}

std::string Credential::secret_bytes() const {
  if (module == "psk") {
    auto raw = from_hex(key_hex);
    return raw ? raw.value() : std::string{};
  }
  return password;
}

Result<void> Credential::check() const {
  if (name.empty()) return Error{Errc::bad_args, "credential name must be non-empty"};
  if (module == "password") {
    if (username.empty() || password.empty())
      return Error{Errc::bad_args, "password credential needs username and password"};
    return {};
  }
  if (module == "psk") {
    auto raw = from_hex(key_hex);
    if (!raw || raw.value().size() != 32)
      return Error{Errc::bad_args, "psk credential needs a 32-byte key (64 hex chars)"};
    return {};
  }
  return Error{Errc::unknown_module, "unknown access module \"" + module + "\""};
}

json Credential::to_json() const {
  json j;
  j["module"] = module;
  j["name"] = name;
  if (module == "password") {
    j["username"] = username;
    j["password"] = password;
  } else {
    j["key_hex"] = key_hex;
  }
  return j;
}

Result<Credential> Credential::from_json(const json& j) {
  if (!j.is_object()) return Error{Errc::bad_args, "credential must be an object"};
  Credential c;
  auto str = [&](const char* key) -> std::string {
    return j.contains(key) && j[key].is_string() ? j[key].get<std::string>() : std::string{};
  };
  c.module = str("module");
  c.name = str("name");
  c.username = str("username");
  c.password = str("password");
  c.key_hex = str("key_hex");
  if (auto r = c.check(); !r) return r.error();
  return c;
}

Result<std::vector<Credential>> Credential::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) return Error{Errc::bad_args, "cannot open credential file " + path};
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_array())
    return Error{Errc::bad_args, "credential file must hold a JSON array"};
  std::vector<Credential> out;
  for (const auto& cj : j) {
    auto c = Credential::from_json(cj);
    if (!c) return c.error();
    out.push_back(std::move(c).value());
  }
  return out;
}

const std::vector<std::string>& acl_operations() {
  static const std::vector<std::string> ops = {
      "map",        "remap",        "unmap",
      "read_manifest", "set_filter", "acl_modify",
      "credential_modify", "module_control", "terminate",
  };
  return ops;
}

bool acl_operation_known(const std::string& op) {
  const auto& ops = acl_operations();
  return std::find(ops.begin(), ops.end(), op) != ops.end();
}

json AclEntry::to_json() const {
  json j;
  j["endpoint"] = endpoint;
  j["operation"] = operation;
  j["principal"] = principal;
  return j;
}

Result<AclEntry> AclEntry::from_json(const json& j) {
  if (!j.is_object() || !j.contains("endpoint") || !j.contains("operation") ||
      !j.contains("principal") || !j["endpoint"].is_string() || !j["operation"].is_string() ||
      !j["principal"].is_string())
    return Error{Errc::bad_args, "acl entry needs endpoint, operation and principal strings"};
  AclEntry e;
  e.endpoint = j["endpoint"].get<std::string>();
  e.operation = j["operation"].get<std::string>();
  e.principal = j["principal"].get<std::string>();
  if (!acl_operation_known(e.operation))
    return Error{Errc::bad_args, "unknown acl operation \"" + e.operation + "\""};
  return e;
}

Result<std::vector<AclEntry>> AclEntry::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) return Error{Errc::bad_args, "cannot open acl file " + path};
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_array())
    return Error{Errc::bad_args, "acl file must hold a JSON array"};
  std::vector<AclEntry> out;
  for (const auto& ej : j) {
    auto e = AclEntry::from_json(ej);
    if (!e) return e.error();
    out.push_back(std::move(e).value());
  }
  return out;
}

void AuditLog::set_path(const std::string& path) {
  std::lock_guard lk(mu_);
  path_ = path;
}

void AuditLog::append(const std::string& actor, const std::string& action,
                      const std::string& detail) {
  json rec;
  rec["ts"] = now_ms();
  rec["actor"] = actor;
  rec["action"] = action;
  rec["detail"] = detail;
  std::lock_guard lk(mu_);
  records_.push_back(rec);
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    if (out) out << rec.dump() << "\n";
  }
}

std::vector<json> AuditLog::records() const {
  std::lock_guard lk(mu_);
  return records_;
}

Result<void> AccessController::credential_add(const Credential& c, const std::string& actor) {
  if (auto r = c.check(); !r) return r;
  std::lock_guard lk(mu_);
  for (const auto& existing : credentials_) {
    if (existing.name == c.name)
      return Error{Errc::duplicate_credential, "credential \"" + c.name + "\" already present"};
  }
  credentials_.push_back(c);
  audit_.append(actor, "credential_add", c.module + ":" + c.name);
  return {};
}

Result<void> AccessController::credential_remove(const std::string& name, const std::string& actor) {
  std::lock_guard lk(mu_);
  auto it = std::find_if(credentials_.begin(), credentials_.end(),
                         [&](const Credential& c) { return c.name == name; });
  if (it == credentials_.end())
    return Error{Errc::unknown_credential, "no credential named \"" + name + "\""};
  audit_.append(actor, "credential_remove", it->module + ":" + name);
  credentials_.erase(it);
  return {};
}

std::optional<Credential> AccessController::credential_by_name(const std::string& name) const {
  std::lock_guard lk(mu_);
  for (const auto& c : credentials_) {
    if (c.name == name) return c;
  }
  return std::nullopt;
}

std::optional<Credential> AccessController::credential_by_principal(
    const std::string& module, const std::string& principal) const {
  std::lock_guard lk(mu_);
  for (const auto& c : credentials_) {
    if (c.module == module && c.principal() == principal) return c;
  }
  return std::nullopt;
}

std::vector<Credential> AccessController::credentials_for_module(const std::string& module) const {
  std::lock_guard lk(mu_);
  std::vector<Credential> out;
  for (const auto& c : credentials_) {
    if (c.module == module) out.push_back(c);
  }
  return out;
}

std::vector<Credential> AccessController::credentials() const {
  std::lock_guard lk(mu_);
  return credentials_;
}

std::vector<std::pair<std::string, std::string>> AccessController::identities() const {
  std::lock_guard lk(mu_);
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& c : credentials_) out.emplace_back(c.module, c.principal());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Result<void> AccessController::acl_add(const AclEntry& e, const std::string& actor) {
  if (!acl_operation_known(e.operation))
    return Error{Errc::bad_args, "unknown acl operation \"" + e.operation + "\""};
  std::lock_guard lk(mu_);
  if (std::find(acl_.begin(), acl_.end(), e) == acl_.end()) acl_.push_back(e);
  audit_.append(actor, "acl_add", e.endpoint + "/" + e.operation + "/" + e.principal);
  return {};
}

Result<void> AccessController::acl_remove(const AclEntry& e, const std::string& actor) {
  std::lock_guard lk(mu_);
  auto it = std::find(acl_.begin(), acl_.end(), e);
  if (it == acl_.end()) return Error{Errc::unknown_acl_entry, "no such acl entry"};
  audit_.append(actor, "acl_remove", e.endpoint + "/" + e.operation + "/" + e.principal);
  acl_.erase(it);
  return {};
}

std::vector<AclEntry> AccessController::acl_entries() const {
  std::lock_guard lk(mu_);
  return acl_;
}

AccessDecision AccessController::acl_check(const std::string& endpoint,
                                           const std::string& operation,
                                           const std::vector<Identity>& identities) const {
  std::lock_guard lk(mu_);
  for (const auto& e : acl_) {
    if (e.operation != operation) continue;
    if (e.endpoint != "*" && e.endpoint != endpoint) continue;
    if (e.principal == "*") {
      if (!identities.empty()) return {true, ""};
      continue;
    }
    for (const auto& id : identities) {
      if (id.principal == e.principal) return {true, ""};
    }
  }
  return {false, "default-deny: no entry matches (" + endpoint + ", " + operation + ")"};
}

std::string fresh_nonce() {
  unsigned char buf[16];
  RAND_bytes(buf, sizeof(buf));
  return to_hex(std::string_view(reinterpret_cast<char*>(buf), sizeof(buf)));
}

std::string auth_proof(const Credential& c, const std::string& nonce_hex) {
  const std::string msg = nonce_hex + "|" + c.module + "|" + c.principal();
  return to_hex(hmac_sha256(c.secret_bytes(), msg));
}

bool auth_verify(const Credential& c, const std::string& nonce_hex, const std::string& proof_hex) {
  return auth_proof(c, nonce_hex) == proof_hex;
}

std::string wrap_secret(const Credential& wrapping, const std::string& nonce_hex,
                        const std::string& secret) {
  std::string keystream;
  std::uint32_t counter = 0;
  while (keystream.size() < secret.size()) {
    keystream += hmac_sha256(wrapping.secret_bytes(),
                             "credwrap|" + nonce_hex + "|" + std::to_string(counter++));
  }
  std::string out = secret;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<char>(out[i] ^ keystream[i]);
  return to_hex(out);
}

std::string unwrap_secret(const Credential& wrapping, const std::string& nonce_hex,
                          const std::string& wrapped_hex) {
  auto bytes = from_hex(wrapped_hex);
  if (!bytes) return {};
  auto rewrapped = wrap_secret(wrapping, nonce_hex, bytes.value());
  auto raw = from_hex(rewrapped);
  return raw ? raw.value() : std::string{};
}

}  // namespace flux
