// SPDX-License-Identifier: Apache-2.0
#include "flux/access.hpp"

#include <doctest.h>

using namespace flux;

namespace {

Credential psk(const std::string& name, char fill = 'a') {
  Credential c;
  c.module = "psk";
  c.name = name;
  c.key_hex = std::string(64, fill);
  return c;
}

Credential password_cred(const std::string& name, const std::string& user, const std::string& pw) {
  Credential c;
  c.module = "password";
  c.name = name;
  c.username = user;
  c.password = pw;
  return c;
}

}  // namespace

TEST_CASE("credential invariants") {
  CHECK(psk("birthday").check().ok());
  CHECK(password_cred("login", "anne", "s3cret").check().ok());

  Credential short_key = psk("k");
  short_key.key_hex = "abcd";
  CHECK_FALSE(short_key.check().ok());

  Credential no_user = password_cred("x", "", "pw");
  CHECK_FALSE(no_user.check().ok());

  Credential bad_module = psk("k");
  bad_module.module = "kerberos";
  CHECK_FALSE(bad_module.check().ok());

  CHECK(psk("birthday").principal() == "birthday");
  CHECK(password_cred("login", "anne", "pw").principal() == "anne");
}

TEST_CASE("acl is default-deny and matches on endpoint, operation, principal") {
  AccessController ac;
  const std::vector<Identity> birthday = {{"psk", "birthday"}};

  // empty ACL: deny everything
  for (const auto& op : acl_operations()) {
    CHECK_FALSE(ac.acl_check("music_input", op, birthday).allowed);
    CHECK_FALSE(ac.acl_check("*", op, birthday).allowed);
  }

  REQUIRE(ac.acl_add(AclEntry{"music_input", "remap", "birthday"}).ok());
  CHECK(ac.acl_check("music_input", "remap", birthday).allowed);
  CHECK_FALSE(ac.acl_check("music_input", "remap", {{"psk", "stranger"}}).allowed);
  CHECK_FALSE(ac.acl_check("music_input", "unmap", birthday).allowed);
  CHECK_FALSE(ac.acl_check("other_ep", "remap", birthday).allowed);
  CHECK_FALSE(ac.acl_check("music_input", "remap", {}).allowed);

  // wildcard grant
  REQUIRE(ac.acl_add(AclEntry{"*", "map", "*"}).ok());
  CHECK(ac.acl_check("anything", "map", {{"password", "whoever"}}).allowed);
  CHECK_FALSE(ac.acl_check("anything", "map", {}).allowed);  // still needs an identity

  // entry wildcards match; a "*" check target only matches "*" entries
  CHECK_FALSE(ac.acl_check("*", "remap", birthday).allowed);
}

TEST_CASE("acl add/remove round-trip with audit records") {
  AccessController ac;
  const AclEntry e{"door", "map", "staff"};
  REQUIRE(ac.acl_add(e, "tester").ok());
  CHECK(ac.acl_entries().size() == 1);
  CHECK_FALSE(ac.acl_remove(AclEntry{"door", "map", "other"}).ok());
  REQUIRE(ac.acl_remove(e, "tester").ok());
  CHECK(ac.acl_entries().empty());

  auto records = ac.audit().records();
  REQUIRE(records.size() == 2);
  CHECK(records[0]["action"] == "acl_add");
  CHECK(records[0]["actor"] == "tester");
  CHECK(records[1]["action"] == "acl_remove");
  for (const auto& r : records) {
    CHECK(r.contains("ts"));
    CHECK(r.contains("detail"));
  }
}

TEST_CASE("credential store: duplicates, removal, manifest identities") {
  AccessController ac;
  REQUIRE(ac.credential_add(psk("birthday")).ok());
  auto dup = ac.credential_add(psk("birthday", 'b'));
  REQUIRE_FALSE(dup.ok());
  CHECK(dup.error().code == Errc::duplicate_credential);

  REQUIRE(ac.credential_add(password_cred("login", "anne", "pw")).ok());
  auto ids = ac.identities();
  REQUIRE(ids.size() == 2);
  CHECK(ids[0] == std::make_pair(std::string("password"), std::string("anne")));
  CHECK(ids[1] == std::make_pair(std::string("psk"), std::string("birthday")));

  CHECK(ac.credential_by_principal("psk", "birthday").has_value());
  CHECK_FALSE(ac.credential_by_principal("psk", "anne").has_value());

  CHECK_FALSE(ac.credential_remove("absent").ok());
  REQUIRE(ac.credential_remove("birthday").ok());
  CHECK(ac.credentials_for_module("psk").empty());
}

TEST_CASE("challenge-response proofs verify and resist replay") {
  const Credential k = psk("birthday", 'c');
  const std::string nonce1 = fresh_nonce();
  const std::string nonce2 = fresh_nonce();
  REQUIRE(nonce1 != nonce2);  // fresh per handshake
  CHECK(nonce1.size() == 32);

  const std::string proof = auth_proof(k, nonce1);
  CHECK(auth_verify(k, nonce1, proof));
  // a recorded proof replayed against a fresh nonce fails
  CHECK_FALSE(auth_verify(k, nonce2, proof));
  // and a different key cannot produce the same proof
  CHECK_FALSE(auth_verify(psk("birthday", 'd'), nonce1, proof));

  // password proofs bind the username
  const Credential pw = password_cred("login", "anne", "hunter2");
  const std::string p = auth_proof(pw, nonce1);
  CHECK(auth_verify(pw, nonce1, p));
  CHECK_FALSE(auth_verify(password_cred("login2", "anne", "other"), nonce1, p));
}

TEST_CASE("proofs never contain the secret bytes") {
  const Credential pw = password_cred("login", "anne", "extremely-secret-password");
  const std::string nonce = fresh_nonce();
  const std::string proof = auth_proof(pw, nonce);
  CHECK(proof.find("extremely-secret-password") == std::string::npos);
  CHECK(proof.find(to_hex("extremely-secret-password")) == std::string::npos);
}

TEST_CASE("secret wrapping round-trips without exposing plaintext") {
  const Credential wrapping = psk("operator", 'e');
  const std::string nonce = fresh_nonce();
  std::string secret(32, '\0');
  for (int i = 0; i < 32; ++i) secret[i] = static_cast<char>(i * 7 + 1);

  const std::string wrapped = wrap_secret(wrapping, nonce, secret);
  CHECK(wrapped.find(to_hex(secret)) == std::string::npos);
  CHECK(unwrap_secret(wrapping, nonce, wrapped) == secret);

  // a different wrapping key or nonce unwraps to garbage
  CHECK(unwrap_secret(psk("operator", 'f'), nonce, wrapped) != secret);
  CHECK(unwrap_secret(wrapping, fresh_nonce(), wrapped) != secret);

  // variable-length secrets (passwords) work too
  const std::string pw = "correct horse battery staple";
  CHECK(unwrap_secret(wrapping, nonce, wrap_secret(wrapping, nonce, pw)) == pw);
}

TEST_CASE("hex helpers") {
  CHECK(to_hex("AB") == "4142");
  auto bytes = from_hex("4142");
  REQUIRE(bytes.ok());
  CHECK(bytes.value() == "AB");
  CHECK_FALSE(from_hex("abc").ok());
  CHECK_FALSE(from_hex("zz").ok());
}
