// SPDX-License-Identifier: Apache-2.0
#include "flux/error.hpp"

#include <array>

namespace flux {

namespace {

struct Entry {
  Errc code;
  std::string_view name;
};

constexpr std::array kNames{
    Entry{Errc::ok, "ok"},
    Entry{Errc::invalid_utf8, "invalid-utf8"},
    Entry{Errc::not_json, "not-json"},
    Entry{Errc::not_an_object, "not-an-object"},
    Entry{Errc::missing_key, "missing-key"},
    Entry{Errc::bad_type, "bad-type"},
    Entry{Errc::unknown_status, "unknown-status"},
    Entry{Errc::extra_key, "extra-key"},
    Entry{Errc::malformed_schema, "malformed-schema"},
    Entry{Errc::schema_violation, "schema-violation"},
    Entry{Errc::schema_mismatch, "schema-mismatch"},
    Entry{Errc::malformed_manifest, "malformed-manifest"},
    Entry{Errc::invalid_query, "invalid-query"},
    Entry{Errc::malformed_selector, "malformed-selector"},
    Entry{Errc::duplicate_name, "duplicate-name"},
    Entry{Errc::unknown_endpoint, "unknown-endpoint"},
    Entry{Errc::no_shared_transport, "no-shared-transport"},
    Entry{Errc::no_shared_access_module, "no-shared-access-module"},
    Entry{Errc::auth_failed, "auth-failed"},
    Entry{Errc::acl_denied_local, "acl-denied-local"},
    Entry{Errc::acl_denied_remote, "acl-denied-remote"},
    Entry{Errc::peer_unreachable, "peer-unreachable"},
    Entry{Errc::peer_closed, "peer-closed"},
    Entry{Errc::timeout, "timeout"},
    Entry{Errc::frame_too_large, "frame-too-large"},
    Entry{Errc::channel_closed, "channel-closed"},
    Entry{Errc::bind_failure, "bind-failure"},
    Entry{Errc::connect_refused, "connect-refused"},
    Entry{Errc::unknown_module, "unknown-module"},
    Entry{Errc::bad_address, "bad-address"},
    Entry{Errc::duplicate_credential, "duplicate-credential"},
    Entry{Errc::unknown_credential, "unknown-credential"},
    Entry{Errc::unknown_acl_entry, "unknown-acl-entry"},
    Entry{Errc::denied, "denied"},
    Entry{Errc::unknown_component, "unknown-component"},
    Entry{Errc::bad_ttl, "bad-ttl"},
    Entry{Errc::no_rdc, "no-rdc"},
    Entry{Errc::unknown_verb, "unknown-verb"},
    Entry{Errc::bad_args, "bad-args"},
    Entry{Errc::unresolved_target, "unresolved-target"},
    Entry{Errc::terminated, "terminated"},
    Entry{Errc::internal, "internal"},
};

}  // namespace

std::string_view errc_name(Errc c) {
  for (const auto& e : kNames) {
    if (e.code == c) return e.name;
  }
  return "internal";
}

std::optional<Errc> errc_from_name(std::string_view name) {
  for (const auto& e : kNames) {
    if (e.name == name) return e.code;
  }
  return std::nullopt;
}

std::string Error::to_string() const {
  std::string s{errc_name(code)};
  if (!detail.empty()) {
    s += ": ";
    s += detail;
  }
  return s;
}

}  // namespace flux
