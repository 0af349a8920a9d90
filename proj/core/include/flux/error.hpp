// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cassert>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace flux {

/// Error vocabulary shared by every layer. Codes are stable strings on the
/// wire and in CLI output (see errc_name).
enum class Errc {
  ok = 0,

  // envelope / frame decoding
  invalid_utf8,
  not_json,
  not_an_object,
  missing_key,
  bad_type,
  unknown_status,
  extra_key,

  // schema
  malformed_schema,
  schema_violation,
  schema_mismatch,

  // manifest / query
  malformed_manifest,
  invalid_query,
  malformed_selector,

  // endpoints / mapping
  duplicate_name,
  unknown_endpoint,
  no_shared_transport,
  no_shared_access_module,
  auth_failed,
  acl_denied_local,
  acl_denied_remote,
  peer_unreachable,
  peer_closed,
  timeout,

  // transport
  frame_too_large,
  channel_closed,
  bind_failure,
  connect_refused,
  unknown_module,
  bad_address,

  // access control
  duplicate_credential,
  unknown_credential,
  unknown_acl_entry,
  denied,

  // rdc
  unknown_component,
  bad_ttl,
  no_rdc,

  // control plane
  unknown_verb,
  bad_args,
  unresolved_target,

  terminated,
  internal,
};

std::string_view errc_name(Errc c);
std::optional<Errc> errc_from_name(std::string_view name);

struct Error {
  Errc code = Errc::internal;
  std::string detail;

  Error() = default;
  Error(Errc c, std::string d = {}) : code(c), detail(std::move(d)) {}

  std::string to_string() const;
};

/// Minimal expected-like carrier. Most fallible operations in the library
/// return Result<T> instead of throwing; exceptions are reserved for
/// programming errors.
template <typename T>
class [[nodiscard]] Result {
 public:
  Result(T value) : v_(std::move(value)) {}
  Result(Error err) : v_(std::move(err)) {}
  Result(Errc code, std::string detail = {}) : v_(Error{code, std::move(detail)}) {}

  bool ok() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return ok(); }

  T& value() & {
    assert(ok());
    return std::get<T>(v_);
  }
  const T& value() const& {
    assert(ok());
    return std::get<T>(v_);
  }
  T&& value() && {
    assert(ok());
    return std::get<T>(std::move(v_));
  }

  const Error& error() const {
    assert(!ok());
    return std::get<Error>(v_);
  }
  Errc code() const { return ok() ? Errc::ok : error().code; }

  T value_or(T fallback) const { return ok() ? std::get<T>(v_) : std::move(fallback); }

 private:
  std::variant<T, Error> v_;
};

template <>
class [[nodiscard]] Result<void> {
 public:
  Result() = default;
  Result(Error err) : err_(std::move(err)) {}
  Result(Errc code, std::string detail = {}) : err_(Error{code, std::move(detail)}) {}

  bool ok() const { return !err_.has_value(); }
  explicit operator bool() const { return ok(); }
  const Error& error() const {
    assert(!ok());
    return *err_;
  }
  Errc code() const { return ok() ? Errc::ok : err_->code; }

 private:
  std::optional<Error> err_;
};

}  // namespace flux
