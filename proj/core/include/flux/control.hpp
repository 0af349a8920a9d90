// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>

#include "flux/schema.hpp"

namespace flux {

/// Reconfiguration verbs accepted on the built-in "control" endpoint.
enum class ControlVerb {
  map_to,
  map_lookup,
  unmap,
  remap,
  divert,
  get_manifest,
  manifest_add,
  credential_add,
  credential_remove,
  acl_add,
  acl_remove,
  set_filter,
  clear_filter,
  load_com_module,
  unload_com_module,
  load_access_module,
  add_rdc,
  register_rdc,
  terminate,
};

std::string_view control_verb_name(ControlVerb v);
std::optional<ControlVerb> control_verb_from_name(std::string_view name);

/// The ACL operation gating each verb; every verb maps to exactly one.
std::string_view control_verb_operation(ControlVerb v);

struct ControlCommand {
  ControlVerb verb = ControlVerb::get_manifest;
  json args = json::object();

  json to_json() const;
  static Result<ControlCommand> from_json(const json& j);
};

struct ControlResponse {
  bool ok = false;
  json result = json::object();  // verb-specific payload when ok
  std::string deny_reason;       // set on authorization denial
  std::string error_code;        // set on execution error
  std::string error_detail;

  static ControlResponse success(json result = json::object());
  static ControlResponse deny(std::string reason);
  static ControlResponse failure(Errc code, std::string detail);
  static ControlResponse failure(const Error& e) { return failure(e.code, e.detail); }

  bool denied() const { return !ok && !deny_reason.empty(); }
  json to_json() const;
  static ControlResponse from_json(const json& j);
};

/// Schemas published for the built-in control endpoint. Checked for
/// equality during mapping negotiation; command payloads themselves are
/// parsed by the core (statuses 13/14), not schema-validated, since args
/// are verb-specific.
const MessageSchema& control_command_schema();
const MessageSchema& control_response_schema();

}  // namespace flux
