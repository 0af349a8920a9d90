// SPDX-License-Identifier: Apache-2.0
#include "flux/control.hpp"

namespace flux {

namespace {

struct VerbRow {
  ControlVerb verb;
  std::string_view name;
  std::string_view operation;
};

constexpr VerbRow kVerbs[] = {
    {ControlVerb::map_to, "map_to", "map"},
    {ControlVerb::map_lookup, "map_lookup", "map"},
    {ControlVerb::unmap, "unmap", "unmap"},
    {ControlVerb::remap, "remap", "remap"},
    {ControlVerb::divert, "divert", "remap"},
    {ControlVerb::get_manifest, "get_manifest", "read_manifest"},
    {ControlVerb::manifest_add, "manifest_add", "module_control"},
    {ControlVerb::credential_add, "credential_add", "credential_modify"},
    {ControlVerb::credential_remove, "credential_remove", "credential_modify"},
    {ControlVerb::acl_add, "acl_add", "acl_modify"},
    {ControlVerb::acl_remove, "acl_remove", "acl_modify"},
    {ControlVerb::set_filter, "set_filter", "set_filter"},
    {ControlVerb::clear_filter, "clear_filter", "set_filter"},
    {ControlVerb::load_com_module, "load_com_module", "module_control"},
    {ControlVerb::unload_com_module, "unload_com_module", "module_control"},
    {ControlVerb::load_access_module, "load_access_module", "module_control"},
    {ControlVerb::add_rdc, "add_rdc", "module_control"},
    {ControlVerb::register_rdc, "register_rdc", "module_control"},
    {ControlVerb::terminate, "terminate", "terminate"},
};

}  // namespace

std::string_view control_verb_name(ControlVerb v) {
  for (const auto& r : kVerbs) {
    if (r.verb == v) return r.name;
  }
  return "?";
}

std::optional<ControlVerb> control_verb_from_name(std::string_view name) {
  for (const auto& r : kVerbs) {
    if (r.name == name) return r.verb;
  }
  return std::nullopt;
}

std::string_view control_verb_operation(ControlVerb v) {
  for (const auto& r : kVerbs) {
    if (r.verb == v) return r.operation;
  }
  return "terminate";
}

json ControlCommand::to_json() const {
  json j;
  j["verb"] = std::string(control_verb_name(verb));
  j["args"] = args;
  return j;
}

Result<ControlCommand> ControlCommand::from_json(const json& j) {
  if (!j.is_object() || !j.contains("verb") || !j["verb"].is_string())
    return Error{Errc::bad_args, "control command needs a verb"};
  auto verb = control_verb_from_name(j["verb"].get<std::string>());
  if (!verb) return Error{Errc::unknown_verb, j["verb"].get<std::string>()};
  ControlCommand c;
  c.verb = *verb;
  if (j.contains("args")) {
    if (!j["args"].is_object()) return Error{Errc::bad_args, "args must be an object"};
    c.args = j["args"];
  }
  return c;
}

ControlResponse ControlResponse::success(json result) {
  ControlResponse r;
  r.ok = true;
  r.result = std::move(result);
  return r;
}

ControlResponse ControlResponse::deny(std::string reason) {
  ControlResponse r;
  r.ok = false;
  r.deny_reason = std::move(reason);
  return r;
}

ControlResponse ControlResponse::failure(Errc code, std::string detail) {
  ControlResponse r;
  r.ok = false;
  r.error_code = std::string(errc_name(code));
  r.error_detail = std::move(detail);
  return r;
}

json ControlResponse::to_json() const {
  json j;
  j["ok"] = ok;
  if (ok) {
    j["result"] = result;
  } else if (!deny_reason.empty()) {
    j["deny"] = deny_reason;
  } else {
    json e;
    e["code"] = error_code;
    e["detail"] = error_detail;
    j["error"] = std::move(e);
  }
  return j;
}

ControlResponse ControlResponse::from_json(const json& j) {
  ControlResponse r;
  r.ok = j.is_object() && j.contains("ok") && j["ok"].is_boolean() && j["ok"].get<bool>();
  if (r.ok) {
    if (j.contains("result")) r.result = j["result"];
    return r;
  }
  if (j.is_object() && j.contains("deny") && j["deny"].is_string()) {
    r.deny_reason = j["deny"].get<std::string>();
  } else if (j.is_object() && j.contains("error") && j["error"].is_object()) {
    const json& e = j["error"];
    if (e.contains("code") && e["code"].is_string()) r.error_code = e["code"].get<std::string>();
    if (e.contains("detail") && e["detail"].is_string())
      r.error_detail = e["detail"].get<std::string>();
  } else {
    r.error_code = "internal";
    r.error_detail = "unparseable control response";
  }
  return r;
}

const MessageSchema& control_command_schema() {
  static const MessageSchema schema = [] {
    MessageSchema s;
    (void)s.add_property("args", FieldType::object_type(MessageSchema{}), false);
    (void)s.add_property("verb", FieldType::string_type(), true);
    return s;
  }();
  return schema;
}

const MessageSchema& control_response_schema() {
  static const MessageSchema schema = [] {
    MessageSchema s;
    (void)s.add_property("deny", FieldType::string_type(), false);
    (void)s.add_property("error", FieldType::object_type(MessageSchema{}), false);
    (void)s.add_property("ok", FieldType::boolean_type(), true);
    (void)s.add_property("result", FieldType::object_type(MessageSchema{}), false);
    return s;
  }();
  return schema;
}

}  // namespace flux
