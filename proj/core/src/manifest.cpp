// SPDX-License-Identifier: Apache-2.0
#include "flux/manifest.hpp"

#include <algorithm>

namespace flux {

namespace {

struct TypeName {
  EndpointType type;
  std::string_view name;
};

constexpr TypeName kTypeNames[] = {
    {EndpointType::source, "source"},
    {EndpointType::sink, "sink"},
    {EndpointType::request, "request"},
    {EndpointType::response, "response"},
    {EndpointType::response_plus_server, "response_plus_server"},
    {EndpointType::response_plus_client, "response_plus_client"},
    {EndpointType::stream_source, "stream_source"},
    {EndpointType::stream_sink, "stream_sink"},
};

}  // namespace

std::string_view endpoint_type_name(EndpointType t) {
  for (const auto& e : kTypeNames) {
    if (e.type == t) return e.name;
  }
  return "?";
}

std::optional<EndpointType> endpoint_type_from_name(std::string_view name) {
  for (const auto& e : kTypeNames) {
    if (e.name == name) return e.type;
  }
  return std::nullopt;
}

bool endpoint_types_pair(EndpointType a, EndpointType b) {
  auto pairs = [](EndpointType x, EndpointType y) {
    return (x == EndpointType::source && y == EndpointType::sink) ||
           (x == EndpointType::request && y == EndpointType::response) ||
           (x == EndpointType::response_plus_client && y == EndpointType::response_plus_server) ||
           (x == EndpointType::stream_source && y == EndpointType::stream_sink);
  };
  return pairs(a, b) || pairs(b, a);
}

bool endpoint_type_is_stream(EndpointType t) {
  return t == EndpointType::stream_source || t == EndpointType::stream_sink;
}

bool endpoint_type_is_request_kind(EndpointType t) {
  return t == EndpointType::request || t == EndpointType::response ||
         t == EndpointType::response_plus_server || t == EndpointType::response_plus_client;
}

Result<void> EndpointDescriptor::check() const {
  if (name.empty()) return Error{Errc::malformed_schema, "endpoint name must be non-empty"};
  if (endpoint_type_is_stream(type)) {
    if (msg_schema || reply_schema)
      return Error{Errc::malformed_schema, "stream endpoints carry no schemas"};
    return {};
  }
  if (!msg_schema) return Error{Errc::malformed_schema, "endpoint needs a message schema"};
  if (endpoint_type_is_request_kind(type)) {
    if (!reply_schema)
      return Error{Errc::malformed_schema, "request/response endpoints need a reply schema"};
  } else if (reply_schema) {
    return Error{Errc::malformed_schema, "only request/response endpoints take a reply schema"};
  }
  return {};
}

json EndpointDescriptor::to_json() const {
  json j;
  j["name"] = name;
  if (msg_schema) j["msg_schema"] = msg_schema->canonical();
  if (reply_schema) j["reply_schema"] = reply_schema->canonical();
  j["type"] = std::string(endpoint_type_name(type));
  // canonical key order
  json sorted;
  for (const auto& k : {"msg_schema", "name", "reply_schema", "type"}) {
    if (j.contains(k)) sorted[k] = j[k];
  }
  return sorted;
}

Result<EndpointDescriptor> EndpointDescriptor::from_json(const json& j) {
  if (!j.is_object()) return Error{Errc::malformed_manifest, "endpoint descriptor must be an object"};
  if (!j.contains("name") || !j["name"].is_string())
    return Error{Errc::malformed_manifest, "endpoint descriptor needs a name"};
  if (!j.contains("type") || !j["type"].is_string())
    return Error{Errc::malformed_manifest, "endpoint descriptor needs a type"};
  EndpointDescriptor d;
  d.name = j["name"].get<std::string>();
  auto t = endpoint_type_from_name(j["type"].get<std::string>());
  if (!t) return Error{Errc::malformed_manifest, "unknown endpoint type"};
  d.type = *t;
  if (j.contains("msg_schema")) {
    auto s = MessageSchema::from_json(j["msg_schema"]);
    if (!s) return s.error();
    d.msg_schema = std::move(s).value();
  }
  if (j.contains("reply_schema")) {
    auto s = MessageSchema::from_json(j["reply_schema"]);
    if (!s) return s.error();
    d.reply_schema = std::move(s).value();
  }
  if (auto r = d.check(); !r) return Error{Errc::malformed_manifest, r.error().detail};
  return d;
}

Result<void> Manifest::check() const {
  if (component_id.empty()) return Error{Errc::malformed_manifest, "component_id must be non-empty"};
  for (const auto& [module, addr] : addresses) {
    if (std::find(comm_modules.begin(), comm_modules.end(), module) == comm_modules.end())
      return Error{Errc::malformed_manifest, "address references unlisted module " + module};
    (void)addr;
  }
  std::vector<std::string> names;
  for (const auto& e : endpoints) {
    if (auto r = e.check(); !r) return Error{Errc::malformed_manifest, r.error().detail};
    names.push_back(e.name);
  }
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end())
    return Error{Errc::malformed_manifest, "duplicate endpoint name"};
  return {};
}

const EndpointDescriptor* Manifest::find_endpoint(const std::string& name) const {
  for (const auto& e : endpoints) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

json Manifest::to_json() const {
  json j;

  json addrs = json::array();
  for (const auto& [module, addr] : addresses) {
    json a;
    a["address"] = addr;
    a["module"] = module;
    addrs.push_back(std::move(a));
  }
  j["access_modules"] = access_modules;
  j["addresses"] = std::move(addrs);
  j["comm_modules"] = comm_modules;
  j["component_id"] = component_id;

  json eps = json::array();
  // endpoints emitted sorted by name for a canonical byte form
  std::vector<const EndpointDescriptor*> sorted;
  for (const auto& e : endpoints) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->name < b->name; });
  for (const auto* e : sorted) eps.push_back(e->to_json());
  j["endpoints"] = std::move(eps);

  json ids = json::array();
  auto ids_sorted = identities;
  std::sort(ids_sorted.begin(), ids_sorted.end());
  for (const auto& [module, principal] : ids_sorted) {
    json i;
    i["module"] = module;
    i["principal"] = principal;
    ids.push_back(std::move(i));
  }
  j["identities"] = std::move(ids);

  json meta = json::object();
  for (const auto& [k, v] : metadata) meta[k] = v;  // std::map: sorted
  j["metadata"] = std::move(meta);
  return j;
}

Result<Manifest> Manifest::from_json(const json& j) {
  if (!j.is_object()) return Error{Errc::malformed_manifest, "manifest must be a JSON object"};
  Manifest m;
  if (!j.contains("component_id") || !j["component_id"].is_string())
    return Error{Errc::malformed_manifest, "manifest needs a component_id"};
  m.component_id = j["component_id"].get<std::string>();

  auto string_list = [&](const char* key, std::vector<std::string>& out) -> Result<void> {
    if (!j.contains(key)) return {};
    if (!j[key].is_array()) return Error{Errc::malformed_manifest, std::string(key) + " must be an array"};
    for (const auto& v : j[key]) {
      if (!v.is_string()) return Error{Errc::malformed_manifest, std::string(key) + " entries must be strings"};
      out.push_back(v.get<std::string>());
    }
    return {};
  };
  if (auto r = string_list("comm_modules", m.comm_modules); !r) return r.error();
  if (auto r = string_list("access_modules", m.access_modules); !r) return r.error();

  if (j.contains("addresses")) {
    if (!j["addresses"].is_array()) return Error{Errc::malformed_manifest, "addresses must be an array"};
    for (const auto& a : j["addresses"]) {
      if (!a.is_object() || !a.contains("module") || !a.contains("address") ||
          !a["module"].is_string() || !a["address"].is_string())
        return Error{Errc::malformed_manifest, "address entries need module and address strings"};
      m.addresses.emplace_back(a["module"].get<std::string>(), a["address"].get<std::string>());
    }
  }
  if (j.contains("identities")) {
    if (!j["identities"].is_array()) return Error{Errc::malformed_manifest, "identities must be an array"};
    for (const auto& a : j["identities"]) {
      if (!a.is_object() || !a.contains("module") || !a.contains("principal") ||
          !a["module"].is_string() || !a["principal"].is_string())
        return Error{Errc::malformed_manifest, "identity entries need module and principal strings"};
      m.identities.emplace_back(a["module"].get<std::string>(), a["principal"].get<std::string>());
    }
  }
  if (j.contains("metadata")) {
    if (!j["metadata"].is_object()) return Error{Errc::malformed_manifest, "metadata must be an object"};
    for (auto it = j["metadata"].begin(); it != j["metadata"].end(); ++it) {
      if (!it.value().is_string()) return Error{Errc::malformed_manifest, "metadata values must be strings"};
      m.metadata[it.key()] = it.value().get<std::string>();
    }
  }
  if (j.contains("endpoints")) {
    if (!j["endpoints"].is_array()) return Error{Errc::malformed_manifest, "endpoints must be an array"};
    for (const auto& e : j["endpoints"]) {
      auto d = EndpointDescriptor::from_json(e);
      if (!d) return d.error();
      m.endpoints.push_back(std::move(d).value());
    }
  }
  if (auto r = m.check(); !r) return r.error();
  return m;
}

Result<Manifest> Manifest::parse(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) return Error{Errc::malformed_manifest, "manifest is not valid JSON"};
  return from_json(j);
}

Manifest manifest_add(const Manifest& m, const std::string& key, const std::string& value) {
  Manifest out = m;
  out.metadata[key] = value;
  return out;
}

}  // namespace flux
