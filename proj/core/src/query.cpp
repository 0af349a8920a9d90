// SPDX-License-Identifier: Apache-2.0
#include "flux/query.hpp"

namespace flux {

namespace {

// -1, 0, +1 if comparable; nullopt for type mismatches.
std::optional<int> compare_values(const json& field, const json& wanted) {
  if (field.is_number() && wanted.is_number()) {
    const double a = field.get<double>();
    const double b = wanted.get<double>();
    if (a < b) return -1;
    if (a > b) return 1;
    return 0;
  }
  if (field.is_string() && wanted.is_string()) {
    const auto& a = field.get_ref<const std::string&>();
    const auto& b = wanted.get_ref<const std::string&>();
    return a.compare(b) < 0 ? -1 : (a == b ? 0 : 1);
  }
  if (field.is_boolean() && wanted.is_boolean()) {
    return field.get<bool>() == wanted.get<bool>() ? 0 : 1;
  }
  return std::nullopt;
}

bool op_holds(ClauseOp op, const json& field, const json& wanted) {
  if (op == ClauseOp::exists) return true;  // caller resolved presence
  auto cmp = compare_values(field, wanted);
  if (!cmp) return false;
  switch (op) {
    case ClauseOp::eq: return *cmp == 0;
    case ClauseOp::gt: return *cmp > 0;
    case ClauseOp::lt: return *cmp < 0;
    default: return false;
  }
}

const json* descend(const json& value, const std::string& dotted_path) {
  const json* cur = &value;
  std::size_t start = 0;
  while (start <= dotted_path.size()) {
    const std::size_t dot = dotted_path.find('.', start);
    const std::string part = dotted_path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!cur->is_object() || !cur->contains(part)) return nullptr;
    cur = &(*cur)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return cur;
}

bool endpoint_clause_holds(const Clause& c, const EndpointDescriptor& e) {
  if (c.path == "ep_name") return op_holds(c.op, json(e.name), c.value);
  if (c.path == "ep_type") return op_holds(c.op, json(std::string(endpoint_type_name(e.type))), c.value);
  if (c.path == "schema_hash") {
    if (!e.msg_schema) return false;
    return op_holds(c.op, json(e.msg_schema->hash()), c.value);
  }
  return false;
}

}  // namespace

std::string_view clause_op_name(ClauseOp op) {
  switch (op) {
    case ClauseOp::eq: return "eq";
    case ClauseOp::exists: return "exists";
    case ClauseOp::gt: return "gt";
    case ClauseOp::lt: return "lt";
  }
  return "?";
}

std::optional<ClauseOp> clause_op_from_name(std::string_view name) {
  if (name == "eq") return ClauseOp::eq;
  if (name == "exists") return ClauseOp::exists;
  if (name == "gt") return ClauseOp::gt;
  if (name == "lt") return ClauseOp::lt;
  return std::nullopt;
}

json Clause::to_json() const {
  json j;
  j["op"] = std::string(clause_op_name(op));
  j["path"] = path;
  j["value"] = value;
  return j;
}

Result<Clause> Clause::from_json(const json& j) {
  if (!j.is_object() || !j.contains("path") || !j.contains("op") || !j["path"].is_string() ||
      !j["op"].is_string())
    return Error{Errc::invalid_query, "clause needs path and op strings"};
  Clause c;
  c.path = j["path"].get<std::string>();
  auto op = clause_op_from_name(j["op"].get<std::string>());
  if (!op) return Error{Errc::invalid_query, "unknown clause op"};
  c.op = *op;
  if (j.contains("value")) {
    const json& v = j["value"];
    if (!v.is_string() && !v.is_number() && !v.is_boolean())
      return Error{Errc::invalid_query, "clause values must be scalar"};
    c.value = v;
  }
  return c;
}

json Query::to_json() const {
  json arr = json::array();
  for (const auto& c : clauses) arr.push_back(c.to_json());
  json j;
  j["clauses"] = std::move(arr);
  return j;
}

Result<Query> Query::from_json(const json& j) {
  if (!j.is_object() || !j.contains("clauses") || !j["clauses"].is_array())
    return Error{Errc::invalid_query, "query needs a clauses array"};
  Query q;
  for (const auto& cj : j["clauses"]) {
    auto c = Clause::from_json(cj);
    if (!c) return c.error();
    q.clauses.push_back(std::move(c).value());
  }
  return q;
}

Result<Query> Query::parse(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) return Error{Errc::invalid_query, "query is not valid JSON"};
  return from_json(j);
}

Query Query::eq(std::string path, json value) {
  Query q;
  q.clauses.push_back(Clause{std::move(path), ClauseOp::eq, std::move(value)});
  return q;
}

bool clause_holds_on_value(const Clause& c, const json& value) {
  const json* field = descend(value, c.path);
  if (field == nullptr) return false;
  return op_holds(c.op, *field, c.value);
}

Result<bool> manifest_matches(const Manifest& m, const Query& q) {
  for (const auto& c : q.clauses) {
    bool holds = false;
    if (c.path == "component_id") {
      holds = op_holds(c.op, json(m.component_id), c.value);
    } else if (c.path.rfind("metadata.", 0) == 0) {
      const std::string key = c.path.substr(9);
      if (key.empty()) return Error{Errc::invalid_query, "empty metadata key"};
      auto it = m.metadata.find(key);
      holds = it != m.metadata.end() && op_holds(c.op, json(it->second), c.value);
    } else if (c.path == "ep_name" || c.path == "ep_type" || c.path == "schema_hash") {
      for (const auto& e : m.endpoints) {
        if (endpoint_clause_holds(c, e)) {
          holds = true;
          break;
        }
      }
    } else {
      return Error{Errc::invalid_query, "unknown query path \"" + c.path + "\""};
    }
    if (!holds) return false;
  }
  return true;
}

Result<Query> selector_to_query(const std::string& selector) {
  if (selector == "*") return Query::match_all();
  const std::size_t colon = selector.find(':');
  if (colon == std::string::npos)
    return Error{Errc::malformed_selector, "selector must be \"*\" or \"kind:value\""};
  const std::string kind = selector.substr(0, colon);
  const std::string value = selector.substr(colon + 1);
  if (kind.empty() || value.empty())
    return Error{Errc::malformed_selector, "selector parts must be non-empty"};
  if (kind == "component") return Query::eq("component_id", value);
  return Query::eq("metadata." + kind, value);
}

}  // namespace flux
