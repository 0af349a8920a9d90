// SPDX-License-Identifier: Apache-2.0
#include "flux/schema.hpp"

#include <algorithm>
#include <cstdint>

namespace flux {

namespace {

const char* kind_name(FieldType::Kind k) {
  switch (k) {
    case FieldType::Kind::string: return "string";
    case FieldType::Kind::number: return "number";
    case FieldType::Kind::boolean: return "boolean";
    case FieldType::Kind::object: return "object";
    case FieldType::Kind::array: return "array";
  }
  return "?";
}

void collect_violations(const json& value, const MessageSchema& schema, const std::string& path,
                        std::vector<std::string>& out);

bool value_matches(const json& value, const FieldType& t, const std::string& path,
                   std::vector<std::string>& out) {
  switch (t.kind()) {
    case FieldType::Kind::string:
      return value.is_string();
    case FieldType::Kind::number:
      return value.is_number();
    case FieldType::Kind::boolean:
      return value.is_boolean();
    case FieldType::Kind::object:
      if (!value.is_object()) return false;
      collect_violations(value, t.object_schema(), path, out);
      return true;  // nested problems reported with their own paths
    case FieldType::Kind::array: {
      if (!value.is_array()) return false;
      std::size_t i = 0;
      for (const auto& el : value) {
        std::string epath = path + "[" + std::to_string(i) + "]";
        std::vector<std::string> nested;
        if (!value_matches(el, t.array_element(), epath, nested)) {
          out.push_back("type:" + epath);
        }
        out.insert(out.end(), nested.begin(), nested.end());
        ++i;
      }
      return true;
    }
  }
  return false;
}

void collect_violations(const json& value, const MessageSchema& schema, const std::string& path,
                        std::vector<std::string>& out) {
  std::string prefix = path.empty() ? "" : path + ".";
  for (const auto& name : schema.required()) {
    if (!value.contains(name)) out.push_back("missing:" + prefix + name);
  }
  for (auto it = value.begin(); it != value.end(); ++it) {
    const FieldType* t = schema.find(it.key());
    if (t == nullptr) {
      out.push_back("unknown:" + prefix + it.key());
      continue;
    }
    std::vector<std::string> nested;
    if (!value_matches(it.value(), *t, prefix + it.key(), nested)) {
      out.push_back("type:" + prefix + it.key());
    }
    out.insert(out.end(), nested.begin(), nested.end());
  }
}

}  // namespace

FieldType FieldType::object_type(MessageSchema inner) {
  FieldType t(Kind::object);
  t.object_ = std::make_shared<const MessageSchema>(std::move(inner));
  return t;
}

FieldType FieldType::array_type(FieldType element) {
  FieldType t(Kind::array);
  t.element_ = std::make_shared<const FieldType>(std::move(element));
  return t;
}

const MessageSchema& FieldType::object_schema() const {
  assert(kind_ == Kind::object && object_);
  return *object_;
}

const FieldType& FieldType::array_element() const {
  assert(kind_ == Kind::array && element_);
  return *element_;
}

json FieldType::to_json() const {
  json j;
  j["type"] = kind_name(kind_);
  switch (kind_) {
    case Kind::object: {
      json inner = object_->canonical();
      j["properties"] = inner["properties"];
      j["required"] = inner["required"];
      break;
    }
    case Kind::array:
      j["items"] = element_->to_json();
      break;
    default:
      break;
  }
  return j;
}

Result<FieldType> FieldType::from_json(const json& j, int depth) {
  if (depth > MessageSchema::kMaxDepth)
    return Error{Errc::malformed_schema, "nesting depth exceeds 32"};
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    return Error{Errc::malformed_schema, "field type must be an object with a \"type\" string"};
  const std::string kind = j["type"].get<std::string>();
  if (kind == "string") return FieldType::string_type();
  if (kind == "number") return FieldType::number_type();
  if (kind == "boolean") return FieldType::boolean_type();
  if (kind == "array") {
    if (!j.contains("items"))
      return Error{Errc::malformed_schema, "array type needs \"items\""};
    auto el = FieldType::from_json(j["items"], depth + 1);
    if (!el) return el.error();
    return FieldType::array_type(std::move(el).value());
  }
  if (kind == "object") {
    auto inner = MessageSchema::from_json(j, depth + 1);
    if (!inner) return inner.error();
    return FieldType::object_type(std::move(inner).value());
  }
  return Error{Errc::malformed_schema, "unknown field type \"" + kind + "\""};
}

Result<void> MessageSchema::add_property(const std::string& name, FieldType type, bool required) {
  if (name.empty()) return Error{Errc::malformed_schema, "empty property name"};
  if (has_property(name)) return Error{Errc::malformed_schema, "duplicate property " + name};
  if (props_.size() >= kMaxProperties)
    return Error{Errc::malformed_schema, "more than 256 properties"};
  props_.emplace_back(name, std::move(type));
  if (required) required_.insert(name);
  return {};
}

bool MessageSchema::has_property(const std::string& name) const {
  return find(name) != nullptr;
}

const FieldType* MessageSchema::find(const std::string& name) const {
  for (const auto& [n, t] : props_) {
    if (n == name) return &t;
  }
  return nullptr;
}

json MessageSchema::canonical() const {
  std::vector<std::pair<std::string, const FieldType*>> sorted;
  sorted.reserve(props_.size());
  for (const auto& [n, t] : props_) sorted.emplace_back(n, &t);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  json props = json::object();
  for (const auto& [n, t] : sorted) props[n] = t->to_json();
  json req = json::array();
  for (const auto& n : required_) req.push_back(n);  // std::set: already sorted

  json j;
  j["properties"] = std::move(props);
  j["required"] = std::move(req);
  return j;
}

std::string MessageSchema::hash() const { return fnv1a_hex(canonical_string()); }

Result<MessageSchema> MessageSchema::from_json(const json& j, int depth) {
  if (depth > kMaxDepth) return Error{Errc::malformed_schema, "nesting depth exceeds 32"};
  if (!j.is_object()) return Error{Errc::malformed_schema, "schema must be a JSON object"};
  MessageSchema s;
  if (j.contains("properties")) {
    const json& props = j["properties"];
    if (!props.is_object()) return Error{Errc::malformed_schema, "\"properties\" must be an object"};
    if (props.size() > kMaxProperties)
      return Error{Errc::malformed_schema, "more than 256 properties"};
    for (auto it = props.begin(); it != props.end(); ++it) {
      auto t = FieldType::from_json(it.value(), depth + 1);
      if (!t) return t.error();
      if (auto r = s.add_property(it.key(), std::move(t).value()); !r) return r.error();
    }
  }
  if (j.contains("required")) {
    const json& req = j["required"];
    if (!req.is_array()) return Error{Errc::malformed_schema, "\"required\" must be an array"};
    for (const auto& n : req) {
      if (!n.is_string()) return Error{Errc::malformed_schema, "required names must be strings"};
      const std::string name = n.get<std::string>();
      if (!s.has_property(name))
        return Error{Errc::malformed_schema, "required field \"" + name + "\" not in properties"};
      s.required_.insert(name);
    }
  }
  return s;
}

Result<MessageSchema> MessageSchema::parse(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) return Error{Errc::malformed_schema, "schema file is not valid JSON"};
  return from_json(j);
}

bool MessageSchema::well_formed() const {
  for (const auto& r : required_) {
    if (!has_property(r)) return false;
  }
  return props_.size() <= kMaxProperties;
}

bool schemas_compatible(const MessageSchema& a, const MessageSchema& b) {
  return a.canonical_string() == b.canonical_string();
}

ValidationResult validate(const json& message, const MessageSchema& schema) {
  ValidationResult r;
  if (!message.is_object()) {
    r.violations.push_back("not-an-object");
    return r;
  }
  collect_violations(message, schema, "", r.violations);
  std::sort(r.violations.begin(), r.violations.end());
  r.violations.erase(std::unique(r.violations.begin(), r.violations.end()), r.violations.end());
  return r;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

}  // namespace flux
