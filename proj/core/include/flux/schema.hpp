// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flux/error.hpp"

namespace flux {

/// JSON value type used throughout. Object key order is preserved, so
/// payloads cross the wire exactly as the application built them.
using json = nlohmann::ordered_json;

class MessageSchema;

/// Structural type of a single message field.
class FieldType {
 public:
  enum class Kind { string, number, boolean, object, array };

  static FieldType string_type() { return FieldType(Kind::string); }
  static FieldType number_type() { return FieldType(Kind::number); }
  static FieldType boolean_type() { return FieldType(Kind::boolean); }
  static FieldType object_type(MessageSchema inner);
  static FieldType array_type(FieldType element);

  Kind kind() const { return kind_; }
  const MessageSchema& object_schema() const;
  const FieldType& array_element() const;

  /// Canonical JSON form: {"type":"string"}, {"type":"array","items":...},
  /// {"type":"object","properties":...,"required":[...]} with keys sorted.
  json to_json() const;
  static Result<FieldType> from_json(const json& j, int depth = 0);

 private:
  explicit FieldType(Kind k) : kind_(k) {}
  Kind kind_;
  std::shared_ptr<const MessageSchema> object_;  // kind == object
  std::shared_ptr<const FieldType> element_;     // kind == array
};

/// Structural description of an endpoint's payloads: an ordered property
/// map plus the set of required property names. Two schemas are compatible
/// iff their canonical serializations are byte-equal.
class MessageSchema {
 public:
  // Bounds on hostile input.
  static constexpr int kMaxDepth = 32;
  static constexpr std::size_t kMaxProperties = 256;

  MessageSchema() = default;

  Result<void> add_property(const std::string& name, FieldType type, bool required = false);
  const std::vector<std::pair<std::string, FieldType>>& properties() const { return props_; }
  const std::set<std::string>& required() const { return required_; }
  bool has_property(const std::string& name) const;
  const FieldType* find(const std::string& name) const;

  /// Serialized canonical form: properties sorted lexicographically by name
  /// (recursively), required sorted. Equality and hashing go through this.
  json canonical() const;
  std::string canonical_string() const { return canonical().dump(); }

  /// 16-hex-digit FNV-1a of the canonical serialization; used by discovery
  /// queries addressing endpoints by schema.
  std::string hash() const;

  /// Disk/wire form: {"properties": {...}, "required": [...]}.
  json to_json() const { return canonical(); }
  static Result<MessageSchema> from_json(const json& j, int depth = 0);
  static Result<MessageSchema> parse(const std::string& text);

  bool well_formed() const;

 private:
  std::vector<std::pair<std::string, FieldType>> props_;
  std::set<std::string> required_;
};

/// True iff the canonical forms of a and b are byte-equal. Request/response
/// endpoints call this once per direction (request schema and reply schema).
bool schemas_compatible(const MessageSchema& a, const MessageSchema& b);

struct ValidationResult {
  std::vector<std::string> violations;  // sorted, deduplicated
  bool ok() const { return violations.empty(); }
};

/// Checks a payload against a schema: every required field present, every
/// present field matches its type recursively, unknown fields rejected.
/// Violation strings: "not-an-object", "missing:<path>", "type:<path>",
/// "unknown:<path>".
ValidationResult validate(const json& message, const MessageSchema& schema);

/// FNV-1a 64-bit over arbitrary bytes, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace flux
