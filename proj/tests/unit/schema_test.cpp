// SPDX-License-Identifier: Apache-2.0
#include "flux/schema.hpp"

#include <doctest.h>

#include "generators.hpp"

using namespace flux;

namespace {

MessageSchema gps_schema() {
  MessageSchema s;
  REQUIRE(s.add_property("position", FieldType::string_type(), true).ok());
  REQUIRE(s.add_property("date", FieldType::string_type(), true).ok());
  return s;
}

// Independent oracle: validates a payload against the schema's JSON form
// directly, written without reference to the FieldType implementation.
std::size_t oracle_violation_count(const json& schema_j, const json& payload) {
  if (!payload.is_object()) return 1;
  std::size_t bad = 0;
  const json& props = schema_j["properties"];
  for (const auto& req : schema_j["required"]) {
    if (!payload.contains(req.get<std::string>())) ++bad;
  }
  for (auto it = payload.begin(); it != payload.end(); ++it) {
    if (!props.contains(it.key())) {
      ++bad;
      continue;
    }
    const json& t = props[it.key()];
    const std::string kind = t["type"].get<std::string>();
    const json& v = it.value();
    if (kind == "string") {
      if (!v.is_string()) ++bad;
    } else if (kind == "number") {
      if (!v.is_number()) ++bad;
    } else if (kind == "boolean") {
      if (!v.is_boolean()) ++bad;
    } else if (kind == "object") {
      if (!v.is_object()) {
        ++bad;
      } else {
        bad += oracle_violation_count(t, v);
      }
    } else if (kind == "array") {
      if (!v.is_array()) ++bad;
      // element checks not needed: the exhaustive corpus stays scalar inside arrays
    }
  }
  return bad;
}

}  // namespace

TEST_CASE("validate accepts the gps payload from the wire figure") {
  json payload;
  payload["position"] = "41.24'12.2\"N 2.10'26.5\"E";
  payload["date"] = "2012-04-23T18:25:43.511Z";
  CHECK(validate(payload, gps_schema()).ok());
}

TEST_CASE("validate reports missing required fields") {
  MessageSchema s;
  REQUIRE(s.add_property("date", FieldType::string_type(), true).ok());
  auto r = validate(json::object(), s);
  REQUIRE_FALSE(r.ok());
  CHECK(r.violations == std::vector<std::string>{"missing:date"});
}

TEST_CASE("validate reports type mismatches by field") {
  auto r = validate(json{{"date", "x"}, {"position", 7}}, gps_schema());
  REQUIRE_FALSE(r.ok());
  CHECK(r.violations == std::vector<std::string>{"type:position"});
}

TEST_CASE("validate rejects unknown fields and non-objects") {
  auto r = validate(json{{"date", "x"}, {"position", "y"}, {"extra", 1}}, gps_schema());
  REQUIRE_FALSE(r.ok());
  CHECK(r.violations == std::vector<std::string>{"unknown:extra"});
  CHECK(validate(json("just a string"), gps_schema()).violations ==
        std::vector<std::string>{"not-an-object"});
}

TEST_CASE("validate matches the independent oracle on all shallow payloads") {
  // schema: a: string (required), b: number, c: object{x: string required}
  MessageSchema inner;
  REQUIRE(inner.add_property("x", FieldType::string_type(), true).ok());
  MessageSchema s;
  REQUIRE(s.add_property("a", FieldType::string_type(), true).ok());
  REQUIRE(s.add_property("b", FieldType::number_type(), false).ok());
  REQUIRE(s.add_property("c", FieldType::object_type(inner), false).ok());
  const json schema_j = s.canonical();

  const std::vector<json> values = {
      json("s"), json(7), json(true),
      json::object(), json{{"x", "y"}}, json{{"x", 3}}, json{{"z", "w"}},
  };
  // every assignment of {absent + 7 values} to fields a, b, c, with and
  // without an extra unknown field: 8^3 * 2 payloads of depth <= 2
  for (int a = 0; a < 8; ++a) {
    for (int b = 0; b < 8; ++b) {
      for (int c = 0; c < 8; ++c) {
        for (int extra = 0; extra < 2; ++extra) {
          json payload = json::object();
          if (a > 0) payload["a"] = values[a - 1];
          if (b > 0) payload["b"] = values[b - 1];
          if (c > 0) payload["c"] = values[c - 1];
          if (extra) payload["zz"] = json(1);
          const bool impl_ok = validate(payload, s).ok();
          const bool oracle_ok = oracle_violation_count(schema_j, payload) == 0;
          CAPTURE(payload.dump());
          CHECK(impl_ok == oracle_ok);
        }
      }
    }
  }
}

TEST_CASE("validate is insensitive to payload key order") {
  fluxtest::Gen gen(42);
  for (int i = 0; i < 200; ++i) {
    auto schema = gen.schema(2);
    json payload = gen.chance(0.5) ? gen.conforming(schema) : gen.object(2);
    if (!payload.is_object()) continue;
    // rebuild with reversed key order
    std::vector<std::string> keys;
    for (auto it = payload.begin(); it != payload.end(); ++it) keys.push_back(it.key());
    json reversed = json::object();
    for (auto it = keys.rbegin(); it != keys.rend(); ++it) reversed[*it] = payload[*it];
    auto a = validate(payload, schema);
    auto b = validate(reversed, schema);
    CHECK(a.violations == b.violations);
  }
}

TEST_CASE("schemas_compatible is canonical equality") {
  auto s = gps_schema();
  CHECK(schemas_compatible(s, s));

  MessageSchema xs, xn;
  REQUIRE(xs.add_property("x", FieldType::string_type(), false).ok());
  REQUIRE(xn.add_property("x", FieldType::number_type(), false).ok());
  CHECK_FALSE(schemas_compatible(xs, xn));

  // property order does not matter: canonical bytes compare equal
  MessageSchema ab, ba;
  REQUIRE(ab.add_property("alpha", FieldType::string_type(), true).ok());
  REQUIRE(ab.add_property("beta", FieldType::number_type(), false).ok());
  REQUIRE(ba.add_property("beta", FieldType::number_type(), false).ok());
  REQUIRE(ba.add_property("alpha", FieldType::string_type(), true).ok());
  CHECK(ab.canonical_string() == ba.canonical_string());
  CHECK(schemas_compatible(ab, ba));
}

TEST_CASE("schemas_compatible is an equivalence relation on generated schemas") {
  fluxtest::Gen gen(7);
  std::vector<MessageSchema> pool;
  for (int i = 0; i < 12; ++i) pool.push_back(gen.schema(2));
  // add permuted duplicates
  for (int i = 0; i < 12; ++i) {
    MessageSchema permuted;
    auto props = pool[i].properties();
    for (auto it = props.rbegin(); it != props.rend(); ++it)
      (void)permuted.add_property(it->first, it->second, pool[i].required().count(it->first) > 0);
    pool.push_back(std::move(permuted));
  }
  for (const auto& a : pool) {
    CHECK(schemas_compatible(a, a));  // reflexive
    for (const auto& b : pool) {
      CHECK(schemas_compatible(a, b) == schemas_compatible(b, a));  // symmetric
      for (const auto& c : pool) {
        if (schemas_compatible(a, b) && schemas_compatible(b, c))
          CHECK(schemas_compatible(a, c));  // transitive
      }
    }
  }
}

TEST_CASE("schema json round-trips through the disk format") {
  const std::string text = R"({
    "properties": {
      "date": { "type": "string" },
      "position": { "type": "string" },
      "temperature": { "type": "number" }
    },
    "required": ["date", "position"]
  })";
  auto s = MessageSchema::parse(text);
  REQUIRE(s.ok());
  CHECK(s.value().required() == std::set<std::string>{"date", "position"});
  auto again = MessageSchema::from_json(s.value().canonical());
  REQUIRE(again.ok());
  CHECK(schemas_compatible(s.value(), again.value()));
}

TEST_CASE("schema bounds: depth and property count") {
  // depth > 32 nests objects too deep
  json deep = json{{"type", "string"}};
  for (int i = 0; i < 40; ++i) {
    json obj;
    obj["type"] = "object";
    obj["properties"] = json{{"f", deep}};
    obj["required"] = json::array();
    deep = obj;
  }
  json root;
  root["properties"] = json{{"f", deep}};
  root["required"] = json::array();
  auto r = MessageSchema::from_json(root);
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().code == Errc::malformed_schema);

  json wide;
  json props = json::object();
  for (int i = 0; i < 300; ++i) props["p" + std::to_string(i)] = json{{"type", "string"}};
  wide["properties"] = std::move(props);
  auto w = MessageSchema::from_json(wide);
  REQUIRE_FALSE(w.ok());
  CHECK(w.error().code == Errc::malformed_schema);

  // required name missing from properties
  json bad;
  bad["properties"] = json{{"a", json{{"type", "string"}}}};
  bad["required"] = json::array({"b"});
  CHECK_FALSE(MessageSchema::from_json(bad).ok());
}

TEST_CASE("schema hash is stable and order-independent") {
  MessageSchema ab, ba;
  REQUIRE(ab.add_property("a", FieldType::string_type(), false).ok());
  REQUIRE(ab.add_property("b", FieldType::number_type(), false).ok());
  REQUIRE(ba.add_property("b", FieldType::number_type(), false).ok());
  REQUIRE(ba.add_property("a", FieldType::string_type(), false).ok());
  CHECK(ab.hash() == ba.hash());
  CHECK(ab.hash().size() == 16);
}
