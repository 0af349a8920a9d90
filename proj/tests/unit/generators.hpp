// SPDX-License-Identifier: Apache-2.0
//
// Deterministic random generators shared by the property-style tests.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "flux/manifest.hpp"
#include "flux/query.hpp"
#include "flux/schema.hpp"

namespace fluxtest {

using flux::json;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  int range(int lo, int hi) {  // inclusive
    return std::uniform_int_distribution<int>(lo, hi)(rng_);
  }
  bool chance(double p) { return std::uniform_real_distribution<double>(0, 1)(rng_) < p; }

  std::string identifier(int min_len = 1, int max_len = 8) {
    static const char* alphabet = "abcdefghijklmnopqrstuvwxyz_";
    const int n = range(min_len, max_len);
    std::string s;
    for (int i = 0; i < n; ++i) s.push_back(alphabet[range(0, 26)]);
    return s;
  }

  json scalar() {
    switch (range(0, 2)) {
      case 0: return json(identifier());
      case 1: return json(range(-1000, 1000));
      default: return json(chance(0.5));
    }
  }

  json value(int depth) {
    if (depth <= 0 || chance(0.6)) return scalar();
    if (chance(0.5)) {
      json arr = json::array();
      const int n = range(0, 3);
      for (int i = 0; i < n; ++i) arr.push_back(value(depth - 1));
      return arr;
    }
    return object(depth - 1);
  }

  json object(int depth) {
    json o = json::object();
    const int n = range(0, 4);
    for (int i = 0; i < n; ++i) o[identifier()] = value(depth);
    return o;
  }

  flux::FieldType field_type(int depth) {
    const int pick = depth <= 0 ? range(0, 2) : range(0, 4);
    switch (pick) {
      case 0: return flux::FieldType::string_type();
      case 1: return flux::FieldType::number_type();
      case 2: return flux::FieldType::boolean_type();
      case 3: return flux::FieldType::array_type(field_type(depth - 1));
      default: return flux::FieldType::object_type(schema(depth - 1));
    }
  }

  flux::MessageSchema schema(int depth = 2) {
    flux::MessageSchema s;
    const int n = range(1, 4);
    for (int i = 0; i < n; ++i)
      (void)s.add_property(identifier() + std::to_string(i), field_type(depth), chance(0.5));
    return s;
  }

  /// A payload that satisfies the given schema.
  json conforming(const flux::MessageSchema& s) {
    json o = json::object();
    for (const auto& [name, type] : s.properties()) {
      if (!s.required().count(name) && chance(0.3)) continue;
      o[name] = conforming_value(type);
    }
    return o;
  }

  json conforming_value(const flux::FieldType& t) {
    switch (t.kind()) {
      case flux::FieldType::Kind::string: return json(identifier());
      case flux::FieldType::Kind::number: return json(range(-1000, 1000));
      case flux::FieldType::Kind::boolean: return json(chance(0.5));
      case flux::FieldType::Kind::object: return conforming(t.object_schema());
      case flux::FieldType::Kind::array: {
        json arr = json::array();
        const int n = range(0, 3);
        for (int i = 0; i < n; ++i) arr.push_back(conforming_value(t.array_element()));
        return arr;
      }
    }
    return json();
  }

  flux::Manifest manifest() {
    flux::Manifest m;
    m.component_id = "c-" + identifier(4, 10);
    m.comm_modules = {"tcp"};
    if (chance(0.5)) m.comm_modules.push_back("udp");
    m.addresses.emplace_back(m.comm_modules[0], "127.0.0.1:" + std::to_string(range(1024, 65000)));
    m.access_modules = {"psk"};
    const int meta = range(0, 3);
    static const char* keys[] = {"group", "person", "kind", "room"};
    for (int i = 0; i < meta; ++i) m.metadata[keys[range(0, 3)]] = identifier(3, 6);
    const int eps = range(0, 3);
    for (int i = 0; i < eps; ++i) {
      flux::EndpointDescriptor d;
      d.name = "ep_" + identifier(3, 6) + std::to_string(i);
      d.type = chance(0.5) ? flux::EndpointType::source : flux::EndpointType::sink;
      d.msg_schema = schema(1);
      m.endpoints.push_back(std::move(d));
    }
    return m;
  }

  flux::Query query() {
    flux::Query q;
    const int n = range(0, 2);
    static const char* keys[] = {"group", "person", "kind", "room"};
    for (int i = 0; i < n; ++i) {
      flux::Clause c;
      switch (range(0, 3)) {
        case 0:
          c.path = std::string("metadata.") + keys[range(0, 3)];
          c.op = chance(0.7) ? flux::ClauseOp::eq : flux::ClauseOp::exists;
          c.value = json(identifier(3, 6));
          break;
        case 1:
          c.path = "component_id";
          c.op = flux::ClauseOp::eq;
          c.value = json("c-" + identifier(4, 10));
          break;
        case 2:
          c.path = "ep_name";
          c.op = flux::ClauseOp::eq;
          c.value = json("ep_" + identifier(3, 6) + "0");
          break;
        default:
          c.path = "ep_type";
          c.op = flux::ClauseOp::eq;
          c.value = json(chance(0.5) ? "source" : "sink");
          break;
      }
      q.clauses.push_back(std::move(c));
    }
    return q;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace fluxtest
