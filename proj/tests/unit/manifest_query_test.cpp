// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "flux/manifest.hpp"
#include "flux/query.hpp"
#include "generators.hpp"

using namespace flux;

namespace {

Manifest listener_manifest(const std::string& person) {
  Manifest m;
  m.component_id = "listener-" + person;
  m.comm_modules = {"tcp"};
  m.addresses.emplace_back("tcp", "127.0.0.1:5000");
  m.access_modules = {"psk"};
  m.metadata["person"] = person;
  EndpointDescriptor sink;
  sink.name = "music_input";
  sink.type = EndpointType::sink;
  MessageSchema s;
  (void)s.add_property("src", FieldType::string_type(), true);
  sink.msg_schema = s;
  m.endpoints.push_back(std::move(sink));
  return m;
}

}  // namespace

TEST_CASE("manifest_matches on metadata, the silent-disco group row") {
  Manifest m = listener_manifest("Anne");
  m.metadata["group"] = "birthday";
  auto q = Query::eq("metadata.group", json("birthday"));
  auto r = manifest_matches(m, q);
  REQUIRE(r.ok());
  CHECK(r.value());

  CHECK(manifest_matches(m, Query::match_all()).value());  // vacuous conjunction

  auto miss = manifest_matches(m, Query::eq("ep_name", json("music_output")));
  REQUIRE(miss.ok());
  CHECK_FALSE(miss.value());
  CHECK(manifest_matches(m, Query::eq("ep_name", json("music_input"))).value());
}

TEST_CASE("manifest_matches rejects unknown path roots") {
  auto r = manifest_matches(listener_manifest("Anne"), Query::eq("bogus_root", json("x")));
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().code == Errc::invalid_query);
}

TEST_CASE("query ops: exists, gt, lt") {
  Manifest m = listener_manifest("Anne");
  m.metadata["room"] = "12";
  Query q;
  q.clauses.push_back(Clause{"metadata.room", ClauseOp::exists, json()});
  CHECK(manifest_matches(m, q).value());
  q.clauses[0].path = "metadata.absent";
  CHECK_FALSE(manifest_matches(m, q).value());

  // lexicographic comparison on string metadata
  Query gt;
  gt.clauses.push_back(Clause{"metadata.room", ClauseOp::gt, json("11")});
  CHECK(manifest_matches(m, gt).value());
  gt.clauses[0].op = ClauseOp::lt;
  CHECK_FALSE(manifest_matches(m, gt).value());
}

TEST_CASE("clause concatenation is conjunction") {
  fluxtest::Gen gen(2024);
  for (int i = 0; i < 300; ++i) {
    Manifest m = gen.manifest();
    Query q1 = gen.query();
    Query q2 = gen.query();
    Query both;
    both.clauses = q1.clauses;
    both.clauses.insert(both.clauses.end(), q2.clauses.begin(), q2.clauses.end());
    auto a = manifest_matches(m, q1);
    auto b = manifest_matches(m, q2);
    auto c = manifest_matches(m, both);
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    REQUIRE(c.ok());
    CHECK(c.value() == (a.value() && b.value()));
  }
}

TEST_CASE("manifest serialization round-trips byte-stably") {
  fluxtest::Gen gen(11);
  for (int i = 0; i < 100; ++i) {
    Manifest m = gen.manifest();
    const std::string once = m.dump();
    auto back = Manifest::parse(once);
    REQUIRE(back.ok());
    CHECK(back.value().dump() == once);
  }
}

TEST_CASE("manifest_add sets metadata, last writer wins") {
  Manifest m = listener_manifest("Anne");
  Manifest with_group = manifest_add(m, "group", "birthday");
  CHECK(with_group.metadata.at("group") == "birthday");
  CHECK_FALSE(m.metadata.count("group"));  // original untouched
  CHECK(manifest_matches(with_group, Query::eq("metadata.group", json("birthday"))).value());

  // idempotent overwrite, then last-writer-wins
  Manifest twice = manifest_add(with_group, "group", "birthday");
  CHECK(twice.dump() == with_group.dump());
  Manifest changed = manifest_add(manifest_add(m, "group", "b"), "group", "c");
  CHECK(changed.metadata.at("group") == "c");
}

TEST_CASE("manifest invariants are checked") {
  Manifest m = listener_manifest("Anne");
  m.component_id.clear();
  CHECK_FALSE(m.check().ok());

  m = listener_manifest("Anne");
  m.addresses.emplace_back("udp", "127.0.0.1:1");  // udp not in comm_modules
  CHECK_FALSE(m.check().ok());

  m = listener_manifest("Anne");
  m.endpoints.push_back(m.endpoints.front());  // duplicate endpoint name
  CHECK_FALSE(m.check().ok());
}

TEST_CASE("selector grammar") {
  auto star = selector_to_query("*");
  REQUIRE(star.ok());
  CHECK(star.value().empty());

  auto group = selector_to_query("group:birthday");
  REQUIRE(group.ok());
  REQUIRE(group.value().clauses.size() == 1);
  CHECK(group.value().clauses[0].path == "metadata.group");
  CHECK(group.value().clauses[0].value == json("birthday"));

  auto person = selector_to_query("person:Anne");
  REQUIRE(person.ok());
  CHECK(person.value().clauses[0].path == "metadata.person");

  auto comp = selector_to_query("component:dj1");
  REQUIRE(comp.ok());
  CHECK(comp.value().clauses[0].path == "component_id");

  CHECK(selector_to_query("nocolon").error().code == Errc::malformed_selector);
  CHECK(selector_to_query(":empty").error().code == Errc::malformed_selector);
  CHECK(selector_to_query("empty:").error().code == Errc::malformed_selector);
}

TEST_CASE("endpoint descriptor invariants") {
  EndpointDescriptor d;
  d.name = "lookup";
  d.type = EndpointType::request;
  MessageSchema s;
  (void)s.add_property("n", FieldType::number_type(), true);
  d.msg_schema = s;
  CHECK_FALSE(d.check().ok());  // request kind without reply schema
  d.reply_schema = s;
  CHECK(d.check().ok());

  EndpointDescriptor stream;
  stream.name = "audio";
  stream.type = EndpointType::stream_source;
  CHECK(stream.check().ok());
  stream.msg_schema = s;
  CHECK_FALSE(stream.check().ok());  // streams carry no schema
}

TEST_CASE("endpoint pairing table") {
  using ET = EndpointType;
  CHECK(endpoint_types_pair(ET::source, ET::sink));
  CHECK(endpoint_types_pair(ET::sink, ET::source));
  CHECK(endpoint_types_pair(ET::request, ET::response));
  CHECK(endpoint_types_pair(ET::response_plus_client, ET::response_plus_server));
  CHECK(endpoint_types_pair(ET::stream_source, ET::stream_sink));
  CHECK_FALSE(endpoint_types_pair(ET::source, ET::source));
  CHECK_FALSE(endpoint_types_pair(ET::source, ET::response));
  CHECK_FALSE(endpoint_types_pair(ET::request, ET::response_plus_server));
}
