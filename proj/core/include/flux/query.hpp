// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "flux/manifest.hpp"

namespace flux {

enum class ClauseOp { eq, exists, gt, lt };

std::string_view clause_op_name(ClauseOp op);
std::optional<ClauseOp> clause_op_from_name(std::string_view name);

/// One predicate of a query. Paths over manifests: "component_id",
/// "metadata.<key>", "ep_name", "ep_type", "schema_hash". Content filters
/// reuse clauses with paths into msg_JSON fields ("temperature",
/// "position.lat").
struct Clause {
  std::string path;
  ClauseOp op = ClauseOp::eq;
  json value;  // string or number; ignored for exists

  json to_json() const;
  static Result<Clause> from_json(const json& j);
};

/// Conjunction of clauses; the empty query matches everything. Clauses over
/// endpoint paths hold if any endpoint satisfies them (each clause
/// independently, so concatenating clause lists is exactly logical AND).
struct Query {
  std::vector<Clause> clauses;

  bool empty() const { return clauses.empty(); }
  json to_json() const;
  std::string dump() const { return to_json().dump(); }
  static Result<Query> from_json(const json& j);
  static Result<Query> parse(const std::string& text);

  static Query match_all() { return Query{}; }
  static Query eq(std::string path, json value);
};

/// Evaluates one clause against a plain JSON value (used by content
/// filters). Dotted paths descend into objects. Missing path: exists is
/// false, every other op fails the clause. gt/lt compare numerically for
/// numbers, lexicographically for strings.
bool clause_holds_on_value(const Clause& c, const json& value);

/// True iff every clause of q holds on manifest m.
/// Unknown path roots yield Errc::invalid_query.
Result<bool> manifest_matches(const Manifest& m, const Query& q);

/// Parses the operator selector grammar:
///   "*"               -> match-all
///   "component:<id>"  -> [component_id eq <id>]
///   "<key>:<value>"   -> [metadata.<key> eq <value>]
Result<Query> selector_to_query(const std::string& selector);

}  // namespace flux
