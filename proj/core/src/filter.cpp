// SPDX-License-Identifier: Apache-2.0
#include "flux/filter.hpp"

namespace flux {

std::string_view filter_kind_name(FilterKind k) {
  return k == FilterKind::content ? "content" : "rate";
}

std::string_view filter_direction_name(FilterDirection d) {
  return d == FilterDirection::send ? "send" : "recv";
}

Result<void> Filter::check() const {
  if (kind == FilterKind::rate && min_interval_ms <= 0)
    return Error{Errc::bad_args, "rate filter needs a positive min_interval_ms"};
  if (kind == FilterKind::content && clauses.empty())
    return Error{Errc::bad_args, "content filter needs at least one clause"};
  return {};
}

json Filter::to_json() const {
  json j;
  j["kind"] = std::string(filter_kind_name(kind));
  j["direction"] = std::string(filter_direction_name(direction));
  if (kind == FilterKind::content) {
    json arr = json::array();
    for (const auto& c : clauses) arr.push_back(c.to_json());
    j["clauses"] = std::move(arr);
  } else {
    j["min_interval_ms"] = min_interval_ms;
  }
  return j;
}

Result<Filter> Filter::from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    return Error{Errc::bad_args, "filter needs a kind"};
  Filter f;
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "content") {
    f.kind = FilterKind::content;
  } else if (kind == "rate") {
    f.kind = FilterKind::rate;
  } else {
    return Error{Errc::bad_args, "unknown filter kind \"" + kind + "\""};
  }
  if (j.contains("direction")) {
    if (!j["direction"].is_string()) return Error{Errc::bad_args, "direction must be a string"};
    const std::string d = j["direction"].get<std::string>();
    if (d == "send") {
      f.direction = FilterDirection::send;
    } else if (d == "recv") {
      f.direction = FilterDirection::recv;
    } else {
      return Error{Errc::bad_args, "unknown filter direction \"" + d + "\""};
    }
  }
  if (f.kind == FilterKind::content) {
    if (!j.contains("clauses") || !j["clauses"].is_array())
      return Error{Errc::bad_args, "content filter needs a clauses array"};
    for (const auto& cj : j["clauses"]) {
      auto c = Clause::from_json(cj);
      if (!c) return Error{Errc::bad_args, c.error().detail};
      f.clauses.push_back(std::move(c).value());
    }
  } else {
    if (!j.contains("min_interval_ms") || !j["min_interval_ms"].is_number())
      return Error{Errc::bad_args, "rate filter needs min_interval_ms"};
    f.min_interval_ms = j["min_interval_ms"].get<std::int64_t>();
  }
  if (auto r = f.check(); !r) return r.error();
  return f;
}

bool filters_pass(const std::vector<Filter>& filters, std::vector<std::int64_t>& last_pass_ms,
                  const json& payload, std::int64_t now_ms) {
  last_pass_ms.resize(filters.size(), -1);
  for (std::size_t i = 0; i < filters.size(); ++i) {
    const Filter& f = filters[i];
    if (f.kind == FilterKind::content) {
      for (const auto& c : f.clauses) {
        if (!clause_holds_on_value(c, payload)) return false;
      }
    } else {
      if (last_pass_ms[i] >= 0 && now_ms - last_pass_ms[i] < f.min_interval_ms) return false;
    }
  }
  // every filter passed; commit rate state
  for (std::size_t i = 0; i < filters.size(); ++i) {
    if (filters[i].kind == FilterKind::rate) last_pass_ms[i] = now_ms;
  }
  return true;
}

}  // namespace flux
