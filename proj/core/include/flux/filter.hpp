// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <vector>

#include "flux/query.hpp"

namespace flux {

enum class FilterKind { content, rate };
enum class FilterDirection { send, recv };

std::string_view filter_kind_name(FilterKind k);
std::string_view filter_direction_name(FilterDirection d);

/// Message filter attached to an endpoint. Content filters pass a message
/// iff every clause holds on the payload. Rate filters drop (never queue)
/// messages arriving earlier than min_interval_ms after the last message
/// that passed.
struct Filter {
  FilterKind kind = FilterKind::content;
  FilterDirection direction = FilterDirection::send;
  std::vector<Clause> clauses;         // content
  std::int64_t min_interval_ms = 0;    // rate; must be positive

  Result<void> check() const;
  json to_json() const;
  static Result<Filter> from_json(const json& j);
};

/// Evaluates a filter chain against a payload at `now`. Rate state (the
/// timestamp of the last passed message) lives in `last_pass_ms`, one slot
/// per filter, owned by the endpoint.
bool filters_pass(const std::vector<Filter>& filters, std::vector<std::int64_t>& last_pass_ms,
                  const json& payload, std::int64_t now_ms);

}  // namespace flux
