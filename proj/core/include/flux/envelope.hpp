// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "flux/schema.hpp"

namespace flux {

/// Message type carried in the envelope's "status" field. DATA is pinned to
/// 9; the rest number the handshake, request/response, control and stream
/// frames of the wire protocol.
enum class Status : int {
  hello = 1,
  auth_challenge = 2,
  auth_response = 3,
  auth_result = 4,
  map_request = 5,
  map_accept = 6,
  map_reject = 7,
  unmap = 8,
  data = 9,
  request = 10,
  response = 11,
  response_final = 12,
  control_request = 13,
  control_response = 14,
  stream = 15,
};

bool status_known(int code);
std::string_view status_name(Status s);

/// True for statuses whose body travels under the "ctrl" key (handshake and
/// the stream header) rather than "msg_JSON".
bool status_is_ctrl(Status s);

/// Wire record wrapping every non-stream message:
///   {"msg_id": "<decimal>", "status": <code>, "msg_JSON": {...}}
/// Handshake frames carry a "ctrl" object in place of msg_JSON; a frame may
/// also carry neither. Encoding emits exactly that key order.
struct Envelope {
  std::string msg_id;             // decimal-string counter
  Status status = Status::data;
  std::optional<json> msg_json;   // payload ("msg_JSON")
  std::optional<json> ctrl;       // handshake body ("ctrl")

  static Envelope make_data(std::uint64_t id, Status s, json payload) {
    Envelope e;
    e.msg_id = std::to_string(id);
    e.status = s;
    e.msg_json = std::move(payload);
    return e;
  }
  static Envelope make_ctrl(std::uint64_t id, Status s, json body) {
    Envelope e;
    e.msg_id = std::to_string(id);
    e.status = s;
    e.ctrl = std::move(body);
    return e;
  }

  bool operator==(const Envelope& other) const;
};

/// Canonical UTF-8 JSON bytes, no whitespace, key order msg_id, status,
/// msg_JSON (or ctrl).
std::string encode_envelope(const Envelope& e);

/// Whitespace- and key-order-tolerant decoder. Distinct error variants:
/// invalid-utf8, not-json, not-an-object, missing-key, bad-type,
/// unknown-status, extra-key.
Result<Envelope> decode_envelope(std::string_view bytes);

}  // namespace flux
