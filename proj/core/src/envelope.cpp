// SPDX-License-Identifier: Apache-2.0
#include "flux/envelope.hpp"

#include <algorithm>

namespace flux {

namespace {

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  const auto n = s.size();
  while (i < n) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    if (c < 0x80) {
      len = 1;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      if (c < 0xC2) return false;  // overlong
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      if (c > 0xF4) return false;  // beyond U+10FFFF
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
    }
    if (len == 3) {
      const unsigned char c1 = static_cast<unsigned char>(s[i + 1]);
      if (c == 0xE0 && c1 < 0xA0) return false;            // overlong
      if (c == 0xED && c1 > 0x9F) return false;            // surrogate
    }
    if (len == 4) {
      const unsigned char c1 = static_cast<unsigned char>(s[i + 1]);
      if (c == 0xF0 && c1 < 0x90) return false;            // overlong
      if (c == 0xF4 && c1 > 0x8F) return false;            // beyond U+10FFFF
    }
    i += len;
  }
  return true;
}

bool decimal_string(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

bool status_known(int code) { return code >= 1 && code <= 15; }

std::string_view status_name(Status s) {
  switch (s) {
    case Status::hello: return "HELLO";
    case Status::auth_challenge: return "AUTH_CHALLENGE";
    case Status::auth_response: return "AUTH_RESPONSE";
    case Status::auth_result: return "AUTH_RESULT";
    case Status::map_request: return "MAP_REQUEST";
    case Status::map_accept: return "MAP_ACCEPT";
    case Status::map_reject: return "MAP_REJECT";
    case Status::unmap: return "UNMAP";
    case Status::data: return "DATA";
    case Status::request: return "REQUEST";
    case Status::response: return "RESPONSE";
    case Status::response_final: return "RESPONSE_FINAL";
    case Status::control_request: return "CONTROL_REQUEST";
    case Status::control_response: return "CONTROL_RESPONSE";
    case Status::stream: return "STREAM";
  }
  return "?";
}

bool status_is_ctrl(Status s) {
  switch (s) {
    case Status::hello:
    case Status::auth_challenge:
    case Status::auth_response:
    case Status::auth_result:
    case Status::map_request:
    case Status::map_accept:
    case Status::map_reject:
    case Status::unmap:
    case Status::stream:
      return true;
    default:
      return false;
  }
}

bool Envelope::operator==(const Envelope& other) const {
  auto same = [](const std::optional<json>& a, const std::optional<json>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a.has_value()) return true;
    return a->dump() == b->dump();
  };
  return msg_id == other.msg_id && status == other.status && same(msg_json, other.msg_json) &&
         same(ctrl, other.ctrl);
}

std::string encode_envelope(const Envelope& e) {
  json j;
  j["msg_id"] = e.msg_id;
  j["status"] = static_cast<int>(e.status);
  if (e.msg_json) j["msg_JSON"] = *e.msg_json;
  if (e.ctrl) j["ctrl"] = *e.ctrl;
  return j.dump();
}

Result<Envelope> decode_envelope(std::string_view bytes) {
  if (!valid_utf8(bytes)) return Error{Errc::invalid_utf8, "frame body is not valid UTF-8"};
  json j = json::parse(bytes, nullptr, false);
  if (j.is_discarded()) return Error{Errc::not_json, "frame body is not JSON"};
  if (!j.is_object()) return Error{Errc::not_an_object, "envelope must be a JSON object"};

  if (!j.contains("msg_id")) return Error{Errc::missing_key, "msg_id"};
  if (!j.contains("status")) return Error{Errc::missing_key, "status"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k != "msg_id" && k != "status" && k != "msg_JSON" && k != "ctrl")
      return Error{Errc::extra_key, k};
  }

  Envelope e;
  if (!j["msg_id"].is_string()) return Error{Errc::bad_type, "msg_id must be a string"};
  e.msg_id = j["msg_id"].get<std::string>();
  if (!decimal_string(e.msg_id)) return Error{Errc::bad_type, "msg_id must be a decimal string"};

  if (!j["status"].is_number_integer()) return Error{Errc::bad_type, "status must be an integer"};
  const int code = j["status"].get<int>();
  if (!status_known(code)) return Error{Errc::unknown_status, std::to_string(code)};
  e.status = static_cast<Status>(code);

  if (j.contains("msg_JSON") && j.contains("ctrl"))
    return Error{Errc::extra_key, "both msg_JSON and ctrl present"};
  if (j.contains("msg_JSON")) e.msg_json = j["msg_JSON"];
  if (j.contains("ctrl")) {
    if (!j["ctrl"].is_object()) return Error{Errc::bad_type, "ctrl must be an object"};
    e.ctrl = j["ctrl"];
  }
  return e;
}

}  // namespace flux
