// SPDX-License-Identifier: Apache-2.0
#include "flux/transport.hpp"

#include <cstring>
#include <mutex>

namespace flux {

namespace {
std::mutex tap_mu;
std::function<void(const std::string&)> frame_tap;
}  // namespace

void set_frame_tap(std::function<void(const std::string&)> tap) {
  std::lock_guard lk(tap_mu);
  frame_tap = std::move(tap);
}

void tap_frame(const std::string& body) {
  std::lock_guard lk(tap_mu);
  if (frame_tap) frame_tap(body);
}

std::string Frame::encode() const {
  const std::uint32_t len = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(4 + body.size());
  out.push_back(static_cast<char>((len >> 24) & 0xFF));
  out.push_back(static_cast<char>((len >> 16) & 0xFF));
  out.push_back(static_cast<char>((len >> 8) & 0xFF));
  out.push_back(static_cast<char>(len & 0xFF));
  out += body;
  return out;
}

Result<std::size_t> Frame::try_decode(std::string_view buffer, std::size_t max_frame, Frame& out) {
  if (buffer.size() < 4) return std::size_t{0};
  const auto b = [&](std::size_t i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(buffer[i])); };
  const std::uint32_t len = (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
  if (len > max_frame) return Error{Errc::frame_too_large, std::to_string(len) + " bytes"};
  if (buffer.size() < 4 + static_cast<std::size_t>(len)) return std::size_t{0};
  out.body.assign(buffer.data() + 4, len);
  return std::size_t{4 + len};
}

Result<std::pair<std::string, std::uint16_t>> parse_address(const std::string& address) {
  const std::size_t colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= address.size())
    return Error{Errc::bad_address, "expected \"host:port\", got \"" + address + "\""};
  const std::string host = address.substr(0, colon);
  const std::string port_s = address.substr(colon + 1);
  unsigned long port = 0;
  for (char c : port_s) {
    if (c < '0' || c > '9') return Error{Errc::bad_address, "port must be numeric"};
    port = port * 10 + static_cast<unsigned long>(c - '0');
    if (port > 65535) return Error{Errc::bad_address, "port out of range"};
  }
  return std::make_pair(host, static_cast<std::uint16_t>(port));
}

}  // namespace flux
