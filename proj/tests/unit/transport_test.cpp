// SPDX-License-Identifier: Apache-2.0
#include "flux/transport.hpp"

#include <doctest.h>

#include <thread>

using namespace flux;
using namespace std::chrono_literals;

TEST_CASE("parse_address splits host:port") {
  auto ok = parse_address("127.0.0.1:8080");
  REQUIRE(ok.ok());
  CHECK(ok.value().first == "127.0.0.1");
  CHECK(ok.value().second == 8080);
  CHECK_FALSE(parse_address("noport").ok());
  CHECK_FALSE(parse_address(":1").ok());
  CHECK_FALSE(parse_address("h:").ok());
  CHECK_FALSE(parse_address("h:99999").ok());
  CHECK_FALSE(parse_address("h:12x").ok());
}

TEST_CASE("loopback round-trips frames byte-identically") {
  auto transport = make_loopback_transport();
  auto listener = transport->listen("127.0.0.1:0");
  REQUIRE(listener.ok());
  const std::string addr = listener.value()->address();

  auto client = transport->connect(addr);
  REQUIRE(client.ok());
  auto server = listener.value()->accept(1000ms);
  REQUIRE(server.ok());

  REQUIRE(client.value()->send_frame(Frame{"abc"}).ok());
  auto got = server.value()->recv_frame(1000ms);
  REQUIRE(got.ok());
  CHECK(got.value().body == "abc");

  // and the other direction
  REQUIRE(server.value()->send_frame(Frame{std::string("\x00\x01\x02", 3)}).ok());
  auto back = client.value()->recv_frame(1000ms);
  REQUIRE(back.ok());
  CHECK(back.value().body == std::string("\x00\x01\x02", 3));

  client.value()->close();
  CHECK(server.value()->recv_frame(1000ms).error().code == Errc::channel_closed);
}

TEST_CASE("loopback: bind conflicts and connect to nowhere") {
  auto transport = make_loopback_transport();
  auto a = transport->listen("127.0.0.1:7777");
  REQUIRE(a.ok());
  auto b = transport->listen("127.0.0.1:7777");
  REQUIRE_FALSE(b.ok());
  CHECK(b.error().code == Errc::bind_failure);
  a.value()->close();
  auto c = transport->connect("127.0.0.1:7777");
  REQUIRE_FALSE(c.ok());
  CHECK(c.error().code == Errc::connect_refused);
}

TEST_CASE("tcp delivers many frames in order") {
  auto transport = make_tcp_transport();
  auto listener = transport->listen("127.0.0.1:0");
  REQUIRE(listener.ok());

  constexpr int kFrames = 2000;
  const std::string payload(3500, 'q');

  std::thread sender([&] {
    auto ch = transport->connect(listener.value()->address());
    REQUIRE(ch.ok());
    for (int i = 0; i < kFrames; ++i) {
      Frame f;
      f.body = std::to_string(i) + "|" + payload;
      REQUIRE(ch.value()->send_frame(f).ok());
    }
    // keep open until the reader drains
    std::this_thread::sleep_for(300ms);
    ch.value()->close();
  });

  auto server = listener.value()->accept(2000ms);
  REQUIRE(server.ok());
  for (int i = 0; i < kFrames; ++i) {
    auto f = server.value()->recv_frame(2000ms);
    REQUIRE(f.ok());
    const std::string want = std::to_string(i) + "|";
    CHECK(f.value().body.substr(0, want.size()) == want);
  }
  sender.join();
}

TEST_CASE("tcp connect to a dead port is refused") {
  auto transport = make_tcp_transport();
  auto listener = transport->listen("127.0.0.1:0");
  REQUIRE(listener.ok());
  const std::string addr = listener.value()->address();
  listener.value()->close();
  auto ch = transport->connect(addr);
  CHECK_FALSE(ch.ok());
}

TEST_CASE("udp carries one frame per datagram and rejects oversize frames") {
  auto transport = make_udp_transport();
  CHECK_FALSE(transport->reliable());
  auto listener = transport->listen("127.0.0.1:0");
  REQUIRE(listener.ok());

  auto client = transport->connect(listener.value()->address());
  REQUIRE(client.ok());

  // a 1 MB frame exceeds the udp module cap
  Frame big;
  big.body.assign(1u << 20, 'x');
  auto r = client.value()->send_frame(big);
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().code == Errc::frame_too_large);

  REQUIRE(client.value()->send_frame(Frame{"ping"}).ok());
  auto server = listener.value()->accept(2000ms);
  REQUIRE(server.ok());
  auto got = server.value()->recv_frame(2000ms);
  REQUIRE(got.ok());
  CHECK(got.value().body == "ping");

  REQUIRE(server.value()->send_frame(Frame{"pong"}).ok());
  auto back = client.value()->recv_frame(2000ms);
  REQUIRE(back.ok());
  CHECK(back.value().body == "pong");
}

TEST_CASE("max frame sizes per module") {
  CHECK(make_tcp_transport()->max_frame() == 16u * 1024 * 1024);
  CHECK(make_loopback_transport()->max_frame() == 16u * 1024 * 1024);
  CHECK(make_udp_transport()->max_frame() == 60u * 1024);
}
