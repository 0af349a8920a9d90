// SPDX-License-Identifier: Apache-2.0
#include "flux/envelope.hpp"

#include <doctest.h>

#include "flux/transport.hpp"
#include "generators.hpp"

using namespace flux;

namespace {

Envelope random_envelope(fluxtest::Gen& gen) {
  Envelope e;
  e.msg_id = std::to_string(gen.range(0, 1000000));
  const int status = gen.range(1, 15);
  e.status = static_cast<Status>(status);
  if (gen.chance(0.7)) {
    e.msg_json = gen.object(2);
  } else if (gen.chance(0.5)) {
    e.ctrl = gen.object(1);
  }
  return e;
}

}  // namespace

TEST_CASE("gps figure envelope encodes key-for-key") {
  json payload;
  payload["position"] = "41.24'12.2\"N 2.10'26.5\"E";
  payload["date"] = "2012-04-23T18:25:43.511Z";
  const Envelope e = Envelope::make_data(13, Status::data, payload);

  const std::string bytes = encode_envelope(e);
  CHECK(bytes ==
        "{\"msg_id\":\"13\",\"status\":9,\"msg_JSON\":{"
        "\"position\":\"41.24'12.2\\\"N 2.10'26.5\\\"E\","
        "\"date\":\"2012-04-23T18:25:43.511Z\"}}");

  // decoder is whitespace-tolerant: the pretty-printed figure layout decodes
  // to the same envelope
  const std::string figure =
      "{ \n"
      "   \"msg_id\": \"13\",\n"
      "   \"status\": 9, \n"
      "   \"msg_JSON\": {\n"
      "     \"position\": \"41.24'12.2\\\"N 2.10'26.5\\\"E\", \n"
      "     \"date\": \"2012-04-23T18:25:43.511Z\" }\n"
      "  }";
  auto decoded = decode_envelope(figure);
  REQUIRE(decoded.ok());
  CHECK(decoded.value() == e);
}

TEST_CASE("envelope round-trip is the identity") {
  Envelope e;
  e.msg_id = "0";
  e.status = Status::unmap;
  e.msg_json = json::object();
  auto back = decode_envelope(encode_envelope(e));
  REQUIRE(back.ok());
  CHECK(back.value() == e);

  fluxtest::Gen gen(99);
  for (int i = 0; i < 2000; ++i) {
    const Envelope env = random_envelope(gen);
    auto r = decode_envelope(encode_envelope(env));
    REQUIRE(r.ok());
    CHECK(r.value() == env);
  }
}

TEST_CASE("decode errors are distinct variants") {
  CHECK(decode_envelope("\xff\xfe{}").error().code == Errc::invalid_utf8);
  CHECK(decode_envelope("not json at all").error().code == Errc::not_json);
  CHECK(decode_envelope("[1,2,3]").error().code == Errc::not_an_object);
  SUBCASE("missing keys") {
    auto r = decode_envelope(R"({"status":9})");
    REQUIRE_FALSE(r.ok());
    CHECK(r.error().code == Errc::missing_key);
    CHECK(r.error().detail == "msg_id");
    CHECK(decode_envelope(R"({"msg_id":"1"})").error().code == Errc::missing_key);
  }
  CHECK(decode_envelope(R"({"msg_id":"1","status":99})").error().code == Errc::unknown_status);
  CHECK(decode_envelope(R"({"msg_id":"1","status":0})").error().code == Errc::unknown_status);
  CHECK(decode_envelope(R"({"msg_id":1,"status":9})").error().code == Errc::bad_type);
  CHECK(decode_envelope(R"({"msg_id":"x1","status":9})").error().code == Errc::bad_type);
  CHECK(decode_envelope(R"({"msg_id":"1","status":"9"})").error().code == Errc::bad_type);
  CHECK(decode_envelope(R"({"msg_id":"1","status":9,"other":1})").error().code == Errc::extra_key);
  CHECK(decode_envelope(R"({"msg_id":"1","status":9,"msg_JSON":{},"ctrl":{}})").error().code ==
        Errc::extra_key);
}

TEST_CASE("status table") {
  CHECK(static_cast<int>(Status::data) == 9);
  CHECK(static_cast<int>(Status::hello) == 1);
  CHECK(static_cast<int>(Status::stream) == 15);
  CHECK(status_known(1));
  CHECK(status_known(15));
  CHECK_FALSE(status_known(0));
  CHECK_FALSE(status_known(16));
  CHECK(status_is_ctrl(Status::hello));
  CHECK(status_is_ctrl(Status::unmap));
  CHECK_FALSE(status_is_ctrl(Status::data));
  CHECK_FALSE(status_is_ctrl(Status::control_request));
}

TEST_CASE("frame encode/decode round-trips and enforces limits") {
  fluxtest::Gen gen(5);
  for (int i = 0; i < 200; ++i) {
    Frame f;
    const int n = gen.range(0, 2000);
    f.body.reserve(n);
    for (int k = 0; k < n; ++k) f.body.push_back(static_cast<char>(gen.range(0, 255)));
    const std::string bytes = f.encode();
    Frame out;
    auto consumed = Frame::try_decode(bytes, kTcpMaxFrame, out);
    REQUIRE(consumed.ok());
    CHECK(consumed.value() == bytes.size());
    CHECK(out.body == f.body);
  }

  // partial input: need more data
  Frame f;
  f.body = "abc";
  const std::string bytes = f.encode();
  Frame out;
  CHECK(Frame::try_decode(std::string_view(bytes).substr(0, 5), kTcpMaxFrame, out).value() == 0);
  CHECK(Frame::try_decode("", kTcpMaxFrame, out).value() == 0);

  // over the module limit
  Frame big;
  big.body.assign(kUdpMaxFrame + 1, 'x');
  auto r = Frame::try_decode(big.encode(), kUdpMaxFrame, out);
  REQUIRE_FALSE(r.ok());
  CHECK(r.error().code == Errc::frame_too_large);
}
