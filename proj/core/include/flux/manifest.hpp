// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flux/schema.hpp"

namespace flux {

/// Communication kind of an endpoint. Pairing across components:
/// source<->sink, request<->response, response_plus_client<->
/// response_plus_server, stream_source<->stream_sink.
enum class EndpointType {
  source,
  sink,
  request,
  response,
  response_plus_server,
  response_plus_client,
  stream_source,
  stream_sink,
};

std::string_view endpoint_type_name(EndpointType t);
std::optional<EndpointType> endpoint_type_from_name(std::string_view name);
bool endpoint_types_pair(EndpointType a, EndpointType b);
bool endpoint_type_is_stream(EndpointType t);
bool endpoint_type_is_request_kind(EndpointType t);

struct EndpointDescriptor {
  std::string name;
  EndpointType type = EndpointType::source;
  std::optional<MessageSchema> msg_schema;    // absent for stream_*
  std::optional<MessageSchema> reply_schema;  // request/response kinds only

  Result<void> check() const;
  json to_json() const;
  static Result<EndpointDescriptor> from_json(const json& j);
};

/// The component's externally shared self-description: identity, addresses,
/// active modules, declared identities, user metadata and endpoint
/// descriptors. Serialization is canonical (sorted keys) so it round-trips
/// byte-stably across the wire.
struct Manifest {
  std::string component_id;
  std::vector<std::pair<std::string, std::string>> addresses;   // (module, "host:port")
  std::vector<std::string> comm_modules;
  std::vector<std::string> access_modules;
  std::vector<std::pair<std::string, std::string>> identities;  // (module, principal)
  std::map<std::string, std::string> metadata;
  std::vector<EndpointDescriptor> endpoints;

  Result<void> check() const;
  const EndpointDescriptor* find_endpoint(const std::string& name) const;

  json to_json() const;
  std::string dump() const { return to_json().dump(); }
  static Result<Manifest> from_json(const json& j);
  static Result<Manifest> parse(const std::string& text);
};

/// Returns a copy with metadata[key] = value (last writer wins).
Manifest manifest_add(const Manifest& m, const std::string& key, const std::string& value);

}  // namespace flux
