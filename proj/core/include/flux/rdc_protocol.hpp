// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "flux/schema.hpp"

namespace flux {

/// Serving endpoint names on a discovery component. Every middleware also
/// defines matching client request endpoints (k*Client in middleware.hpp).
inline constexpr const char* kRdcRegisterEndpoint = "rdc_register";
inline constexpr const char* kRdcLookupEndpoint = "rdc_lookup";
inline constexpr const char* kRdcDeregisterEndpoint = "rdc_deregister";

// Manifests and queries travel JSON-encoded in string fields: the closed
// property lists of MessageSchema cannot type arbitrary nested manifests,
// and discovery endpoints are regular schema-checked request endpoints.
const MessageSchema& rdc_register_request_schema();   // {manifest, ttl_s}
const MessageSchema& rdc_register_reply_schema();     // {ok, error?}
const MessageSchema& rdc_lookup_request_schema();     // {query}
const MessageSchema& rdc_lookup_reply_schema();       // {ok, manifests, error?}
const MessageSchema& rdc_deregister_request_schema(); // {component_id}
const MessageSchema& rdc_deregister_reply_schema();   // {ok, error?}

}  // namespace flux
