// SPDX-License-Identifier: Apache-2.0
#include "flux/rdc_protocol.hpp"

namespace flux {

const MessageSchema& rdc_register_request_schema() {
  static const MessageSchema s = [] {
    MessageSchema m;
    (void)m.add_property("manifest", FieldType::string_type(), true);
    (void)m.add_property("ttl_s", FieldType::number_type(), true);
    return m;
  }();
  return s;
}

const MessageSchema& rdc_register_reply_schema() {
  static const MessageSchema s = [] {
    MessageSchema m;
    (void)m.add_property("error", FieldType::string_type(), false);
    (void)m.add_property("ok", FieldType::boolean_type(), true);
    return m;
  }();
  return s;
}

const MessageSchema& rdc_lookup_request_schema() {
  static const MessageSchema s = [] {
    MessageSchema m;
    (void)m.add_property("query", FieldType::string_type(), true);
    return m;
  }();
  return s;
}

const MessageSchema& rdc_lookup_reply_schema() {
  static const MessageSchema s = [] {
    MessageSchema m;
    (void)m.add_property("error", FieldType::string_type(), false);
    (void)m.add_property("manifests", FieldType::array_type(FieldType::string_type()), true);
    (void)m.add_property("ok", FieldType::boolean_type(), true);
    return m;
  }();
  return s;
}

const MessageSchema& rdc_deregister_request_schema() {
  static const MessageSchema s = [] {
    MessageSchema m;
    (void)m.add_property("component_id", FieldType::string_type(), true);
    return m;
  }();
  return s;
}

const MessageSchema& rdc_deregister_reply_schema() { return rdc_register_reply_schema(); }

}  // namespace flux
