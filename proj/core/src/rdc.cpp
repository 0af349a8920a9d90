// SPDX-License-Identifier: Apache-2.0
#include "flux/rdc.hpp"

#include <fstream>

namespace flux {

namespace {

std::int64_t default_clock() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

RdcCatalog::RdcCatalog(Clock clock) : clock_(clock ? std::move(clock) : default_clock) {}

Result<void> RdcCatalog::upsert(const Manifest& m, int ttl_s) {
  if (auto r = m.check(); !r) return r;
  if (ttl_s < kRdcMinTtlS || ttl_s > kRdcMaxTtlS)
    return Error{Errc::bad_ttl, "ttl_s must be in [1, 86400]"};
  const std::int64_t now = clock_();
  std::lock_guard lk(mu_);
  auto it = records_.find(m.component_id);
  if (it == records_.end()) {
    records_[m.component_id] = RdcRecord{m, now, now, ttl_s};
  } else {
    it->second.manifest = m;
    it->second.refreshed_at_ms = now;
    it->second.ttl_s = ttl_s;
  }
  return {};
}

Result<void> RdcCatalog::deregister(const std::string& component_id) {
  std::lock_guard lk(mu_);
  if (records_.erase(component_id) == 0)
    return Error{Errc::unknown_component, component_id};
  return {};
}

Result<std::vector<Manifest>> RdcCatalog::lookup(const Query& q) const {
  const std::int64_t now = clock_();
  std::lock_guard lk(mu_);
  std::vector<Manifest> out;
  for (const auto& [id, rec] : records_) {  // std::map: ascending component_id
    if (!rec.live(now)) continue;
    auto m = manifest_matches(rec.manifest, q);
    if (!m) return m.error();
    if (m.value()) out.push_back(rec.manifest);
  }
  return out;
}

std::size_t RdcCatalog::size() const {
  std::lock_guard lk(mu_);
  return records_.size();
}

std::vector<RdcRecord> RdcCatalog::records() const {
  std::lock_guard lk(mu_);
  std::vector<RdcRecord> out;
  for (const auto& [id, rec] : records_) out.push_back(rec);
  return out;
}

json RdcCatalog::snapshot() const {
  std::lock_guard lk(mu_);
  json arr = json::array();
  for (const auto& [id, rec] : records_) {
    json r;
    r["manifest"] = rec.manifest.to_json();
    r["ttl_s"] = rec.ttl_s;
    arr.push_back(std::move(r));
  }
  json snap;
  snap["records"] = std::move(arr);
  return snap;
}

Result<void> RdcCatalog::restore(const json& snap) {
  if (!snap.is_object() || !snap.contains("records") || !snap["records"].is_array())
    return Error{Errc::bad_args, "snapshot needs a records array"};
  for (const auto& r : snap["records"]) {
    if (!r.is_object() || !r.contains("manifest")) continue;
    auto m = Manifest::from_json(r["manifest"]);
    if (!m) continue;
    (void)upsert(m.value(), r.value("ttl_s", kRdcDefaultTtlS));
  }
  return {};
}

RdcService::RdcService(RdcServiceConfig cfg) : cfg_(std::move(cfg)), catalog_(cfg_.clock) {
  MiddlewareConfig mc;
  mc.component_id = cfg_.component_id;
  mc.metadata["kind"] = "rdc";
  mc.transports = {cfg_.listen_module};
  if (cfg_.listen_module != "loopback") mc.transports.push_back("loopback");
  mc.listen = {{cfg_.listen_module, cfg_.listen_address}};
  mc.credentials = cfg_.credentials;
  mc.acl = cfg_.acl;
  if (mc.acl.empty()) {
    // discovery is open to any peer that can authenticate
    mc.acl.push_back(AclEntry{"*", "map", "*"});
  }
  node_ = std::make_unique<Middleware>(std::move(mc));

  EndpointDescriptor reg;
  reg.name = kRdcRegisterEndpoint;
  reg.type = EndpointType::response;
  reg.msg_schema = rdc_register_request_schema();
  reg.reply_schema = rdc_register_reply_schema();
  (void)node_->define_endpoint(reg);

  EndpointDescriptor lookup;
  lookup.name = kRdcLookupEndpoint;
  lookup.type = EndpointType::response;
  lookup.msg_schema = rdc_lookup_request_schema();
  lookup.reply_schema = rdc_lookup_reply_schema();
  (void)node_->define_endpoint(lookup);

  EndpointDescriptor dereg;
  dereg.name = kRdcDeregisterEndpoint;
  dereg.type = EndpointType::response;
  dereg.msg_schema = rdc_deregister_request_schema();
  dereg.reply_schema = rdc_deregister_reply_schema();
  (void)node_->define_endpoint(dereg);

  node_->on_request(kRdcRegisterEndpoint, [this](const json& req) -> json {
    json reply;
    auto m = Manifest::parse(req["manifest"].get<std::string>());
    if (!m) {
      reply["ok"] = false;
      reply["error"] = std::string(errc_name(Errc::malformed_manifest));
      return reply;
    }
    const double ttl = req["ttl_s"].get<double>();
    auto r = catalog_.upsert(m.value(), static_cast<int>(ttl));
    reply["ok"] = r.ok();
    if (!r) reply["error"] = std::string(errc_name(r.error().code));
    return reply;
  });

  node_->on_request(kRdcLookupEndpoint, [this](const json& req) -> json {
    json reply;
    auto q = Query::parse(req["query"].get<std::string>());
    if (!q) {
      reply["ok"] = false;
      reply["manifests"] = json::array();
      reply["error"] = std::string(errc_name(Errc::invalid_query));
      return reply;
    }
    auto result = catalog_.lookup(q.value());
    if (!result) {
      reply["ok"] = false;
      reply["manifests"] = json::array();
      reply["error"] = std::string(errc_name(result.error().code));
      return reply;
    }
    json arr = json::array();
    for (const auto& m : result.value()) arr.push_back(m.dump());
    reply["ok"] = true;
    reply["manifests"] = std::move(arr);
    return reply;
  });

  node_->on_request(kRdcDeregisterEndpoint, [this](const json& req) -> json {
    json reply;
    auto r = catalog_.deregister(req["component_id"].get<std::string>());
    reply["ok"] = r.ok();
    if (!r) reply["error"] = std::string(errc_name(r.error().code));
    return reply;
  });

  if (!cfg_.snapshot_path.empty()) {
    std::ifstream in(cfg_.snapshot_path);
    if (in) {
      std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      json snap = json::parse(text, nullptr, false);
      if (!snap.is_discarded()) (void)catalog_.restore(snap);
    }
  }
}

RdcService::~RdcService() { shutdown(); }

void RdcService::shutdown() {
  if (!node_) return;
  if (!cfg_.snapshot_path.empty() && !node_->terminated()) {
    std::ofstream out(cfg_.snapshot_path, std::ios::trunc);
    if (out) out << catalog_.snapshot().dump() << "\n";
  }
  node_->shutdown();
}

std::string RdcService::address() const {
  for (const auto& [module, addr] : node_->listen_addresses()) {
    if (module == cfg_.listen_module) return addr;
  }
  return {};
}

}  // namespace flux
