#include "twinarch/adapters.hpp"

#include <cstdio>

#include "twinarch/error.hpp"

namespace twinarch {

namespace {

std::string excerpt(std::string_view raw) {
  std::string out;
  for (char c : raw.substr(0, 40)) {
    const auto u = static_cast<unsigned char>(c);
    if (u >= 0x20 && u < 0x7f) {
      out += c;
    } else {
      char buf[8];
      std::snprintf(buf, sizeof buf, "\\x%02x", u);
      out += buf;
    }
  }
  if (raw.size() > 40) out += "...";
  return out;
}

std::map<std::string, std::string> string_map(const json& j, const char* what) {
  std::map<std::string, std::string> out;
  if (j.is_null()) return out;
  if (!j.is_object()) fail(ErrorCode::ConfigError, std::string(what) + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) fail(ErrorCode::ConfigError, std::string(what) + "." + k + " must be a string");
    out[k] = v.get<std::string>();
  }
  return out;
}

}  // namespace

bool DeviceFilter::accepts(const DeviceInfo& device) const noexcept {
  for (const auto& [k, v] : required) {
    auto it = device.attributes.find(k);
    if (it == device.attributes.end() || it->second != v) return false;
  }
  return true;
}

AdapterConfig adapter_config_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::ConfigError, "adapter config must be an object");
  AdapterConfig cfg;
  const std::string dir = j.value("direction", std::string("P2D"));
  if (dir == "P2D") {
    cfg.direction = Direction::P2D;
  } else if (dir == "D2P") {
    cfg.direction = Direction::D2P;
  } else {
    fail(ErrorCode::ConfigError, "direction must be P2D or D2P");
  }
  auto fmt = wire_format_from_string(j.value("format", std::string("ultralight")));
  if (!fmt) fail(ErrorCode::ConfigError, "unknown wire format");
  cfg.format = *fmt;
  cfg.filter.required = string_map(j.value("filter", json()), "filter");
  cfg.attribute_map = string_map(j.value("attributeMap", json()), "attributeMap");
  if (auto m = j.find("dtdlModel"); m != j.end()) {
    cfg.dtdl_model = m->is_string() ? m->get<std::string>() : m->dump();
  }
  cfg.command_device = j.value("commandDevice", std::string());
  if (auto devs = j.find("devices"); devs != j.end()) {
    if (!devs->is_object()) fail(ErrorCode::ConfigError, "devices must be an object");
    for (const auto& [id, d] : devs->items()) {
      if (!d.is_object()) fail(ErrorCode::ConfigError, "device " + id + " must be an object");
      DeviceInfo info;
      info.entity_id = d.value("entityId", id);
      info.entity_type = d.value("entityType", std::string());
      info.attributes = string_map(d.value("attributes", json()), "device attributes");
      cfg.devices[id] = std::move(info);
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// P2D

P2DAdapter::P2DAdapter(AdapterConfig cfg, DataManager& data) : cfg_(std::move(cfg)), data_(data) {
  if (cfg_.direction != Direction::P2D) fail(ErrorCode::ConfigError, "P2DAdapter needs direction P2D");
}

std::vector<Measurement> P2DAdapter::decode(std::string_view raw, const std::string& device_id,
                                            TimePoint now, std::size_t* parse_failed) const {
  std::size_t failed = 0;
  std::vector<Measurement> out;
  try {
    switch (cfg_.format) {
      case WireFormat::Ultralight: {
        for (const auto& [key, token] : split_ultralight(raw)) {
          auto attr = cfg_.attribute_map.find(key);
          auto value = ultralight_value(token);
          if (attr == cfg_.attribute_map.end() || !value) {
            ++failed;
            continue;
          }
          Measurement m;
          m.entity_id = device_id;
          m.attribute = attr->second;
          m.value = *value;
          m.observed_at = now;
          m.source = Source::Ultralight;
          out.push_back(std::move(m));
        }
        break;
      }
      case WireFormat::DittoThing:
        out = to_measurements(parse_ditto_thing(raw), Source::DittoThing, now);
        break;
      case WireFormat::DtdlTelemetry:
        out = parse_dtdl_telemetry(cfg_.dtdl_model, raw, device_id, now);
        break;
      case WireFormat::NgsiLd:
        out = to_measurements(parse_ngsi_ld(raw), Source::NgsiLd, now);
        break;
    }
  } catch (const Error& e) {
    fail(ErrorCode::ParseError, std::string(e.what()) + " in payload '" + excerpt(raw) + "'");
  }
  if (parse_failed) *parse_failed = failed;
  return out;
}

IngestReceipt P2DAdapter::ingest(std::string_view raw, const std::string& device_id, TimePoint now) {
  IngestReceipt r;
  std::vector<Measurement> ms = decode(raw, device_id, now, &r.parse_failed);

  // Device lookup: explicit device id first, else the entity id carried in the payload.
  std::string dev = device_id;
  if (dev.empty() && !ms.empty()) dev = ms.front().entity_id;
  const DeviceInfo* info = nullptr;
  if (auto it = cfg_.devices.find(dev); it != cfg_.devices.end()) {
    info = &it->second;
  } else {
    for (const auto& [id, d] : cfg_.devices) {
      if (!ms.empty() && d.entity_id == ms.front().entity_id) info = &d;
    }
  }
  if (!info || !cfg_.filter.accepts(*info)) {
    r.rejected = ms.size();
  } else {
    for (auto& m : ms) {
      if (cfg_.format == WireFormat::Ultralight || cfg_.format == WireFormat::DtdlTelemetry) {
        m.entity_id = info->entity_id;
        if (!info->entity_type.empty()) m.entity_type = info->entity_type;
      } else if (m.entity_type.empty()) {
        m.entity_type = info->entity_type;
      }
    }
    StoreStats st = data_.store_measurements(std::move(ms));
    r.stored = st.stored;
    r.rejected = st.rejected;
    r.committed = std::move(st.committed);
  }
  totals_.stored += r.stored;
  totals_.rejected += r.rejected;
  totals_.parse_failed += r.parse_failed;
  return r;
}

// ---------------------------------------------------------------------------
// D2P

D2PAdapter::D2PAdapter(AdapterConfig cfg, DataReceiverPort& receiver)
    : cfg_(std::move(cfg)), receiver_(receiver) {
  if (cfg_.direction != Direction::D2P) fail(ErrorCode::ConfigError, "D2PAdapter needs direction D2P");
}

std::string D2PAdapter::next_correlation_id() {
  char buf[32];
  std::snprintf(buf, sizeof buf, "cmd-%06zu", ++counter_);
  return buf;
}

std::vector<OutboundCommand> D2PAdapter::commands_for(const Plan& plan, TimePoint now) {
  std::vector<OutboundCommand> out;
  for (const auto& a : plan.actions) {
    if (a.name.empty()) fail(ErrorCode::Unrepresentable, "action without a name");
    if (!a.args.is_object()) fail(ErrorCode::Unrepresentable, "action args must be an object");
    OutboundCommand c;
    c.target_device = cfg_.command_device.empty() ? plan.entity_id : cfg_.command_device;
    c.command_name = a.name;
    c.args = a.args;
    if (!a.target.empty()) c.args["target"] = a.target;
    c.issued_at = now;
    c.correlation_id = next_correlation_id();
    out.push_back(std::move(c));
  }
  return out;
}

std::string D2PAdapter::alert_payload(const Alert& alert, TimePoint now) {
  ordered_json j;
  j["type"] = "alert";
  j["message"] = alert.message;
  j["severity"] = to_string(alert.severity);
  j["correlationId"] = alert.correlation_id.empty() ? next_correlation_id() : alert.correlation_id;
  j["issuedAt"] = format_rfc3339(now);
  return dump_json(j);
}

std::vector<Delivery> D2PAdapter::emit(Feedback& fb, TimePoint now) {
  std::vector<std::string> payloads;
  if (auto* alert = std::get_if<Alert>(&fb.body)) {
    payloads.push_back(alert_payload(*alert, now));
  } else {
    auto& cp = std::get<CommandPlan>(fb.body);
    if (cp.plan.actions.empty()) fail(ErrorCode::Unrepresentable, "command plan without actions");
    cp.commands = commands_for(cp.plan, now);
    for (const auto& c : cp.commands) payloads.push_back(encode_command(c));
  }
  std::vector<Delivery> out;
  for (auto& p : payloads) {
    Ack ack = receiver_.deliver(p);
    ++emitted_;
    if (!ack.ok) fail(ErrorCode::DeliveryFailed, "receiver rejected payload: " + ack.reason);
    out.push_back(Delivery{std::move(p), std::move(ack)});
  }
  return out;
}

}  // namespace twinarch
