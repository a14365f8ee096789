#include "twinarch/harness.hpp"

#include <algorithm>
#include <cmath>

#include "twinarch/error.hpp"
#include "twinarch/simulation.hpp"

namespace twinarch {

namespace {

Scalar flow_scalar(double v) {
  if (std::floor(v) == v && std::fabs(v) < 9007199254740992.0) return Scalar::integer(static_cast<std::int64_t>(v));
  return Scalar::number(v);
}

}  // namespace

HarnessConfig harness_config_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::ConfigError, "harness config must be an object");
  try {
    HarnessConfig c;
    c.device_id = j.value("deviceId", c.device_id);
    if (auto f = j.find("format"); f != j.end()) {
      auto fmt = wire_format_from_string(f->get<std::string>());
      if (!fmt) fail(ErrorCode::ConfigError, "unknown harness format");
      c.format = *fmt;
    }
    c.attribute = j.value("attribute", c.attribute);
    c.key = j.value("key", c.key);
    c.entity_id = j.value("entityId", std::string());
    c.entity_type = j.value("entityType", std::string());
    c.dtmi = j.value("dtmi", c.dtmi);
    c.latency = j.value("latency", 0);
    c.response_gain = j.value("responseGain", c.response_gain);
    c.jitter = j.value("jitter", 0.0);
    c.seed = j.value("seed", std::uint64_t{0});
    if (auto s = j.find("schedule"); s != j.end()) {
      for (const auto& e : *s) c.schedule.push_back({e.at("tick").get<int>(), e.at("flow").get<double>()});
    }
    if (auto fl = j.find("flows"); fl != j.end()) {
      int t = j.value("startTick", 1);
      for (const auto& v : *fl) c.schedule.push_back({t++, v.get<double>()});
    }
    if (auto fs = j.find("faults"); fs != j.end()) {
      for (const auto& f : *fs) {
        Fault fault;
        fault.tick = f.at("tick").get<int>();
        const auto kind = f.at("kind").get<std::string>();
        if (kind == "Drop") fault.kind = FaultKind::Drop;
        else if (kind == "Corrupt") fault.kind = FaultKind::Corrupt;
        else if (kind == "Delay") fault.kind = FaultKind::Delay;
        else fail(ErrorCode::ConfigError, "unknown fault kind " + kind);
        fault.delay = f.value("ticks", 1);
        if (fault.delay < 1) fail(ErrorCode::ConfigError, "delay must be >= 1 tick");
        c.faults.push_back(fault);
      }
    }
    if (auto l = j.find("location"); l != j.end() && !l->is_null()) {
      c.location = GeoPoint{l->at("lat").get<double>(), l->at("lon").get<double>()};
    }
    for (std::size_t i = 1; i < c.schedule.size(); ++i) {
      if (c.schedule[i].tick < c.schedule[i - 1].tick) fail(ErrorCode::ConfigError, "schedule ticks must be non-decreasing");
    }
    if (c.latency < 0) fail(ErrorCode::ConfigError, "latency must be >= 0");
    if (!(c.jitter >= 0 && c.jitter < 1)) fail(ErrorCode::ConfigError, "jitter must be in [0, 1)");
    if (c.device_id.empty()) fail(ErrorCode::ConfigError, "deviceId must not be empty");
    return c;
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("harness config: ") + e.what());
  }
}

PhysicalTwin::PhysicalTwin(HarnessConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
  if (cfg_.entity_id.empty()) cfg_.entity_id = cfg_.device_id;
}

int PhysicalTwin::last_scheduled_tick() const {
  return cfg_.schedule.empty() ? 0 : cfg_.schedule.back().tick;
}

void PhysicalTwin::apply_due(int tick) {
  auto due = std::stable_partition(pending_.begin(), pending_.end(),
                                   [&](const Pending& p) { return p.apply_at > tick; });
  for (auto it = due; it != pending_.end(); ++it) {
    const auto& c = it->command;
    if (c.command_name == "extend-green") {
      state_.green_extension = c.args.at("seconds").get<double>();
    } else if (c.command_name == "divert") {
      state_.divert = c.args.at("fraction").get<double>();
    } else if (c.command_name == "reset") {
      state_.green_extension = 0;
      state_.divert = 0;
    } else if (c.command_name == "echo") {
      if (auto v = Scalar::from_json(c.args.at("value"))) echo_.emplace_back(c.args.at("attribute").get<std::string>(), *v);
    }
    state_.last_correlation_id = c.correlation_id;
    state_.applied_at = tick;
  }
  pending_.erase(due, pending_.end());
}

double PhysicalTwin::response(double scheduled, int tick) {
  apply_due(tick);
  return std::max(0.0, scheduled * (1 - state_.divert) - cfg_.response_gain * state_.green_extension);
}

std::string PhysicalTwin::encode(const std::vector<Measurement>& ms) const {
  if (cfg_.format == WireFormat::Ultralight) {
    SerializeOptions opt;
    opt.ultralight_keys[cfg_.attribute] = cfg_.key;
    for (const auto& m : ms) {
      if (!opt.ultralight_keys.count(m.attribute)) opt.ultralight_keys[m.attribute] = m.attribute;
    }
    return serialize(std::span<const Measurement>(ms), cfg_.format, opt);
  }
  return serialize(std::span<const Measurement>(ms), cfg_.format);
}

std::vector<EmittedPayload> PhysicalTwin::emit(int tick, TimePoint now) {
  tick_ = tick;
  apply_due(tick);
  std::vector<EmittedPayload> produced;

  auto measurement = [&](const std::string& attr, Scalar v) {
    Measurement m;
    m.entity_id = cfg_.entity_id;
    m.entity_type = cfg_.entity_type;
    m.attribute = attr;
    m.value = std::move(v);
    m.observed_at = now;
    if (cfg_.format == WireFormat::NgsiLd) m.location = cfg_.location;
    return m;
  };

  for (const auto& e : cfg_.schedule) {
    if (e.tick != tick) continue;
    double flow = response(e.flow, tick);
    if (cfg_.jitter > 0) flow *= 1 + cfg_.jitter * (2 * TrafficFlowModel::uniform(rng_) - 1);
    std::vector<Measurement> ms{measurement(cfg_.attribute, flow_scalar(flow))};
    produced.push_back(EmittedPayload{tick, tick, encode(ms), flow, false});
  }
  for (auto& [attr, value] : echo_) {
    std::vector<Measurement> ms{measurement(attr, value)};
    produced.push_back(EmittedPayload{tick, tick, encode(ms), value.is_number() ? value.as_number() : 0, false});
  }
  echo_.clear();

  const Fault* fault = nullptr;
  for (const auto& f : cfg_.faults) {
    if (f.tick == tick) {
      fault = &f;
      break;
    }
  }
  std::vector<EmittedPayload> out;
  if (auto it = delayed_.find(tick); it != delayed_.end()) {
    for (auto& p : it->second) {
      p.tick = tick;
      out.push_back(std::move(p));
    }
    delayed_.erase(it);
  }
  if (fault && fault->kind == FaultKind::Drop) return out;
  for (auto& p : produced) {
    if (fault && fault->kind == FaultKind::Delay) {
      delayed_[tick + fault->delay].push_back(std::move(p));
      continue;
    }
    if (fault && fault->kind == FaultKind::Corrupt) {
      for (auto& c : p.payload) c = static_cast<char>(static_cast<unsigned char>(c) ^ 0xA5);
      p.corrupted = true;
    }
    out.push_back(std::move(p));
  }
  return out;
}

Ack PhysicalTwin::deliver(std::string_view payload) { return receive(payload, tick_); }

Ack PhysicalTwin::receive(std::string_view payload, int tick) {
  ++received_;
  Ack ack;
  auto nack = [&](std::string reason) {
    ack.ok = false;
    ack.reason = std::move(reason);
    acks_.push_back(ack);
    return ack;
  };
  // Alert notifications are acknowledged without touching the actuator.
  json j = json::parse(payload.begin(), payload.end(), nullptr, false);
  if (!j.is_discarded() && j.is_object() && j.value("type", std::string()) == "alert") {
    ack.ok = true;
    ack.correlation_id = j.value("correlationId", std::string());
    acks_.push_back(ack);
    return ack;
  }
  OutboundCommand c;
  try {
    c = decode_command(payload);
  } catch (const Error& e) {
    return nack(e.what());
  }
  ack.correlation_id = c.correlation_id;
  if (c.target_device != cfg_.device_id) return nack("unknown device " + c.target_device);
  auto number_arg = [&](const char* name, double lo, double hi) -> bool {
    auto it = c.args.find(name);
    return it != c.args.end() && it->is_number() && it->get<double>() >= lo && it->get<double>() <= hi;
  };
  if (c.command_name == "extend-green") {
    if (!number_arg("seconds", 0, 1e6)) return nack("extend-green needs seconds >= 0");
  } else if (c.command_name == "divert") {
    if (!number_arg("fraction", 0, 1)) return nack("divert needs fraction in [0, 1]");
  } else if (c.command_name == "echo") {
    auto a = c.args.find("attribute");
    auto v = c.args.find("value");
    if (a == c.args.end() || !a->is_string() || v == c.args.end() || !Scalar::from_json(*v)) {
      return nack("echo needs attribute and scalar value");
    }
  } else if (c.command_name != "reset") {
    return nack("unsupported command " + c.command_name);
  }
  pending_.push_back(Pending{tick + 1 + cfg_.latency, std::move(c)});
  ack.ok = true;
  acks_.push_back(ack);
  return ack;
}

}  // namespace twinarch
