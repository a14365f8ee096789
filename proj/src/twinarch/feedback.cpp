#include "twinarch/feedback.hpp"

#include "twinarch/data_model.hpp"
#include "twinarch/error.hpp"

namespace twinarch {

std::string_view to_string(Severity s) noexcept {
  switch (s) {
    case Severity::Info: return "Info";
    case Severity::Warning: return "Warning";
    case Severity::Critical: return "Critical";
  }
  return "Info";
}

std::optional<Severity> severity_from_string(std::string_view s) noexcept {
  if (s == "Info") return Severity::Info;
  if (s == "Warning") return Severity::Warning;
  if (s == "Critical") return Severity::Critical;
  return std::nullopt;
}

json to_json(const Action& a) {
  json j{{"name", a.name}, {"args", a.args}};
  if (!a.target.empty()) j["target"] = a.target;
  return j;
}

Action action_from_json(const json& j) {
  if (!j.is_object() || !j.contains("name") || !j["name"].is_string()) {
    fail(ErrorCode::ConfigError, "action needs a string name");
  }
  Action a;
  a.name = j["name"].get<std::string>();
  if (auto t = j.find("target"); t != j.end()) {
    if (!t->is_string()) fail(ErrorCode::ConfigError, "action target must be a string");
    a.target = t->get<std::string>();
  }
  if (auto args = j.find("args"); args != j.end()) {
    if (!args->is_object()) fail(ErrorCode::ConfigError, "action args must be an object");
    a.args = *args;
  }
  return a;
}

json to_json(const Plan& p) {
  json actions = json::array();
  for (const auto& a : p.actions) actions.push_back(to_json(a));
  return json{{"planId", p.plan_id},
              {"entity", p.entity_id},
              {"actions", actions},
              {"expectedObjective", p.expected_objective},
              {"scenarioIds", p.scenario_ids},
              {"correlationId", p.correlation_id}};
}

ordered_json to_envelope(const OutboundCommand& c) {
  ordered_json j;
  j["device"] = c.target_device;
  j["command"] = c.command_name;
  j["args"] = ordered_json::parse(c.args.dump());
  j["correlationId"] = c.correlation_id;
  j["issuedAt"] = format_rfc3339(c.issued_at);
  return j;
}

std::string encode_command(const OutboundCommand& c) { return dump_json(to_envelope(c)); }

OutboundCommand decode_command(std::string_view payload) {
  json j = json::parse(payload.begin(), payload.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(ErrorCode::MalformedCommand, "command is not a JSON object");
  auto str = [&](const char* name) -> std::string {
    auto it = j.find(name);
    if (it == j.end() || !it->is_string()) {
      fail(ErrorCode::MalformedCommand, std::string("command lacks string field ") + name);
    }
    return it->get<std::string>();
  };
  OutboundCommand c;
  c.target_device = str("device");
  c.command_name = str("command");
  if (c.command_name.empty()) fail(ErrorCode::MalformedCommand, "empty command name");
  c.correlation_id = str("correlationId");
  auto issued = parse_rfc3339(str("issuedAt"));
  if (!issued) fail(ErrorCode::MalformedCommand, "issuedAt is not RFC 3339");
  c.issued_at = *issued;
  auto args = j.find("args");
  if (args == j.end() || !args->is_object()) fail(ErrorCode::MalformedCommand, "args must be an object");
  c.args = *args;
  return c;
}

json to_json(const Feedback& f) {
  if (const auto* a = std::get_if<Alert>(&f.body)) {
    return json{{"kind", "alert"},
                {"message", a->message},
                {"severity", to_string(a->severity)},
                {"correlationId", f.correlation_id}};
  }
  const auto& cp = std::get<CommandPlan>(f.body);
  json cmds = json::array();
  for (const auto& c : cp.commands) cmds.push_back(json::parse(encode_command(c)));
  return json{{"kind", "commandPlan"},
              {"plan", to_json(cp.plan)},
              {"commands", cmds},
              {"correlationId", f.correlation_id}};
}

}  // namespace twinarch
