#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "twinarch/time.hpp"

namespace twinarch {

using nlohmann::json;
using nlohmann::ordered_json;

enum class Severity { Info, Warning, Critical };

std::string_view to_string(Severity s) noexcept;
std::optional<Severity> severity_from_string(std::string_view s) noexcept;

/// Abstract plan action, e.g. extend-green(target=ElmAvenue, seconds=20).
struct Action {
  std::string name;
  std::string target;
  json args = json::object();

  bool operator==(const Action&) const = default;
};

json to_json(const Action& a);
Action action_from_json(const json& j);

struct Plan {
  std::string plan_id;
  std::string entity_id;
  std::vector<Action> actions;
  double expected_objective = 0;
  std::vector<std::string> scenario_ids;
  std::string correlation_id;  // the triggering deviation

  bool operator==(const Plan&) const = default;
};

json to_json(const Plan& p);

struct Alert {
  std::string message;
  Severity severity = Severity::Info;
  std::string correlation_id;
};

struct OutboundCommand {
  std::string target_device;
  std::string command_name;
  json args = json::object();
  TimePoint issued_at{};
  std::string correlation_id;

  bool operator==(const OutboundCommand&) const = default;
};

/// Envelope `{device, command, args, correlationId, issuedAt}` in that key order.
ordered_json to_envelope(const OutboundCommand& c);
std::string encode_command(const OutboundCommand& c);
/// Throws MalformedCommand unless `payload` is a well-formed envelope.
OutboundCommand decode_command(std::string_view payload);

struct CommandPlan {
  Plan plan;
  std::vector<OutboundCommand> commands;  // filled by the D2P adapter, one per action
};

struct Feedback {
  std::variant<Alert, CommandPlan> body;
  std::string correlation_id;

  bool is_alert() const noexcept { return std::holds_alternative<Alert>(body); }
};

json to_json(const Feedback& f);

}  // namespace twinarch
