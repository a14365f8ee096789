#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace twinarch {

using nlohmann::json;

struct TraceEvent {
  int tick = 0;
  std::uint64_t seq = 0;
  std::string from;
  std::string to;
  std::string message;
  std::string digest;  // FNV-1a 64 of the compact payload JSON, hex

  bool operator==(const TraceEvent&) const = default;
};

std::string fnv1a_hex(std::string_view bytes);

class InteractionTrace {
 public:
  const TraceEvent& record(int tick, std::string from, std::string to, std::string message,
                           const json& payload = json::object());

  const std::vector<TraceEvent>& events() const noexcept { return events_; }
  std::vector<TraceEvent>& events() noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }

  /// One `{tick, seq, from, to, message, digest}` object per line.
  std::string to_jsonl() const;
  static InteractionTrace from_jsonl(std::string_view text);  // throws ParseError
  void write(const std::filesystem::path& path) const;
  static InteractionTrace read(const std::filesystem::path& path);

  /// Digest over all event digests and labels.
  std::string digest() const;

 private:
  std::vector<TraceEvent> events_;
  std::uint64_t next_seq_ = 0;
};

struct TemplateNode {
  enum class Kind { Step, Optional, Repeat, Choice };
  Kind kind = Kind::Step;
  std::string from, to, message;                 // Step
  int min = 0;                                  // Repeat
  std::vector<TemplateNode> body;               // Optional / Repeat
  std::vector<std::vector<TemplateNode>> alts;  // Choice
};

struct SequenceTemplate {
  std::string name;
  std::string loop;           // monitoring | prediction
  bool per_tick = true;        // one instance per tick, else one per run
  std::vector<TemplateNode> steps;
};

SequenceTemplate template_from_json(const json& j);  // throws ConfigError
json to_json(const SequenceTemplate& t);

const SequenceTemplate& monitoring_template();
const SequenceTemplate& prediction_template();
/// Throws ConfigError for unknown loop names.
const SequenceTemplate& template_for(std::string_view loop);

struct Verdict {
  bool pass = false;
  std::size_t instances = 0;
  std::optional<std::size_t> divergence;  // index into the trace
  std::optional<TraceEvent> event;
  std::string reason;
  std::vector<std::string> expected;  // labels acceptable at the divergence

  json to_json() const;
};

/// Pass iff the trace is an in-order sequence of template instances, element
/// names come from the catalog, and (tick, seq) strictly increases. With
/// `expected_instances`, the instance count must match as well.
Verdict check_trace(const InteractionTrace& trace, const SequenceTemplate& tmpl,
                    std::optional<std::size_t> expected_instances = std::nullopt);

}  // namespace twinarch
