#include "twinarch/trace.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "twinarch/catalog.hpp"
#include "twinarch/error.hpp"

namespace twinarch {

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const TraceEvent& InteractionTrace::record(int tick, std::string from, std::string to, std::string message,
                                           const json& payload) {
  TraceEvent e{tick, next_seq_++, std::move(from), std::move(to), std::move(message),
               fnv1a_hex(payload.dump(-1, ' ', false, json::error_handler_t::replace))};
  events_.push_back(std::move(e));
  return events_.back();
}

std::string InteractionTrace::to_jsonl() const {
  std::string out;
  for (const auto& e : events_) {
    nlohmann::ordered_json j;
    j["tick"] = e.tick;
    j["seq"] = e.seq;
    j["from"] = e.from;
    j["to"] = e.to;
    j["message"] = e.message;
    j["digest"] = e.digest;
    out += j.dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

InteractionTrace InteractionTrace::from_jsonl(std::string_view text) {
  InteractionTrace t;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    const auto where = "trace line " + std::to_string(lineno);
    if (j.is_discarded() || !j.is_object()) fail(ErrorCode::ParseError, where + " is not a JSON object");
    try {
      TraceEvent e;
      e.tick = j.at("tick").get<int>();
      e.seq = j.contains("seq") ? j["seq"].get<std::uint64_t>() : t.next_seq_;
      e.from = j.at("from").get<std::string>();
      e.to = j.at("to").get<std::string>();
      e.message = j.at("message").get<std::string>();
      e.digest = j.value("digest", std::string());
      t.next_seq_ = std::max(t.next_seq_, e.seq + 1);
      t.events_.push_back(std::move(e));
    } catch (const json::exception& ex) {
      fail(ErrorCode::ParseError, where + ": " + ex.what());
    }
  }
  return t;
}

void InteractionTrace::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << to_jsonl();
}

InteractionTrace InteractionTrace::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_jsonl(ss.str());
}

std::string InteractionTrace::digest() const { return fnv1a_hex(to_jsonl()); }

// ---------------------------------------------------------------------------
// Templates

namespace {

std::vector<TemplateNode> nodes_from_json(const json& arr);

TemplateNode node_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::ConfigError, "template step must be an object");
  TemplateNode n;
  if (j.contains("optional")) {
    n.kind = TemplateNode::Kind::Optional;
    n.body = nodes_from_json(j["optional"]);
  } else if (j.contains("repeat")) {
    n.kind = TemplateNode::Kind::Repeat;
    n.body = nodes_from_json(j["repeat"]);
    n.min = j.value("min", 0);
    if (n.min < 0) fail(ErrorCode::ConfigError, "repeat min must be >= 0");
  } else if (j.contains("choice")) {
    n.kind = TemplateNode::Kind::Choice;
    if (!j["choice"].is_array() || j["choice"].empty()) fail(ErrorCode::ConfigError, "choice needs alternatives");
    for (const auto& alt : j["choice"]) n.alts.push_back(nodes_from_json(alt));
  } else {
    if (!j.contains("from") || !j.contains("to") || !j.contains("message")) {
      fail(ErrorCode::ConfigError, "template step needs from, to and message");
    }
    n.from = j["from"].get<std::string>();
    n.to = j["to"].get<std::string>();
    n.message = j["message"].get<std::string>();
  }
  return n;
}

std::vector<TemplateNode> nodes_from_json(const json& arr) {
  if (!arr.is_array()) fail(ErrorCode::ConfigError, "template body must be an array");
  std::vector<TemplateNode> out;
  for (const auto& j : arr) out.push_back(node_from_json(j));
  return out;
}

json nodes_to_json(const std::vector<TemplateNode>& nodes) {
  json arr = json::array();
  for (const auto& n : nodes) {
    switch (n.kind) {
      case TemplateNode::Kind::Step:
        arr.push_back(json{{"from", n.from}, {"to", n.to}, {"message", n.message}});
        break;
      case TemplateNode::Kind::Optional: arr.push_back(json{{"optional", nodes_to_json(n.body)}}); break;
      case TemplateNode::Kind::Repeat:
        arr.push_back(json{{"repeat", nodes_to_json(n.body)}, {"min", n.min}});
        break;
      case TemplateNode::Kind::Choice: {
        json alts = json::array();
        for (const auto& a : n.alts) alts.push_back(nodes_to_json(a));
        arr.push_back(json{{"choice", alts}});
        break;
      }
    }
  }
  return arr;
}

// Monitoring loop over domain entities, one instance per tick.
constexpr const char* kMonitoring = R"({
  "name": "monitoring", "loop": "monitoring", "scope": "tick",
  "steps": [
    {"repeat": [
      {"from": "DataProvider", "to": "P2DAdapter", "message": "transmitData"},
      {"choice": [
        [
          {"from": "P2DAdapter", "to": "DataManager", "message": "CRUDop.create"},
          {"choice": [
            [{"from": "ShadowManager", "to": "DataManager", "message": "CRUDop.read"}],
            [{"from": "P2DAdapter", "to": "ShadowManager", "message": "forward"}]
          ]},
          {"from": "ShadowManager", "to": "DigitalShadow", "message": "updateShadow"}
        ],
        [{"from": "P2DAdapter", "to": "P2DAdapter", "message": "filtered"}],
        [{"from": "P2DAdapter", "to": "P2DAdapter", "message": "parseError"}]
      ]}
    ], "min": 0},
    {"repeat": [
      {"from": "TwinManager", "to": "ModelManager", "message": "createOrUpdateModel"},
      {"from": "TwinManager", "to": "DigitalModel", "message": "modelExecution"},
      {"from": "DigitalModel", "to": "DataManager", "message": "storeResults"},
      {"from": "TwinManager", "to": "ServiceManager", "message": "getState"},
      {"from": "ServiceManager", "to": "DataManager", "message": "storeState"},
      {"from": "ServiceManager", "to": "FeedbackProvider", "message": "deliverState"},
      {"optional": [
        {"from": "FeedbackProvider", "to": "D2PAdapter", "message": "feedback"},
        {"from": "D2PAdapter", "to": "DataReceiver", "message": "deliver"}
      ]}
    ], "min": 1}
  ]
})";

// Prediction loop over components, one instance per run: ingestion prelude,
// then a single forecast with its conditional planning block.
constexpr const char* kPrediction = R"({
  "name": "prediction", "loop": "prediction", "scope": "run",
  "steps": [
    {"repeat": [
      {"from": "DataProvider", "to": "P2DAdapter", "message": "transmitData"},
      {"choice": [
        [
          {"from": "P2DAdapter", "to": "DataProcessor", "message": "process"},
          {"from": "DataProcessor", "to": "StorageManager", "message": "CRUDop.create"},
          {"choice": [
            [{"from": "DataProcessor", "to": "ShadowManager", "message": "update"}],
            [{"from": "P2DAdapter", "to": "ShadowManager", "message": "forward"}]
          ]}
        ],
        [{"from": "P2DAdapter", "to": "P2DAdapter", "message": "filtered"}],
        [{"from": "P2DAdapter", "to": "P2DAdapter", "message": "parseError"}]
      ]}
    ], "min": 0},
    {"from": "TwinManager", "to": "Predictor", "message": "prediction"},
    {"from": "Predictor", "to": "ShadowManager", "message": "getShadow"},
    {"from": "Predictor", "to": "DeviationDetector", "message": "predictedStates"},
    {"optional": [
      {"from": "DeviationDetector", "to": "SolutionFinder", "message": "deviation"},
      {"choice": [
        [
          {"repeat": [
            {"from": "SolutionFinder", "to": "ScenarioGenerator", "message": "genScenario"},
            {"from": "Planner", "to": "TwinManager", "message": "newScenarioSim"},
            {"from": "TwinManager", "to": "Simulator", "message": "scenarioSim"},
            {"from": "Simulator", "to": "ModelManager", "message": "updateModel"},
            {"from": "ModelManager", "to": "ModelEngine", "message": "modelExecution"},
            {"from": "TwinManager", "to": "Simulator", "message": "getSimState"}
          ], "min": 1},
          {"from": "SolutionFinder", "to": "Planner", "message": "solution"},
          {"from": "Planner", "to": "FeedbackExecutor", "message": "plan"},
          {"from": "FeedbackExecutor", "to": "D2PAdapter", "message": "commandPlan"},
          {"repeat": [
            {"from": "D2PAdapter", "to": "DataReceiver", "message": "command"}
          ], "min": 1}
        ],
        [
          {"repeat": [
            {"from": "SolutionFinder", "to": "ScenarioGenerator", "message": "genScenario"},
            {"from": "Planner", "to": "TwinManager", "message": "newScenarioSim"},
            {"from": "TwinManager", "to": "Simulator", "message": "scenarioSim"},
            {"from": "Simulator", "to": "ModelManager", "message": "updateModel"},
            {"from": "ModelManager", "to": "ModelEngine", "message": "modelExecution"},
            {"from": "TwinManager", "to": "Simulator", "message": "getSimState"}
          ], "min": 0},
          {"from": "SolutionFinder", "to": "FeedbackExecutor", "message": "noPlan"},
          {"from": "FeedbackExecutor", "to": "D2PAdapter", "message": "alert"},
          {"from": "D2PAdapter", "to": "DataReceiver", "message": "alert"}
        ]
      ]}
    ]}
  ]
})";

// Thompson construction over (from, to, message) labels.
struct Nfa {
  struct Edge {
    int target;
    int label;  // -1: epsilon
  };
  std::vector<std::vector<Edge>> edges;
  std::vector<std::string> labels;
  std::map<std::string, int> label_ids;
  int start = 0;
  int accept = 0;

  int state() {
    edges.emplace_back();
    return static_cast<int>(edges.size()) - 1;
  }
  void eps(int a, int b) { edges[a].push_back({b, -1}); }
  int label(const std::string& l) {
    auto [it, inserted] = label_ids.emplace(l, static_cast<int>(labels.size()));
    if (inserted) labels.push_back(l);
    return it->second;
  }

  std::pair<int, int> build(const std::vector<TemplateNode>& seq) {
    const int s = state();
    int cur = s;
    for (const auto& n : seq) {
      auto [a, b] = build(n);
      eps(cur, a);
      cur = b;
    }
    return {s, cur};
  }

  std::pair<int, int> build(const TemplateNode& n) {
    switch (n.kind) {
      case TemplateNode::Kind::Step: {
        const int a = state(), b = state();
        edges[a].push_back({b, label(n.from + " -> " + n.to + " : " + n.message)});
        return {a, b};
      }
      case TemplateNode::Kind::Optional: {
        auto [a, b] = build(n.body);
        eps(a, b);
        return {a, b};
      }
      case TemplateNode::Kind::Repeat: {
        const int s = state();
        int cur = s;
        for (int i = 0; i < n.min; ++i) {
          auto [a, b] = build(n.body);
          eps(cur, a);
          cur = b;
        }
        auto [a, b] = build(n.body);
        const int e = state();
        eps(cur, a);
        eps(b, a);
        eps(b, e);
        eps(cur, e);
        return {s, e};
      }
      case TemplateNode::Kind::Choice: {
        const int s = state(), e = state();
        for (const auto& alt : n.alts) {
          auto [a, b] = build(alt);
          eps(s, a);
          eps(b, e);
        }
        return {s, e};
      }
    }
    return {0, 0};
  }

  std::set<int> closure(std::set<int> states) const {
    std::vector<int> stack(states.begin(), states.end());
    while (!stack.empty()) {
      const int s = stack.back();
      stack.pop_back();
      for (const auto& e : edges[s]) {
        if (e.label < 0 && states.insert(e.target).second) stack.push_back(e.target);
      }
    }
    return states;
  }

  std::set<int> step(const std::set<int>& states, int label) const {
    std::set<int> next;
    for (int s : states) {
      for (const auto& e : edges[s]) {
        if (e.label == label) next.insert(e.target);
      }
    }
    return closure(std::move(next));
  }

  std::vector<std::string> expected(const std::set<int>& states) const {
    std::set<std::string> out;
    for (int s : states) {
      for (const auto& e : edges[s]) {
        if (e.label >= 0) out.insert(labels[e.label]);
      }
    }
    return {out.begin(), out.end()};
  }
};

Nfa compile(const SequenceTemplate& t) {
  Nfa nfa;
  auto [s, e] = nfa.build(t.steps);
  nfa.start = s;
  nfa.accept = e;
  return nfa;
}

std::string label_of(const TraceEvent& e) { return e.from + " -> " + e.to + " : " + e.message; }

}  // namespace

SequenceTemplate template_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::ConfigError, "template must be an object");
  SequenceTemplate t;
  t.name = j.value("name", std::string());
  t.loop = j.value("loop", std::string());
  const std::string scope = j.value("scope", std::string("tick"));
  if (scope != "tick" && scope != "run") fail(ErrorCode::ConfigError, "template scope must be tick or run");
  t.per_tick = scope == "tick";
  t.steps = nodes_from_json(j.value("steps", json()));
  return t;
}

json to_json(const SequenceTemplate& t) {
  return json{{"name", t.name}, {"loop", t.loop}, {"scope", t.per_tick ? "tick" : "run"},
              {"steps", nodes_to_json(t.steps)}};
}

const SequenceTemplate& monitoring_template() {
  static const SequenceTemplate t = template_from_json(json::parse(kMonitoring));
  return t;
}

const SequenceTemplate& prediction_template() {
  static const SequenceTemplate t = template_from_json(json::parse(kPrediction));
  return t;
}

const SequenceTemplate& template_for(std::string_view loop) {
  if (loop == "monitoring") return monitoring_template();
  if (loop == "prediction") return prediction_template();
  fail(ErrorCode::ConfigError, "unknown loop '" + std::string(loop) + "'");
}

json Verdict::to_json() const {
  json j{{"verdict", pass ? "Pass" : "Fail"}, {"instances", instances}};
  if (!reason.empty()) j["reason"] = reason;
  if (divergence) j["divergenceIndex"] = *divergence;
  if (event) {
    j["event"] = json{{"tick", event->tick}, {"seq", event->seq}, {"from", event->from},
                      {"to", event->to},     {"message", event->message}};
  }
  if (!expected.empty()) j["expected"] = expected;
  return j;
}

Verdict check_trace(const InteractionTrace& trace, const SequenceTemplate& tmpl,
                    std::optional<std::size_t> expected_instances) {
  Verdict v;
  const auto& evs = trace.events();
  const auto& cat = catalog::load_catalog();
  auto diverge = [&](std::size_t i, std::string reason, std::vector<std::string> expected = {}) {
    v.pass = false;
    v.divergence = i;
    if (i < evs.size()) v.event = evs[i];
    v.reason = std::move(reason);
    v.expected = std::move(expected);
    return v;
  };

  for (std::size_t i = 0; i < evs.size(); ++i) {
    const auto& e = evs[i];
    if (!cat.is_element_name(e.from)) return diverge(i, "unknown element " + e.from);
    if (!cat.is_element_name(e.to)) return diverge(i, "unknown element " + e.to);
    if (i > 0) {
      const auto& p = evs[i - 1];
      if (e.tick < p.tick || (e.tick == p.tick && e.seq <= p.seq)) {
        return diverge(i, "events out of (tick, seq) order");
      }
    }
  }

  const Nfa nfa = compile(tmpl);
  const std::set<int> initial = nfa.closure({nfa.start});
  std::set<int> cur = initial;
  bool open = false;  // inside an instance that has consumed events
  for (std::size_t i = 0; i < evs.size(); ++i) {
    if (tmpl.per_tick && i > 0 && evs[i].tick != evs[i - 1].tick) {
      if (!cur.count(nfa.accept)) {
        return diverge(i, "tick " + std::to_string(evs[i - 1].tick) + " ended before its instance completed",
                       nfa.expected(cur));
      }
      ++v.instances;
      cur = initial;
    }
    auto it = nfa.label_ids.find(label_of(evs[i]));
    std::set<int> next;
    if (it != nfa.label_ids.end()) next = nfa.step(cur, it->second);
    if (next.empty()) return diverge(i, "event does not fit the " + tmpl.name + " template", nfa.expected(cur));
    cur = std::move(next);
    open = true;
  }
  if (open) {
    if (!cur.count(nfa.accept)) {
      return diverge(evs.size(), "trace ended before the instance completed", nfa.expected(cur));
    }
    ++v.instances;
  }
  if (v.instances == 0) return diverge(0, "no template instance in trace", nfa.expected(initial));
  if (expected_instances && v.instances != *expected_instances) {
    return diverge(evs.size(), "expected " + std::to_string(*expected_instances) + " instances, found " +
                                   std::to_string(v.instances));
  }
  v.pass = true;
  return v;
}

}  // namespace twinarch
