#include <doctest.h>

#include <fstream>
#include <sstream>

#include "twinarch/error.hpp"
#include "twinarch/trace.hpp"

using namespace twinarch;

namespace {

InteractionTrace load(const std::string& rel) {
  return InteractionTrace::read(std::string(TWINARCH_FIXTURES) + "/" + rel);
}

SequenceTemplate tiny() {
  return template_from_json(json::parse(R"({
    "name": "tiny", "loop": "monitoring", "scope": "tick",
    "steps": [
      {"from": "DataProvider", "to": "P2DAdapter", "message": "transmitData"},
      {"repeat": [{"from": "P2DAdapter", "to": "DataManager", "message": "CRUDop.create"}], "min": 1},
      {"optional": [{"from": "ShadowManager", "to": "DigitalShadow", "message": "updateShadow"}]},
      {"choice": [[{"from": "ServiceManager", "to": "FeedbackProvider", "message": "deliverState"}],
                  [{"from": "ServiceManager", "to": "FeedbackProvider", "message": "deliverAlert"}]]}
    ]})"));
}

void tick(InteractionTrace& t, int k, int creates, bool shadow, const std::string& last) {
  t.record(k, "DataProvider", "P2DAdapter", "transmitData");
  for (int i = 0; i < creates; ++i) t.record(k, "P2DAdapter", "DataManager", "CRUDop.create");
  if (shadow) t.record(k, "ShadowManager", "DigitalShadow", "updateShadow");
  t.record(k, "ServiceManager", "FeedbackProvider", last);
}

}  // namespace

TEST_CASE("demo trace fits the monitoring template") {
  const auto t = load("conformance/monitoring_trace.jsonl");
  const auto v = check_trace(t, monitoring_template(), 10);
  CHECK(v.pass);
  CHECK(v.instances == 10);
  CHECK_FALSE(check_trace(t, monitoring_template(), 9).pass);
}

TEST_CASE("swapped events are located") {
  const auto t = load("conformance/swapped_monitoring_trace.jsonl");
  const auto v = check_trace(t, monitoring_template());
  CHECK_FALSE(v.pass);
  REQUIRE(v.event);
  CHECK(v.event->tick == 3);
  CHECK(v.event->message == "storeState");
  CHECK(v.instances == 2);
  CHECK(std::find(v.expected.begin(), v.expected.end(), "TwinManager -> ServiceManager : getState") != v.expected.end());
}

TEST_CASE("reordered template rejects the demo trace") {
  std::ifstream in(std::string(TWINARCH_FIXTURES) + "/conformance/reordered_monitoring_template.json");
  const auto tmpl = template_from_json(json::parse(in));
  CHECK_FALSE(check_trace(load("conformance/monitoring_trace.jsonl"), tmpl).pass);
}

TEST_CASE("template combinators") {
  const auto tmpl = tiny();
  InteractionTrace ok;
  tick(ok, 1, 1, false, "deliverState");
  tick(ok, 2, 3, true, "deliverAlert");
  auto v = check_trace(ok, tmpl);
  CHECK(v.pass);
  CHECK(v.instances == 2);

  InteractionTrace none;
  tick(none, 1, 0, false, "deliverState");
  CHECK_FALSE(check_trace(none, tmpl).pass);

  InteractionTrace extra;
  tick(extra, 1, 1, true, "deliverState");
  extra.record(1, "ShadowManager", "DigitalShadow", "updateShadow");
  v = check_trace(extra, tmpl);
  CHECK_FALSE(v.pass);
  CHECK(v.divergence == 4u);

  InteractionTrace truncated;
  truncated.record(1, "DataProvider", "P2DAdapter", "transmitData");
  truncated.record(1, "P2DAdapter", "DataManager", "CRUDop.create");
  truncated.record(2, "DataProvider", "P2DAdapter", "transmitData");
  v = check_trace(truncated, tmpl);
  CHECK_FALSE(v.pass);
  CHECK(v.divergence == 2u);

  CHECK_FALSE(check_trace(InteractionTrace{}, tmpl).pass);

  const auto back = template_from_json(to_json(tmpl));
  CHECK(to_json(back) == to_json(tmpl));
}

TEST_CASE("unknown elements and order violations fail") {
  const auto tmpl = tiny();
  InteractionTrace t;
  tick(t, 1, 1, false, "deliverState");
  t.events()[0].from = "Gremlin";
  auto v = check_trace(t, tmpl);
  CHECK_FALSE(v.pass);
  CHECK(v.reason.find("Gremlin") != std::string::npos);

  InteractionTrace o;
  tick(o, 1, 1, false, "deliverState");
  std::swap(o.events()[0].seq, o.events()[1].seq);
  CHECK_FALSE(check_trace(o, tmpl).pass);
}

TEST_CASE("jsonl round trip and parse errors") {
  InteractionTrace t;
  t.record(1, "DataProvider", "P2DAdapter", "transmitData", json{{"payload", "f|35"}});
  t.record(2, "P2DAdapter", "DataManager", "CRUDop.create");
  CHECK(t.events()[0].digest == fnv1a_hex(json{{"payload", "f|35"}}.dump()));
  const auto back = InteractionTrace::from_jsonl(t.to_jsonl());
  CHECK(back.events() == t.events());
  CHECK(back.digest() == t.digest());
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");

  for (const char* bad : {"{", "[1]", R"({"tick":1})", R"({"tick":"x","seq":0,"from":"a","to":"b","message":"m","digest":""})"}) {
    try {
      InteractionTrace::from_jsonl(bad);
      FAIL("accepted " << bad);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
    }
  }
}

TEST_CASE("template config errors") {
  CHECK_THROWS_AS(template_from_json(json::parse("[]")), Error);
  CHECK_THROWS_AS(template_from_json(json::parse(R"({"steps":[{"from":"a"}]})")), Error);
  CHECK_THROWS_AS(template_from_json(json::parse(R"({"scope":"day","steps":[]})")), Error);
  CHECK_THROWS_AS(template_for("weekly"), Error);
  CHECK(template_for("prediction").per_tick == false);
}
