#include <doctest.h>

#include "twinarch/adapters.hpp"
#include "twinarch/error.hpp"

using namespace twinarch;

namespace {

AdapterConfig ul_config() {
  return adapter_config_from_json(json::parse(R"({
    "format": "ultralight",
    "attributeMap": {"f": "vehicleFlow", "s": "speed"},
    "filter": {"sensorType": "trafficLoop"},
    "devices": {
      "TLF01": {"entityId": "urn:ngsi-ld:TrafficFlowObserved:TLF01", "entityType": "TrafficFlowObserved",
                "attributes": {"sensorType": "trafficLoop"}},
      "CAM07": {"entityId": "urn:cam:7", "attributes": {"sensorType": "camera"}}
    }})"));
}

struct Receiver : DataReceiverPort {
  std::vector<std::string> got;
  bool accept = true;
  Ack deliver(std::string_view payload) override {
    got.emplace_back(payload);
    return Ack{accept, "", accept ? "" : "busy"};
  }
};

const TimePoint kT = *parse_rfc3339("2024-12-10T12:00:00Z");

}  // namespace

TEST_CASE("p2d ingest remaps device identity") {
  StorageManager sm;
  DataManager dm(sm);
  P2DAdapter a(ul_config(), dm);
  auto r = a.ingest("f|35|s|42.5", "TLF01", kT);
  CHECK(r.stored == 2);
  REQUIRE(r.committed.size() == 2);
  CHECK(r.committed[0].entity_id == "urn:ngsi-ld:TrafficFlowObserved:TLF01");
  CHECK(r.committed[0].entity_type == "TrafficFlowObserved");
  CHECK(dm.measurements("urn:ngsi-ld:TrafficFlowObserved:TLF01", "vehicleFlow").size() == 1);
}

TEST_CASE("p2d filter and unknown devices reject everything") {
  StorageManager sm;
  DataManager dm(sm);
  P2DAdapter a(ul_config(), dm);
  auto cam = a.ingest("f|12", "CAM07", kT);
  CHECK(cam.stored == 0);
  CHECK(cam.rejected == 1);
  auto ghost = a.ingest("f|12", "NOPE", kT);
  CHECK(ghost.rejected == 1);
  CHECK(sm.size() == 0);
}

TEST_CASE("p2d conservation: every pair is stored, rejected or failed") {
  StorageManager sm;
  DataManager dm(sm);
  P2DAdapter a(ul_config(), dm);
  auto r = a.ingest("f|35|zz|1|s|oops!|s|3", "TLF01", kT);
  CHECK(r.stored + r.rejected + r.parse_failed == 4);
  CHECK(r.parse_failed == 1);
  CHECK(a.totals().stored == r.stored);
}

TEST_CASE("p2d structural errors surface as ParseError") {
  StorageManager sm;
  DataManager dm(sm);
  P2DAdapter a(ul_config(), dm);
  try {
    a.ingest(std::string("f|3\xff|", 5), "TLF01", kT);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
  }
  auto ngsi_cfg = ul_config();
  ngsi_cfg.format = WireFormat::NgsiLd;
  P2DAdapter b(ngsi_cfg, dm);
  CHECK_THROWS_AS(b.ingest("{\"id\":", "TLF01", kT), Error);
}

TEST_CASE("p2d ngsi-ld keeps payload identity and timestamps") {
  StorageManager sm;
  DataManager dm(sm);
  auto cfg = ul_config();
  cfg.format = WireFormat::NgsiLd;
  P2DAdapter a(cfg, dm);
  auto r = a.ingest(R"({"id":"urn:ngsi-ld:TrafficFlowObserved:TLF01","type":"TrafficFlowObserved",
                        "vehicleFlow":{"value":35,"observedAt":"2024-12-10T11:59:00Z"}})",
                    "", kT);
  REQUIRE(r.stored == 1);
  CHECK(format_rfc3339(r.committed[0].observed_at) == "2024-12-10T11:59:00Z");
}

TEST_CASE("command envelope has a stable key order") {
  OutboundCommand c{"TLF01", "extend-green", json{{"seconds", 20}, {"target", "signal-1"}}, kT, "cmd-000001"};
  const auto text = encode_command(c);
  CHECK(text ==
        R"({"device":"TLF01","command":"extend-green","args":{"seconds":20,"target":"signal-1"},)"
        R"("correlationId":"cmd-000001","issuedAt":"2024-12-10T12:00:00Z"})");
  CHECK(decode_command(text) == c);
  CHECK_THROWS_AS(decode_command("{\"device\":1}"), Error);
  CHECK_THROWS_AS(decode_command("garbage"), Error);
}

TEST_CASE("d2p emits one command per action") {
  Receiver rx;
  auto cfg = ul_config();
  cfg.direction = Direction::D2P;
  cfg.command_device = "TLF01";
  D2PAdapter d(cfg, rx);
  Plan p;
  p.plan_id = "plan-000001";
  p.entity_id = "urn:x";
  p.actions = {Action{"extend-green", "signal-1", json{{"seconds", 20}}},
               Action{"divert", "ramp-2", json{{"fraction", 0.3}}}};
  Feedback fb{CommandPlan{p, {}}, "dev-000001"};
  auto ds = d.emit(fb, kT);
  REQUIRE(ds.size() == 2);
  REQUIRE(rx.got.size() == 2);
  auto c0 = decode_command(rx.got[0]);
  CHECK(c0.target_device == "TLF01");
  CHECK(c0.command_name == "extend-green");
  CHECK(c0.args["target"] == "signal-1");
  CHECK(c0.correlation_id == "cmd-000001");
  CHECK(decode_command(rx.got[1]).correlation_id == "cmd-000002");
  CHECK(std::get<CommandPlan>(fb.body).commands.size() == 2);
}

TEST_CASE("d2p alert and negative acknowledgement") {
  Receiver rx;
  auto cfg = ul_config();
  cfg.direction = Direction::D2P;
  D2PAdapter d(cfg, rx);
  Feedback fb{Alert{"heads up", Severity::Warning, "dev-1"}, "dev-1"};
  auto ds = d.emit(fb, kT);
  REQUIRE(ds.size() == 1);
  auto j = json::parse(rx.got[0]);
  CHECK(j["type"] == "alert");
  CHECK(j["severity"] == "Warning");
  rx.accept = false;
  CHECK_THROWS_AS(d.emit(fb, kT), Error);
}

TEST_CASE("adapter config errors") {
  CHECK_THROWS_AS(adapter_config_from_json(json::parse(R"({"direction":"sideways"})")), Error);
  CHECK_THROWS_AS(adapter_config_from_json(json::parse(R"({"format":"xml"})")), Error);
  CHECK_THROWS_AS(adapter_config_from_json(json::array()), Error);
}
