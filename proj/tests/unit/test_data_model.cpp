#include <doctest.h>

#include <fstream>
#include <sstream>

#include "support/gen.hpp"
#include "twinarch/data_model.hpp"
#include "twinarch/error.hpp"

using namespace twinarch;

namespace {

std::string fixture(const std::string& name) {
  std::ifstream in(std::string(TWINARCH_FIXTURES) + "/listings/" + name, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

const TimePoint kT = *parse_rfc3339("2024-12-10T12:00:00Z");

}  // namespace

TEST_CASE("listing payloads agree on the flow value") {
  auto ul = parse_ultralight(fixture("ultralight.txt"), "TLF01", {{"f", "vehicleFlow"}}, kT);
  REQUIRE(ul.size() == 1);
  CHECK(ul[0].attribute == "vehicleFlow");
  CHECK(ul[0].value == Scalar::integer(35));

  auto ditto = parse_ditto_thing(fixture("ditto_thing.json"));
  CHECK(ditto.id == "example:TrafficSensor");
  CHECK(ditto.attributes.at("vehicleCount").value == Scalar::integer(35));

  auto dtdl = parse_dtdl_telemetry(fixture("dtdl_interface.json"), fixture("dtdl_telemetry.json"), "", kT);
  REQUIRE(dtdl.size() == 1);
  CHECK(dtdl[0].entity_id == "dtmi:example:TrafficSensor;1");
  CHECK(dtdl[0].value.as_number() == 35);

  auto ngsi = parse_ngsi_ld(fixture("ngsi_ld.json"));
  CHECK(ngsi.id == "urn:ngsi-ld:TrafficFlowObserved:TLF01");
  CHECK(ngsi.type == "TrafficFlowObserved");
  const auto& vf = ngsi.attributes.at("vehicleFlow");
  CHECK(vf.value == Scalar::integer(35));
  CHECK(format_rfc3339(*vf.observed_at) == "2024-12-10T12:00:00Z");
  REQUIRE(ngsi.location);
  CHECK(ngsi.location->lat == 40.7128);
  CHECK(ngsi.location->lon == -74.0060);
}

TEST_CASE("ultralight errors") {
  CHECK(code_of([] { parse_ultralight("x|1", "d", {{"f", "vehicleFlow"}}, kT); }) == ErrorCode::UnknownKey);
  CHECK(code_of([] { parse_ultralight("f|1|g", "d", {{"f", "vehicleFlow"}}, kT); }) == ErrorCode::MalformedPayload);
  CHECK(code_of([] { parse_ultralight("", "d", {}, kT); }) == ErrorCode::MalformedPayload);
  CHECK(code_of([] { parse_ultralight("|5", "d", {{"f", "a"}}, kT); }) == ErrorCode::MalformedPayload);
  auto two = parse_ultralight("f|35|s|red", "d", {{"f", "flow"}, {"s", "signal"}}, kT);
  REQUIRE(two.size() == 2);
  CHECK(two[1].value == Scalar::text("red"));
  CHECK(ultralight_value("1e3")->as_number() == 1000);
  CHECK(ultralight_value("0x10")->is_string());
}

TEST_CASE("ditto schema checks") {
  CHECK(code_of([] { parse_ditto_thing(R"({"attributes":{}})"); }) == ErrorCode::SchemaViolation);
  CHECK(code_of([] { parse_ditto_thing(R"({"thingId":"a","attributes":{"x":{"type":"integer","value":1.5}}})"); }) ==
        ErrorCode::SchemaViolation);
  CHECK(code_of([] { parse_ditto_thing("{not json"); }) == ErrorCode::MalformedJson);
  auto e = parse_ditto_thing(R"({"thingId":"a","attributes":{"s":{"type":"double","value":3,"unit":"km/h"}}})");
  CHECK(e.attributes.at("s").unit == std::optional<std::string>("km/h"));
}

TEST_CASE("dtdl rejects undeclared telemetry") {
  CHECK(code_of([] { parse_dtdl_telemetry(fixture("dtdl_interface.json"), R"({"speed": 3})", "d", kT); }) ==
        ErrorCode::UndeclaredTelemetry);
  CHECK(code_of([] { parse_dtdl_telemetry(fixture("dtdl_interface.json"), R"({"vehicleCount": "many"})", "d", kT); }) ==
        ErrorCode::SchemaViolation);
  CHECK(code_of([] { parse_dtdl_telemetry(R"({"@type":"Telemetry"})", "{}", "d", kT); }) == ErrorCode::SchemaViolation);
}

TEST_CASE("ngsi-ld requires id and type") {
  CHECK(code_of([] { parse_ngsi_ld(R"({"type":"T"})"); }) == ErrorCode::SchemaViolation);
  CHECK(code_of([] { parse_ngsi_ld(R"({"id":"x"})"); }) == ErrorCode::SchemaViolation);
  CHECK(code_of([] { parse_ngsi_ld("[1,2]"); }) == ErrorCode::MalformedJson);
}

TEST_CASE("serializing unrepresentable values fails cleanly") {
  CanonicalEntity e = parse_ngsi_ld(fixture("ngsi_ld.json"));
  CHECK(code_of([&] { serialize(e, WireFormat::DittoThing); }) == ErrorCode::Unrepresentable);
  Measurement m;
  m.entity_id = "d";
  m.attribute = "flow";
  m.value = Scalar::number(1);
  m.unit = "KMH";
  std::vector<Measurement> ms{m};
  CHECK(code_of([&] { serialize(ms, WireFormat::Ultralight, ultralight_options({{"f", "flow"}})); }) ==
        ErrorCode::Unrepresentable);
  ms[0].unit.reset();
  ms[0].value = Scalar::number(std::numeric_limits<double>::infinity());
  CHECK(code_of([&] { serialize(ms, WireFormat::Ultralight, ultralight_options({{"f", "flow"}})); }) ==
        ErrorCode::Unrepresentable);
  ms[0].value = Scalar::number(2);
  CHECK(serialize(ms, WireFormat::Ultralight, ultralight_options({{"f", "flow"}})) == "f|2.0");
}

TEST_CASE("round trips over random canonical values") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 300; ++i) {
    auto e = testgen::ngsi_entity(rng);
    CHECK(parse_ngsi_ld(serialize(e, WireFormat::NgsiLd)) == e);

    auto d = testgen::ditto_entity(rng);
    CHECK(parse_ditto_thing(serialize(d, WireFormat::DittoThing)) == d);

    const auto t = testgen::instant(rng);
    const auto map = testgen::ultralight_map();
    auto ul = testgen::ultralight_measurements(rng, "dev", t);
    CHECK(parse_ultralight(serialize(ul, WireFormat::Ultralight, ultralight_options(map)), "dev", map, t) == ul);

    auto dt = testgen::dtdl_measurements(rng, "dev", "dtmi:x:T;1", t);
    const auto model = dtdl_interface_for(dt, "dtmi:x:T;1");
    CHECK(parse_dtdl_telemetry(model, serialize(dt, WireFormat::DtdlTelemetry), "dev", t) == dt);
  }
}

TEST_CASE("fuzzed bytes raise structured errors only") {
  std::mt19937_64 rng(5);
  const auto model = fixture("dtdl_interface.json");
  const std::string seeds[] = {fixture("ultralight.txt"), fixture("ditto_thing.json"), fixture("dtdl_telemetry.json"),
                               fixture("ngsi_ld.json")};
  int structured = 0, other = 0;
  for (int i = 0; i < 2000; ++i) {
    std::string s = seeds[i % 4];
    const int edits = 1 + static_cast<int>(rng() % 6);
    for (int k = 0; k < edits && !s.empty(); ++k) s[rng() % s.size()] = static_cast<char>(rng() & 0xff);
    try {
      switch (i % 4) {
        case 0: parse_ultralight(s, "d", {{"f", "vehicleFlow"}}, kT); break;
        case 1: parse_ditto_thing(s); break;
        case 2: parse_dtdl_telemetry(model, s, "d", kT); break;
        default: parse_ngsi_ld(s); break;
      }
    } catch (const Error&) {
      ++structured;
    } catch (...) {
      ++other;
    }
  }
  CHECK(other == 0);
  CHECK(structured > 0);
}

TEST_CASE("measurement json round trip") {
  Measurement m;
  m.entity_id = "e";
  m.entity_type = "T";
  m.attribute = "a";
  m.value = Scalar::integer(7);
  m.unit = "KMH";
  m.observed_at = kT;
  m.location = GeoPoint{1.5, 2.5};
  m.source = Source::NgsiLd;
  CHECK(measurement_from_json(to_json(m)) == m);
}
