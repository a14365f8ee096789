#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include <json.hpp>

#include "twinarch/twinarch.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kFix = TWINARCH_FIXTURES;
const fs::path kWork = TWINARCH_WORK;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Takes ownership of a library string.
std::string take(char* s) {
  REQUIRE(s != nullptr);
  std::string out(s);
  twinarch_string_free(s);
  return out;
}

json parse_with(const char* format, const std::string& data, const json& opt = json::object()) {
  char* out = nullptr;
  const auto st = twinarch_parse(format, data.data(), data.size(), opt.dump().c_str(), &out);
  REQUIRE_MESSAGE(st == TWINARCH_OK, twinarch_last_error());
  return json::parse(take(out));
}

std::vector<json> lines(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) {
    if (!l.empty()) out.push_back(json::parse(l));
  }
  return out;
}

const char* kRuntimeOptions = R"({
  "shadowTypes": [{"name": "TrafficFlow", "attributes": ["vehicleFlow"]}],
  "adapter": {"format": "ultralight", "attributeMap": {"f": "vehicleFlow"},
              "devices": {"TLF01": {"entityId": "urn:ngsi-ld:TrafficFlowObserved:TLF01",
                                    "entityType": "TrafficFlowObserved"}}}
})";

}  // namespace

TEST_CASE("status names and last error") {
  CHECK(std::string(twinarch_status_name(TWINARCH_OK)) == "Ok");
  CHECK(std::string(twinarch_version()).size() > 0);
  char* out = nullptr;
  const auto st = twinarch_parse("ultralight", "z|1", 3, R"({"attributeMap":{"f":"vehicleFlow"}})", &out);
  CHECK(st == TWINARCH_E_UNKNOWN_KEY);
  CHECK(out == nullptr);
  CHECK(std::string(twinarch_last_error()).rfind("UnknownKey", 0) == 0);
  CHECK(std::string(twinarch_status_name(st)) == "UnknownKey");
  CHECK(twinarch_parse("csv", "", 0, nullptr, &out) == TWINARCH_E_INVALID_ARGUMENT);
  CHECK(twinarch_parse("ngsi-ld", "{", 1, nullptr, nullptr) == TWINARCH_E_INVALID_ARGUMENT);
  CHECK(twinarch_runtime_create("{", nullptr) != TWINARCH_OK);
}

TEST_CASE("catalog and reports") {
  char* out = nullptr;
  REQUIRE(twinarch_catalog_json(&out) == TWINARCH_OK);
  const json cat = json::parse(take(out));
  CHECK(cat["entities"].size() == 16);
  int ok = -1;
  REQUIRE(twinarch_catalog_check(&out, &ok) == TWINARCH_OK);
  CHECK(ok == 1);
  take(out);
  REQUIRE(twinarch_report("iso", "json", &out) == TWINARCH_OK);
  CHECK(json::parse(take(out)).size() > 0);
  REQUIRE(twinarch_report("traceability", "text", &out) == TWINARCH_OK);
  CHECK_FALSE(take(out).empty());
  CHECK(twinarch_report("astrology", "text", &out) != TWINARCH_OK);
}

TEST_CASE("listing fixtures parse to 35") {
  CHECK(parse_with("ultralight", slurp(kFix / "listings/ultralight.txt"),
                   {{"attributeMap", {{"f", "vehicleFlow"}}}})["measurements"][0]["value"] == 35);
  CHECK(parse_with("ditto", slurp(kFix / "listings/ditto_thing.json"))["measurements"][0]["value"] == 35);
  CHECK(parse_with("ngsi-ld", slurp(kFix / "listings/ngsi_ld.json"))["measurements"][0]["value"] == 35);
  const json dtdl = parse_with("dtdl", slurp(kFix / "listings/dtdl_telemetry.json"),
                               {{"dtdlModel", json::parse(slurp(kFix / "listings/dtdl_interface.json"))}});
  CHECK(dtdl["measurements"][0]["value"] == 35);
}

TEST_CASE("serialize round trip") {
  const json parsed = parse_with("ngsi-ld", slurp(kFix / "listings/ngsi_ld.json"));
  char* out = nullptr;
  REQUIRE(twinarch_serialize("ngsi-ld", parsed["entity"].dump().c_str(), nullptr, &out) == TWINARCH_OK);
  const json again = parse_with("ngsi-ld", take(out));
  CHECK(again["measurements"] == parsed["measurements"]);
  // the listing entity carries a location, which Ultralight cannot express
  CHECK(twinarch_serialize("ultralight", parsed["entity"].dump().c_str(), R"({"attributeMap":{"f":"vehicleFlow"}})",
                           &out) == TWINARCH_E_UNREPRESENTABLE);
  CHECK(out == nullptr);
  json plain = parsed["entity"];
  plain.erase("location");
  REQUIRE_MESSAGE(twinarch_serialize("ultralight", plain.dump().c_str(), R"({"attributeMap":{"f":"vehicleFlow"}})",
                                     &out) == TWINARCH_OK,
                  twinarch_last_error());
  CHECK(take(out).find("f|35") != std::string::npos);
}

TEST_CASE("runtime ingest, shadows, prediction and journal replay") {
  fs::create_directories(kWork);
  const fs::path journal = kWork / "capi_journal.jsonl";
  fs::remove(journal);
  json opt = json::parse(kRuntimeOptions);
  opt["journal"] = journal.string();
  opt["append"] = true;

  twinarch_runtime* rt = nullptr;
  REQUIRE_MESSAGE(twinarch_runtime_create(opt.dump().c_str(), &rt) == TWINARCH_OK, twinarch_last_error());
  char* out = nullptr;
  const char* stamps[] = {"2024-12-10T12:00:10Z", "2024-12-10T12:00:20Z", "2024-12-10T12:00:30Z"};
  for (int i = 0; i < 3; ++i) {
    const std::string payload = "f|" + std::to_string(10 * (i + 1));
    REQUIRE_MESSAGE(twinarch_ingest(rt, "TLF01", payload.data(), payload.size(), stamps[i], &out) == TWINARCH_OK,
                    twinarch_last_error());
    CHECK(json::parse(take(out))["stored"] == 1);
  }
  REQUIRE(twinarch_ingest(rt, "TLF01", "q|1", 3, nullptr, &out) == TWINARCH_OK);
  CHECK(json::parse(take(out))["parseFailed"] == 1);
  CHECK(twinarch_ingest(rt, "TLF01", "f|1", 3, "noon", &out) == TWINARCH_E_INVALID_ARGUMENT);

  REQUIRE(twinarch_shadow_get(rt, R"({"entity":"urn:ngsi-ld:TrafficFlowObserved:TLF01"})", &out) == TWINARCH_OK);
  const json shadows = json::parse(take(out));
  REQUIRE(shadows.size() == 1);
  CHECK(shadows[0]["trace"].size() == 3);

  REQUIRE_MESSAGE(twinarch_service_predict(rt, "urn:ngsi-ld:TrafficFlowObserved:TLF01", 2,
                                           R"({"metrics":["vehicleFlow"]})", &out) == TWINARCH_OK,
                  twinarch_last_error());
  const std::string pred = take(out);
  CHECK(pred.find("40") != std::string::npos);
  CHECK(pred.find("50") != std::string::npos);

  REQUIRE(twinarch_store_dump(rt, "measurements", &out) == TWINARCH_OK);
  const auto before = lines(take(out));
  CHECK(before.size() == 3);
  twinarch_runtime_destroy(rt);

  json again = json::parse(kRuntimeOptions);
  again["journal"] = journal.string();
  REQUIRE(twinarch_runtime_create(again.dump().c_str(), &rt) == TWINARCH_OK);
  REQUIRE(twinarch_store_dump(rt, "measurements", &out) == TWINARCH_OK);
  CHECK(lines(take(out)) == before);
  REQUIRE(twinarch_shadow_get(rt, R"({"type":"TrafficFlow"})", &out) == TWINARCH_OK);
  CHECK(json::parse(take(out)) == shadows);
  CHECK(twinarch_shadow_get(rt, R"({"from":"yesterday"})", &out) != TWINARCH_OK);
  twinarch_runtime_destroy(rt);

  // shadow types come back from the journal alone
  REQUIRE(twinarch_runtime_create(json{{"journal", journal.string()}}.dump().c_str(), &rt) == TWINARCH_OK);
  REQUIRE(twinarch_shadow_get(rt, "{}", &out) == TWINARCH_OK);
  CHECK(json::parse(take(out)) == shadows);
  twinarch_runtime_destroy(rt);
}

TEST_CASE("simulation request") {
  const json req = {{"model", {{"modelId", "road"}, {"kind", "traffic-flow"}, {"inputs", {"vehicleFlow"}},
                               {"outputs", {"density", "speed", "throughput"}}}},
                    {"scenario", {{"modelId", "road"}, {"horizon", 3}, {"stepSize", 10},
                                  {"inputSeries", {{{"step", 0}, {"values", {{"vehicleFlow", 90}}}}}}}}};
  char* out = nullptr;
  REQUIRE_MESSAGE(twinarch_sim_run(req.dump().c_str(), &out) == TWINARCH_OK, twinarch_last_error());
  const json r = json::parse(take(out));
  CHECK(r["stateSeries"].size() == 3);
  CHECK(twinarch_sim_run(R"({"model":{}})", &out) != TWINARCH_OK);
}

TEST_CASE("loops and trace checks") {
  const fs::path outdir = kWork / "capi_run";
  json opt = {{"check", true}, {"outputDir", outdir.string()}};
  char* summary = nullptr;
  int exit_code = -1;
  REQUIRE(twinarch_run((kFix / "demo/monitoring/manifest.json").string().c_str(), opt.dump().c_str(), &summary,
                       &exit_code) == TWINARCH_OK);
  CHECK(exit_code == 0);
  take(summary);
  const std::string trace = slurp(outdir / "trace.jsonl");
  CHECK(lines(trace).size() > 10);

  char* verdict = nullptr;
  int pass = -1;
  REQUIRE(twinarch_trace_check("monitoring", trace.c_str(), nullptr, 10, &verdict, &pass) == TWINARCH_OK);
  CHECK(pass == 1);
  take(verdict);
  const std::string swapped = slurp(kFix / "conformance/swapped_monitoring_trace.jsonl");
  REQUIRE(twinarch_trace_check("monitoring", swapped.c_str(), nullptr, 0, &verdict, &pass) == TWINARCH_OK);
  CHECK(pass == 0);
  CHECK(json::parse(take(verdict))["event"]["tick"] == 3);

  CHECK(twinarch_run((kFix / "conformance/missing_thresholds/manifest.json").string().c_str(),
                     opt.dump().c_str(), &summary, &exit_code) == TWINARCH_E_CONFIG);
  CHECK(exit_code == 2);
  if (summary) twinarch_string_free(summary);

  char* tmpl = nullptr;
  REQUIRE(twinarch_trace_template("prediction", &tmpl) == TWINARCH_OK);
  CHECK(json::parse(take(tmpl))["scope"] == "run");
  fs::remove_all(outdir);
}

TEST_CASE("harness emit and socket mode") {
  const std::string harness = slurp(kFix / "demo/monitoring/harness.json");
  char* out = nullptr;
  REQUIRE(twinarch_harness_emit(harness.c_str(), 3, &out) == TWINARCH_OK);
  const auto emitted = lines(take(out));
  REQUIRE(emitted.size() == 3);
  CHECK(emitted[0]["payload"] == "f|30");

  fs::create_directories(kWork);
  const fs::path sock = kWork / "capi.sock";
  fs::remove(sock);
  twinarch_runtime* rt = nullptr;
  REQUIRE(twinarch_runtime_create(kRuntimeOptions, &rt) == TWINARCH_OK);
  uint64_t served = 0;
  twinarch_status server_status = TWINARCH_E_INTERNAL;
  std::thread server([&] { server_status = twinarch_ingest_serve(rt, "TLF01", sock.c_str(), &served); });
  char* replies = nullptr;
  const auto client_status = twinarch_harness_socket(harness.c_str(), 4, sock.c_str(), &replies);
  server.join();
  REQUIRE(client_status == TWINARCH_OK);
  REQUIRE(server_status == TWINARCH_OK);
  CHECK(served == 4);
  const auto rs = lines(take(replies));
  REQUIRE(rs.size() == 4);
  CHECK(rs[3]["payload"] == "f|35");
  REQUIRE(twinarch_store_dump(rt, "measurements", &out) == TWINARCH_OK);
  CHECK(lines(take(out)).size() == 4);
  twinarch_runtime_destroy(rt);
  fs::remove(sock);
}
