#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "twinarch/error.hpp"
#include "twinarch/orchestrator.hpp"

using namespace twinarch;
namespace fs = std::filesystem;

namespace {

const fs::path kFix = TWINARCH_FIXTURES;

RunSetup setup_for(const std::string& loop) {
  auto s = load_setup(read_manifest(kFix / "demo" / loop / "manifest.json"));
  s.run.journal.reset();
  return s;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::InvalidArgument;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("twinarch_orch_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("monitoring demo") {
  TwinManager tm(setup_for("monitoring"));
  const auto r = tm.run_monitoring();
  CHECK(r.feedback.size() == 10);
  REQUIRE(r.rendered.size() == 1);
  CHECK(r.rendered[0].rfind("Main Street has a traffic density of", 0) == 0);
  const auto v = check_trace(tm.trace(), monitoring_template(), 10);
  CHECK(v.pass);
  for (const auto& fb : r.feedback) {
    REQUIRE(fb.is_alert());
    CHECK(std::get<Alert>(fb.body).message == "system ok");
  }
  CHECK(tm.storage().dump(Namespace::Measurements).size() == 10);
}

TEST_CASE("runs are deterministic for a seed") {
  TwinManager a(setup_for("monitoring")), b(setup_for("monitoring"));
  a.run_monitoring();
  b.run_monitoring();
  CHECK(a.trace().to_jsonl() == b.trace().to_jsonl());

  auto s = setup_for("monitoring");
  s.harness.jitter = 0.1;
  auto s2 = s;
  s2.harness.seed += 1;
  TwinManager c(s), d(s2);
  c.run_monitoring();
  d.run_monitoring();
  CHECK(c.trace().digest() != d.trace().digest());
}

TEST_CASE("prediction demo plans and acknowledges") {
  TwinManager tm(setup_for("prediction"));
  const auto r = tm.run_prediction();
  REQUIRE(r.prediction);
  REQUIRE_FALSE(r.deviations.empty());
  CHECK(r.deviations.front().kind == DeviationKind::Predicted);
  CHECK(r.evaluations.size() == 4);
  REQUIRE(r.plan);
  REQUIRE(r.plan->actions.size() == 1);
  CHECK(r.plan->actions[0].name == "extend-green");
  CHECK(r.plan->actions[0].args["seconds"] == 20);
  REQUIRE(r.deliveries.size() == 1);
  CHECK(r.deliveries[0].ack.ok);
  CHECK(tm.harness().acked() == 1);
  CHECK(check_trace(tm.trace(), prediction_template(), 1).pass);
  const json sum = summarize(r);
  CHECK(sum.contains("evaluations"));
}

TEST_CASE("direct shadow path and change-only feedback") {
  auto s = setup_for("monitoring");
  s.run.direct_shadow_path = true;
  s.run.feedback_on_change_only = true;
  TwinManager tm(s);
  const auto r = tm.run_monitoring();
  CHECK(r.feedback.size() == 1);
  CHECK(check_trace(tm.trace(), monitoring_template(), 10).pass);
  bool forwarded = false;
  for (const auto& e : tm.trace().events()) forwarded |= e.message == "forward";
  CHECK(forwarded);
  CHECK(tm.shadows().get_shadow(ShadowQuery{{}, "urn:ngsi-ld:TrafficFlowObserved:TLF01", {}, {}, {}}).at(0).trace.size() == 10);
}

TEST_CASE("manifest and config errors") {
  CHECK(code_of([] { read_manifest(kFix / "nope.json"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { load_setup(read_manifest(kFix / "conformance/missing_thresholds/manifest.json")); }) ==
        ErrorCode::ConfigError);
  CHECK(code_of([] { run_config_from_json(json::parse(R"({"entities":[]})")); }) == ErrorCode::ConfigError);

  std::ifstream in(kFix / "demo/monitoring/run.json");
  json run = json::parse(in);
  run["maxTicks"] = 0;
  CHECK(code_of([&] { run_config_from_json(run); }) == ErrorCode::ConfigError);
  run["maxTicks"] = 3;
  run["loop"] = "sideways";
  CHECK(code_of([&] { run_config_from_json(run); }) == ErrorCode::ConfigError);
}

TEST_CASE("outputs are written") {
  const auto dir = scratch("out");
  TwinManager tm(setup_for("monitoring"));
  const auto r = tm.run_monitoring();
  const auto v = check_trace(tm.trace(), monitoring_template());
  const auto o = write_outputs(dir, tm, summarize(r), v);
  CHECK(fs::exists(o.trace));
  CHECK(fs::exists(o.summary));
  REQUIRE(o.verdict);
  CHECK(InteractionTrace::read(o.trace).events() == tm.trace().events());
  fs::remove_all(dir);
}

TEST_CASE("journal survives a run") {
  const auto dir = scratch("journal");
  auto s = setup_for("monitoring");
  s.run.journal = dir / "journal.jsonl";
  {
    TwinManager tm(s);
    tm.run_monitoring();
  }
  StorageManager sm;
  CHECK(sm.replay(dir / "journal.jsonl") > 0);
  CHECK(sm.dump(Namespace::Measurements).size() == 10);
  fs::remove_all(dir);
}
