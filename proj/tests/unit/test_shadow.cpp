#include <doctest.h>

#include <filesystem>

#include "support/shadow_oracle.hpp"
#include "twinarch/data_manager.hpp"
#include "twinarch/error.hpp"
#include "twinarch/shadow.hpp"

using namespace twinarch;
namespace fs = std::filesystem;

namespace {

const ShadowType kFlow{"Flow", {"a0", "a1"}, "Road"};
const ShadowType kAll{"All", {"a0", "a1", "a2", "a3"}, ""};

}  // namespace

TEST_CASE("shadow lifecycle") {
  StorageManager sm;
  ShadowManager sh(sm);
  CHECK_THROWS_AS(sh.create_shadow("Flow", "e0"), Error);
  sh.register_type(kFlow);
  const auto id = sh.create_shadow("Flow", "e0");
  CHECK(id == shadow_id_for("Flow", "e0"));
  CHECK_THROWS_AS(sh.create_shadow("Flow", "e0"), Error);
  CHECK(sh.shadow_ids() == std::vector<std::string>{id});
  CHECK(sh.shadows_for_entity("e0") == std::vector<std::string>{id});
  sh.delete_shadow(id);
  CHECK(sh.shadow_ids().empty());
  CHECK_THROWS_AS(sh.shadow(id), Error);
}

TEST_CASE("trace lengths equal brute-force matching") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto ms = testgen::shadow_workload(rng, 100);
    StorageManager sm;
    ShadowManager sh(sm);
    sh.register_type(kFlow);
    sh.register_type(kAll);
    // half the shadows exist before ingestion, half are backfilled afterwards
    sh.create_shadow("Flow", "e0");
    sh.create_shadow("All", "e1");
    for (const auto& m : ms) sh.update_from_measurement(m);
    for (const auto& m : ms) {
      if (!sm.get(measurement_key(m))) sm.create(measurement_key(m), measurement_body(m));
    }
    sh.create_shadow("Flow", "e2");
    sh.create_shadow("All", "e2");
    CHECK(sh.shadow(shadow_id_for("Flow", "e0")).trace.size() == testgen::expected_trace_length(ms, kFlow, "e0"));
    CHECK(sh.shadow(shadow_id_for("All", "e1")).trace.size() == testgen::expected_trace_length(ms, kAll, "e1"));
    CHECK(sh.shadow(shadow_id_for("Flow", "e2")).trace.size() == testgen::expected_trace_length(ms, kFlow, "e2"));
    CHECK(sh.shadow(shadow_id_for("All", "e2")).trace.size() == testgen::expected_trace_length(ms, kAll, "e2"));
  }
}

TEST_CASE("late points are flagged and traces stay ordered") {
  StorageManager sm;
  ShadowManager sh(sm);
  sh.register_type(kAll);
  const auto id = sh.create_shadow("All", "e0");
  auto m = [](std::int64_t ms, double v) {
    Measurement x;
    x.entity_id = "e0";
    x.attribute = "a0";
    x.value = Scalar::number(v);
    x.observed_at = from_millis(ms);
    return x;
  };
  sh.update_from_measurement(m(2000, 2));
  sh.update_from_measurement(m(1000, 1));
  sh.update_from_measurement(m(3000, 3));
  const auto s = sh.shadow(id);
  REQUIRE(s.trace.size() == 3);
  CHECK(s.trace[0].observed_at == from_millis(1000));
  CHECK(s.trace[0].late);
  CHECK_FALSE(s.trace[2].late);
  CHECK(s.latest("a0")->value.as_number() == 3);
}

TEST_CASE("range queries") {
  StorageManager sm;
  ShadowManager sh(sm);
  sh.register_type(kAll);
  sh.create_shadow("All", "e0");
  for (int i = 0; i < 10; ++i) {
    Measurement x;
    x.entity_id = "e0";
    x.attribute = "a1";
    x.value = Scalar::number(i);
    x.observed_at = from_millis(i * 1000);
    sh.update_from_measurement(x);
  }
  ShadowQuery q;
  q.entity_id = "e0";
  q.from = from_millis(3000);
  q.to = from_millis(6000);
  auto got = sh.get_shadow(q);
  REQUIRE(got.size() == 1);
  CHECK(got[0].trace.size() == 3);
  q.to = q.from;
  CHECK_THROWS_AS(sh.get_shadow(q), Error);
}

TEST_CASE("journal replay reconstructs shadows bit-identically") {
  const auto dir = fs::temp_directory_path() / "twinarch-unit";
  fs::create_directories(dir);
  const auto path = dir / "shadow-replay.jsonl";
  fs::remove(path);
  std::mt19937_64 rng(77);
  const auto ms = testgen::shadow_workload(rng, 100);
  std::vector<Shadow> before;
  {
    LogicalClock clock(from_millis(5));
    StorageOptions o;
    o.journal = path;
    StorageManager sm(&clock, o);
    ShadowManager sh(sm, &clock);
    sh.register_type(kFlow);
    sh.register_type(kAll);
    for (const char* e : {"e0", "e1", "e2"}) {
      sh.create_shadow("Flow", e);
      sh.create_shadow("All", e);
    }
    for (const auto& m : ms) {
      clock.advance(std::chrono::milliseconds(10));
      sh.update_from_measurement(m);
    }
    sh.delete_shadow(shadow_id_for("Flow", "e1"));
    sm.flush();
    before = sh.get_shadow(ShadowQuery{});
  }
  StorageManager sm;
  sm.replay(path);
  ShadowManager sh(sm);
  sh.rebuild_index();
  const auto after = sh.get_shadow(ShadowQuery{});
  CHECK(after.size() == 5);
  CHECK(after == before);
  CHECK(json(to_json(after.front())).dump() == json(to_json(before.front())).dump());
}
