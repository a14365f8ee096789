#include <doctest.h>

#include <filesystem>
#include <thread>

#include "support/storage_oracle.hpp"
#include "twinarch/error.hpp"
#include "twinarch/storage.hpp"

using namespace twinarch;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  auto dir = fs::temp_directory_path() / "twinarch-unit";
  fs::create_directories(dir);
  auto p = dir / name;
  fs::remove(p);
  return p;
}

RecordKey key(std::string e, std::string n, std::int64_t ms, Namespace ns = Namespace::Measurements) {
  return RecordKey{ns, std::move(e), std::move(n), from_millis(ms)};
}

}  // namespace

TEST_CASE("crud basics") {
  LogicalClock clock(from_millis(1000));
  StorageManager sm(&clock);
  const auto k = key("e1", "flow", 10);
  CHECK(sm.create(k, json{{"v", 1}}) == 1);
  CHECK_THROWS_AS(sm.create(k, json{{"v", 2}}), Error);
  CHECK(sm.update(k, json{{"v", 3}}) == 2);
  CHECK(sm.get(k)->body["v"] == 3);
  CHECK(sm.get(k)->committed_at == from_millis(1000));
  sm.remove(k);
  CHECK_FALSE(sm.get(k));
  CHECK_THROWS_AS(sm.update(k, json{}), Error);
  CHECK_THROWS_AS(sm.remove(k), Error);
  // revisions keep counting across incarnations
  CHECK(sm.create(k, json{{"v", 4}}) == 4);
}

TEST_CASE("invalid queries") {
  StorageManager sm;
  Query q;
  q.from = from_millis(5);
  q.to = from_millis(5);
  CHECK_THROWS_AS(sm.read(q), Error);
  q.to.reset();
  q.limit = 0;
  CHECK_THROWS_AS(sm.read(q), Error);
}

TEST_CASE("reads equal a brute-force filter") {
  std::mt19937_64 rng(1234);
  StorageManager sm;
  const auto all = testgen::populate(sm, rng, 2000);
  CHECK(sm.size() == all.size());
  for (int i = 0; i < 200; ++i) {
    const Query q = testgen::random_query(rng);
    const auto got = sm.read(q);
    const auto want = testgen::brute_read(all, q);
    REQUIRE(got.size() == want.size());
    for (std::size_t j = 0; j < got.size(); ++j) {
      CHECK(got[j].key == want[j].key);
      CHECK(got[j].body == want[j].body);
      CHECK(got[j].revision == want[j].revision);
    }
  }
}

TEST_CASE("journal replay rebuilds the same store") {
  const auto path = temp_file("replay.jsonl");
  std::mt19937_64 rng(99);
  std::vector<Record> before;
  {
    LogicalClock clock(from_millis(7));
    StorageOptions o;
    o.journal = path;
    StorageManager sm(&clock, o);
    testgen::populate(sm, rng, 300);
    sm.flush();
    before = sm.dump();
  }
  StorageManager again;
  CHECK(again.replay(path) > 0);
  const auto after = again.dump();
  REQUIRE(after.size() == before.size());
  for (std::size_t i = 0; i < after.size(); ++i) {
    CHECK(after[i].key == before[i].key);
    CHECK(after[i].body == before[i].body);
    CHECK(after[i].revision == before[i].revision);
    CHECK(after[i].committed_at == before[i].committed_at);
  }
}

TEST_CASE("subscriptions see commits in order") {
  StorageManager sm;
  auto sub = sm.subscribe(Namespace::Measurements, "e*");
  sm.create(key("e1", "a", 1), json{{"v", 1}});
  sm.create(key("x1", "a", 1), json{{"v", 2}});
  sm.create(key("e2", "a", 2), json{{"v", 3}});
  sm.remove(key("e1", "a", 1));
  auto got = sub->drain();
  REQUIRE(got.size() == 3);
  CHECK(got[0].key.entity_id == "e1");
  CHECK(got[1].key.entity_id == "e2");
  CHECK(got[2].body.is_null());
  CHECK(got[0].commit_seq < got[1].commit_seq);
}

TEST_CASE("glob matching") {
  CHECK(glob_match("*", ""));
  CHECK(glob_match("e?", "e1"));
  CHECK_FALSE(glob_match("e?", "e12"));
  CHECK(glob_match("urn:*:TLF01", "urn:ngsi-ld:TrafficFlowObserved:TLF01"));
  CHECK_FALSE(glob_match("a*b", "ac"));
}

TEST_CASE("caps evict the oldest record") {
  StorageOptions o;
  o.caps[Namespace::Measurements] = 3;
  StorageManager sm(nullptr, o);
  for (int i = 0; i < 5; ++i) sm.create(key("e", "a", i * 10), json{{"i", i}});
  auto rs = sm.dump(Namespace::Measurements);
  REQUIRE(rs.size() == 3);
  CHECK(rs.front().key.observed_at == from_millis(20));
}

TEST_CASE("concurrent writers and readers") {
  StorageManager sm;
  std::vector<std::thread> ts;
  for (int w = 0; w < 4; ++w) {
    ts.emplace_back([&, w] {
      for (int i = 0; i < 250; ++i) sm.create(key("w" + std::to_string(w), "a", i), json{{"i", i}});
    });
  }
  ts.emplace_back([&] {
    for (int i = 0; i < 100; ++i) {
      Query q;
      q.entity_id = "w0";
      const auto rs = sm.read(q);
      for (std::size_t j = 1; j < rs.size(); ++j) CHECK(rs[j - 1].key.observed_at < rs[j].key.observed_at);
    }
  });
  for (auto& t : ts) t.join();
  CHECK(sm.size() == 1000);
  CHECK(sm.commit_seq() == 1000);
}

TEST_CASE("namespace names") {
  CHECK(namespace_from_string("Measurements") == Namespace::Measurements);
  CHECK(namespace_from_string("simresults") == Namespace::SimResults);
  CHECK_FALSE(namespace_from_string("nope"));
}
