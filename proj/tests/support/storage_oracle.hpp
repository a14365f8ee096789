// Brute-force reference for StorageManager reads.
#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <vector>

#include "twinarch/storage.hpp"

namespace twinarch::testgen {

struct FlatRecord {
  RecordKey key;
  json body;
  std::uint64_t revision;
};

/// Linear scan over every live record, then the documented read order.
inline std::vector<FlatRecord> brute_read(const std::vector<FlatRecord>& all, const Query& q) {
  std::vector<FlatRecord> out;
  for (const auto& r : all) {
    const auto& k = r.key;
    if (k.ns != q.ns) continue;
    if (q.entity_id && k.entity_id != *q.entity_id) continue;
    if (q.name && k.name != *q.name) continue;
    if (q.from && k.observed_at < *q.from) continue;
    if (q.to && !(k.observed_at < *q.to)) continue;
    out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const FlatRecord& a, const FlatRecord& b) {
    if (a.key.observed_at != b.key.observed_at) return a.key.observed_at < b.key.observed_at;
    if (a.key.entity_id != b.key.entity_id) return a.key.entity_id < b.key.entity_id;
    return a.key.name < b.key.name;
  });
  if (q.limit && out.size() > *q.limit) out.resize(*q.limit);
  return out;
}

inline RecordKey random_key(std::mt19937_64& rng) {
  static const Namespace spaces[] = {Namespace::Measurements, Namespace::Shadows, Namespace::States};
  RecordKey k;
  k.ns = spaces[rng() % 3];
  k.entity_id = "e" + std::to_string(rng() % 20);
  k.name = "n" + std::to_string(rng() % 6);
  k.observed_at = from_millis(static_cast<std::int64_t>(rng() % 5000) * 1000);
  return k;
}

inline Query random_query(std::mt19937_64& rng) {
  static const Namespace spaces[] = {Namespace::Measurements, Namespace::Shadows, Namespace::States};
  Query q;
  q.ns = spaces[rng() % 3];
  if (rng() % 2) q.entity_id = "e" + std::to_string(rng() % 22);
  if (rng() % 3 == 0) q.name = "n" + std::to_string(rng() % 7);
  std::int64_t a = static_cast<std::int64_t>(rng() % 5200), b = static_cast<std::int64_t>(rng() % 5200);
  if (a > b) std::swap(a, b);
  if (rng() % 2) q.from = from_millis(a * 1000);
  if (rng() % 2 && b > a) q.to = from_millis(b * 1000);
  if (q.from && q.to && *q.from >= *q.to) q.to.reset();
  if (rng() % 4 == 0) q.limit = 1 + rng() % 50;
  return q;
}

/// Inserts `n` distinct random records (with some updates and deletes) into
/// both the store and the flat model.
inline std::vector<FlatRecord> populate(StorageManager& sm, std::mt19937_64& rng, std::size_t n) {
  std::map<RecordKey, FlatRecord> model;
  while (model.size() < n) {
    RecordKey k = random_key(rng);
    auto it = model.find(k);
    const json body{{"v", static_cast<std::int64_t>(rng() % 1000)}};
    if (it == model.end()) {
      const auto rev = sm.create(k, body);
      model.emplace(k, FlatRecord{k, body, rev});
    } else if (rng() % 4 == 0) {
      sm.remove(k);
      model.erase(it);
    } else {
      it->second.revision = sm.update(k, body);
      it->second.body = body;
    }
  }
  std::vector<FlatRecord> out;
  for (auto& [k, r] : model) out.push_back(r);
  return out;
}

}  // namespace twinarch::testgen
