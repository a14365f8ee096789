// Brute-force shadow trace lengths.
#pragma once

#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "twinarch/shadow.hpp"

namespace twinarch::testgen {

inline std::vector<Measurement> shadow_workload(std::mt19937_64& rng, std::size_t n) {
  std::vector<Measurement> out;
  for (std::size_t i = 0; i < n; ++i) {
    Measurement m;
    m.entity_id = "e" + std::to_string(rng() % 3);
    m.entity_type = rng() % 5 == 0 ? "Other" : "Road";
    m.attribute = "a" + std::to_string(rng() % 4);
    m.value = Scalar::number(static_cast<double>(rng() % 100));
    // times jitter backwards sometimes so late arrivals occur
    m.observed_at = from_millis(static_cast<std::int64_t>(i * 1000) - static_cast<std::int64_t>(rng() % 3) * 2500);
    m.source = Source::Internal;
    out.push_back(m);
  }
  return out;
}

inline std::size_t expected_trace_length(const std::vector<Measurement>& ms, const ShadowType& t,
                                         const std::string& entity) {
  std::set<std::tuple<std::string, TimePoint>> seen;
  for (const auto& m : ms) {
    if (m.entity_id != entity) continue;
    if (!t.attributes.count(m.attribute)) continue;
    if (!t.entity_type.empty() && !m.entity_type.empty() && m.entity_type != t.entity_type) continue;
    seen.emplace(m.attribute, m.observed_at);
  }
  return seen.size();
}

}  // namespace twinarch::testgen
