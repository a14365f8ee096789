// Random generators shared by unit and acceptance tests.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "twinarch/data_model.hpp"

namespace twinarch::testgen {

inline std::string letters(std::mt19937_64& rng, int lo, int hi) {
  std::uniform_int_distribution<int> len(lo, hi), ch('a', 'z');
  std::string s(static_cast<std::size_t>(len(rng)), 'a');
  for (auto& c : s) c = static_cast<char>(ch(rng));
  return s;
}

inline Scalar number(std::mt19937_64& rng) {
  if (rng() % 2) return Scalar::integer(std::uniform_int_distribution<std::int64_t>(-1000000, 1000000)(rng));
  const double mag = std::pow(10.0, std::uniform_int_distribution<int>(-6, 9)(rng));
  return Scalar::number(std::uniform_real_distribution<double>(-1, 1)(rng) * mag);
}

inline Scalar scalar(std::mt19937_64& rng, bool allow_bool = true) {
  switch (rng() % (allow_bool ? 4 : 3)) {
    case 0:
    case 1:
      return number(rng);
    case 2:
      return Scalar::text(letters(rng, 1, 8));
    default:
      return Scalar::boolean(rng() % 2 == 0);
  }
}

inline TimePoint instant(std::mt19937_64& rng) {
  // 2000-01-01 .. 2037-12-31, millisecond resolution
  return from_millis(std::uniform_int_distribution<std::int64_t>(946684800000LL, 2145830400000LL)(rng));
}

inline CanonicalEntity ngsi_entity(std::mt19937_64& rng) {
  CanonicalEntity e;
  e.id = "urn:ngsi-ld:T:" + std::to_string(rng() % 100000);
  e.type = "T" + letters(rng, 1, 4);
  const int n = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < n; ++i) {
    EntityAttribute a;
    a.value = scalar(rng);
    if (rng() % 2) a.observed_at = instant(rng);
    if (a.value.is_number() && rng() % 3 == 0) a.unit = "KMH";
    e.attributes["a" + std::to_string(rng() % 5)] = a;
  }
  if (rng() % 2) {
    e.location = GeoPoint{std::uniform_real_distribution<double>(-90, 90)(rng),
                          std::uniform_real_distribution<double>(-180, 180)(rng)};
  }
  return e;
}

inline CanonicalEntity ditto_entity(std::mt19937_64& rng) {
  CanonicalEntity e;
  e.id = "example:" + letters(rng, 1, 10);
  if (rng() % 2) e.type = "example:def:" + letters(rng, 1, 4);
  const int n = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < n; ++i) {
    EntityAttribute a;
    a.value = scalar(rng);
    if (a.value.is_number() && rng() % 3 == 0) a.unit = "km/h";
    e.attributes["a" + std::to_string(rng() % 5)] = a;
  }
  return e;
}

inline AttributeMap ultralight_map() {
  AttributeMap m;
  for (int i = 0; i < 5; ++i) m["k" + std::to_string(i)] = "a" + std::to_string(i);
  return m;
}

/// Distinct attributes of one device, as parse_ultralight would produce them.
inline std::vector<Measurement> ultralight_measurements(std::mt19937_64& rng, const std::string& device, TimePoint t) {
  std::vector<Measurement> out;
  const int n = 1 + static_cast<int>(rng() % 4);
  std::vector<int> idx{0, 1, 2, 3, 4};
  std::shuffle(idx.begin(), idx.end(), rng);
  for (int i = 0; i < n; ++i) {
    Measurement m;
    m.entity_id = device;
    m.attribute = "a" + std::to_string(idx[static_cast<std::size_t>(i)]);
    m.value = scalar(rng, false);
    m.observed_at = t;
    m.source = Source::Ultralight;
    out.push_back(m);
  }
  return out;
}

inline std::vector<Measurement> dtdl_measurements(std::mt19937_64& rng, const std::string& device,
                                                  const std::string& dtmi, TimePoint t) {
  auto out = ultralight_measurements(rng, device, t);
  for (auto& m : out) {
    m.entity_type = dtmi;
    m.source = Source::DtdlTelemetry;
    if (rng() % 4 == 0) m.value = Scalar::boolean(rng() % 2 == 0);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.attribute < b.attribute; });
  return out;
}

}  // namespace twinarch::testgen
