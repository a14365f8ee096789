#include "twinarch/data_manager.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "twinarch/error.hpp"

namespace twinarch {

const UnitTable& default_unit_table() {
  static const UnitTable table = {
      {"km/h", {"km/h", 1.0}}, {"KMH", {"km/h", 1.0}},      {"m/s", {"km/h", 3.6}},
      {"MTS", {"km/h", 3.6}},  {"mph", {"km/h", 1.609344}}, {"HM", {"km/h", 1.609344}},
  };
  return table;
}

std::vector<Measurement> DataProcessor::process(std::vector<Measurement> raw,
                                                ProcessStats* stats) const {
  ProcessStats st;
  st.input = raw.size();
  std::set<std::tuple<std::string, std::string, TimePoint>> seen;
  std::vector<Measurement> out;
  out.reserve(raw.size());
  for (auto& m : raw) {
    if (m.value.is_number() && !std::isfinite(m.value.as_number())) {
      ++st.non_finite;
      continue;
    }
    if (!seen.emplace(m.entity_id, m.attribute, m.observed_at).second) {
      ++st.duplicates;
      continue;
    }
    if (m.unit && m.value.is_number()) {
      auto rule = units_.find(*m.unit);
      if (rule != units_.end() && (rule->second.factor != 1.0 || *m.unit != rule->second.canonical)) {
        if (rule->second.factor != 1.0) {
          const double v = m.value.as_number() * rule->second.factor;
          m.value = Scalar::number(v);
        }
        m.unit = rule->second.canonical;
        ++st.normalized;
      }
    }
    out.push_back(std::move(m));
  }
  std::stable_sort(out.begin(), out.end(), [](const Measurement& a, const Measurement& b) {
    return std::tie(a.observed_at, a.entity_id, a.attribute) <
           std::tie(b.observed_at, b.entity_id, b.attribute);
  });
  st.output = out.size();
  if (stats) *stats = st;
  return out;
}

RecordKey measurement_key(const Measurement& m) {
  return RecordKey{Namespace::Measurements, m.entity_id, m.attribute, m.observed_at};
}

json measurement_body(const Measurement& m) {
  json body{{"value", m.value.to_json()}, {"source", to_string(m.source)}};
  if (!m.entity_type.empty()) body["entityType"] = m.entity_type;
  if (m.unit) body["unit"] = *m.unit;
  if (m.location) body["location"] = {{"lat", m.location->lat}, {"lon", m.location->lon}};
  return body;
}

Measurement measurement_from_record(const Record& r) {
  Measurement m;
  m.entity_id = r.key.entity_id;
  m.attribute = r.key.name;
  m.observed_at = r.key.observed_at;
  const json& b = r.body;
  auto v = Scalar::from_json(b.value("value", json()));
  if (!v) fail(ErrorCode::IoError, "measurement record without scalar value");
  m.value = *v;
  m.entity_type = b.value("entityType", std::string());
  if (b.contains("unit")) m.unit = b["unit"].get<std::string>();
  if (b.contains("location")) {
    m.location = GeoPoint{b["location"].value("lat", 0.0), b["location"].value("lon", 0.0)};
  }
  m.source = source_from_string(b.value("source", std::string("Internal"))).value_or(Source::Internal);
  return m;
}

StoreStats DataManager::store_measurements(std::vector<Measurement> raw) {
  StoreStats st;
  ProcessStats ps;
  const std::size_t n = raw.size();
  auto clean = processor_.process(std::move(raw), &ps);
  st.rejected = n - clean.size();
  for (auto& m : clean) {
    try {
      storage_.create(measurement_key(m), measurement_body(m));
      ++st.stored;
      st.committed.push_back(std::move(m));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DuplicateKey) throw;
      ++st.rejected;
    }
  }
  return st;
}

std::vector<Measurement> DataManager::measurements(const std::string& entity_id,
                                                   std::optional<std::string> attribute) const {
  Query q;
  q.ns = Namespace::Measurements;
  q.entity_id = entity_id;
  q.name = std::move(attribute);
  std::vector<Measurement> out;
  for (const auto& r : storage_.read(q)) out.push_back(measurement_from_record(r));
  return out;
}

}  // namespace twinarch
