#include "twinarch/shadow.hpp"

#include <algorithm>

#include "twinarch/data_manager.hpp"
#include "twinarch/error.hpp"

namespace twinarch {

namespace {

constexpr const char* kMeta = "@meta";

}  // namespace

bool ShadowType::covers(const Measurement& m) const {
  if (!entity_type.empty() && !m.entity_type.empty() && entity_type != m.entity_type) return false;
  return attributes.count(m.attribute) > 0;
}

json to_json(const ShadowType& t) {
  return json{{"name", t.name}, {"attributes", t.attributes}, {"entityType", t.entity_type}};
}

ShadowType shadow_type_from_json(const json& j) {
  if (!j.is_object() || !j.contains("name") || !j["name"].is_string()) {
    fail(ErrorCode::ConfigError, "shadow type needs a name");
  }
  ShadowType t;
  t.name = j["name"].get<std::string>();
  t.entity_type = j.value("entityType", std::string());
  auto attrs = j.find("attributes");
  if (attrs == j.end() || !attrs->is_array()) fail(ErrorCode::ConfigError, "shadow type needs attributes");
  for (const auto& a : *attrs) {
    if (!a.is_string()) fail(ErrorCode::ConfigError, "shadow attribute must be a string");
    t.attributes.insert(a.get<std::string>());
  }
  if (t.name.empty() || t.attributes.empty()) {
    fail(ErrorCode::ConfigError, "shadow type needs a name and at least one attribute");
  }
  return t;
}

std::optional<TracePoint> Shadow::latest(const std::string& attribute) const {
  std::optional<TracePoint> best;
  for (const auto& p : trace) {
    if (p.attribute == attribute && (!best || p.observed_at >= best->observed_at)) best = p;
  }
  return best;
}

json to_json(const Shadow& s) {
  json trace = json::array();
  for (const auto& p : s.trace) {
    json pt{{"observedAt", format_rfc3339(p.observed_at)}, {"attribute", p.attribute},
            {"value", p.value.to_json()}};
    if (p.late) pt["late"] = true;
    trace.push_back(std::move(pt));
  }
  json j{{"shadowId", s.shadow_id},
         {"type", to_json(s.type)},
         {"entityId", s.entity_id},
         {"createdAt", format_rfc3339(s.created_at)},
         {"trace", trace}};
  j["updatedAt"] = s.updated_at ? json(format_rfc3339(*s.updated_at)) : json();
  return j;
}

std::string shadow_id_for(const std::string& type_name, const std::string& entity_id) {
  return type_name + ":" + entity_id;
}

ShadowManager::ShadowManager(StorageManager& storage, const LogicalClock* clock)
    : storage_(storage), clock_(clock) {}

void ShadowManager::register_type(const ShadowType& type) {
  if (type.name.empty() || type.attributes.empty()) {
    fail(ErrorCode::InvalidArgument, "shadow type needs a name and at least one attribute");
  }
  std::lock_guard lock(mu_);
  auto it = types_.find(type.name);
  if (it != types_.end() && !(it->second == type)) {
    fail(ErrorCode::InvalidArgument, "shadow type " + type.name + " already registered differently");
  }
  types_[type.name] = type;
}

std::optional<ShadowType> ShadowManager::type(const std::string& name) const {
  std::lock_guard lock(mu_);
  auto it = types_.find(name);
  if (it == types_.end()) return std::nullopt;
  return it->second;
}

std::string ShadowManager::create_shadow(const std::string& type_name, const std::string& entity_id) {
  std::lock_guard lock(mu_);
  auto t = types_.find(type_name);
  if (t == types_.end()) fail(ErrorCode::NotFound, "shadow type " + type_name);
  if (entity_id.empty()) fail(ErrorCode::InvalidArgument, "shadow needs an entity id");
  const std::string id = shadow_id_for(type_name, entity_id);
  if (index_.count(id)) fail(ErrorCode::DuplicateShadow, id);

  Entry e{t->second, entity_id, clock_ ? clock_->now() : TimePoint{}, std::nullopt, {}};
  storage_.create(RecordKey{Namespace::Shadows, id, kMeta, e.created_at},
                  json{{"type", to_json(e.type)}, {"entity", entity_id}});

  Query q;
  q.ns = Namespace::Measurements;
  q.entity_id = entity_id;
  for (const auto& r : storage_.read(q)) {
    const Measurement m = measurement_from_record(r);
    if (e.type.covers(m)) append_locked(id, e, m);
  }
  index_.emplace(id, std::move(e));
  return id;
}

void ShadowManager::delete_shadow(const std::string& shadow_id) {
  std::lock_guard lock(mu_);
  if (!index_.count(shadow_id)) fail(ErrorCode::NotFound, "shadow " + shadow_id);
  Query q;
  q.ns = Namespace::Shadows;
  q.entity_id = shadow_id;
  for (const auto& r : storage_.read(q)) storage_.remove(r.key);
  index_.erase(shadow_id);
}

bool ShadowManager::append_locked(const std::string& id, Entry& e, const Measurement& m) {
  const RecordKey key{Namespace::Shadows, id, m.attribute, m.observed_at};
  if (storage_.get(key)) return false;
  auto newest = e.newest.find(m.attribute);
  const bool late = newest != e.newest.end() && m.observed_at < newest->second;
  json body{{"value", m.value.to_json()}};
  if (late) body["late"] = true;
  storage_.create(key, std::move(body));
  if (!late) e.newest[m.attribute] = m.observed_at;
  if (!e.updated_at || m.observed_at > *e.updated_at) e.updated_at = m.observed_at;
  return true;
}

std::vector<std::string> ShadowManager::update_from_measurement(const Measurement& m) {
  std::lock_guard lock(mu_);
  std::vector<std::string> updated;
  for (auto& [id, e] : index_) {
    if (e.entity_id != m.entity_id || !e.type.covers(m)) continue;
    if (append_locked(id, e, m)) updated.push_back(id);
  }
  return updated;
}

Shadow ShadowManager::load_locked(const std::string& id, const Entry& e,
                                  std::optional<TimePoint> from, std::optional<TimePoint> to) const {
  Shadow s;
  s.shadow_id = id;
  s.type = e.type;
  s.entity_id = e.entity_id;
  s.created_at = e.created_at;
  s.updated_at = e.updated_at;
  Query q;
  q.ns = Namespace::Shadows;
  q.entity_id = id;
  q.from = from;
  q.to = to;
  for (const auto& r : storage_.read(q)) {
    if (r.key.name == kMeta) continue;
    auto v = Scalar::from_json(r.body.value("value", json()));
    if (!v) fail(ErrorCode::IoError, "shadow point without scalar value");
    s.trace.push_back(TracePoint{r.key.observed_at, r.key.name, *v, r.body.value("late", false)});
  }
  return s;
}

std::vector<Shadow> ShadowManager::get_shadow(const ShadowQuery& q) const {
  if (q.from && q.to && *q.from >= *q.to) fail(ErrorCode::InvalidQuery, "shadow range needs from < to");
  std::lock_guard lock(mu_);
  std::vector<Shadow> out;
  for (const auto& [id, e] : index_) {
    if (q.type && e.type.name != *q.type) continue;
    if (q.entity_id && e.entity_id != *q.entity_id) continue;
    if (q.name && id != *q.name) continue;
    out.push_back(load_locked(id, e, q.from, q.to));
  }
  return out;
}

Shadow ShadowManager::shadow(const std::string& shadow_id) const {
  std::lock_guard lock(mu_);
  auto it = index_.find(shadow_id);
  if (it == index_.end()) fail(ErrorCode::NotFound, "shadow " + shadow_id);
  return load_locked(it->first, it->second, std::nullopt, std::nullopt);
}

std::vector<std::string> ShadowManager::shadow_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, e] : index_) out.push_back(id);
  return out;
}

std::vector<std::string> ShadowManager::shadows_for_entity(const std::string& entity_id) const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, e] : index_) {
    if (e.entity_id == entity_id) out.push_back(id);
  }
  return out;
}

void ShadowManager::rebuild_index() {
  std::lock_guard lock(mu_);
  index_.clear();
  auto records = storage_.dump(Namespace::Shadows);
  for (const auto& r : records) {
    if (r.key.name != kMeta) continue;
    Entry e;
    e.type = shadow_type_from_json(r.body.at("type"));
    e.entity_id = r.body.value("entity", std::string());
    e.created_at = r.key.observed_at;
    types_.emplace(e.type.name, e.type);
    index_[r.key.entity_id] = std::move(e);
  }
  for (const auto& r : records) {
    if (r.key.name == kMeta) continue;
    auto it = index_.find(r.key.entity_id);
    if (it == index_.end()) continue;
    auto& e = it->second;
    auto& newest = e.newest[r.key.name];
    newest = std::max(newest, r.key.observed_at);
    if (!e.updated_at || r.key.observed_at > *e.updated_at) e.updated_at = r.key.observed_at;
  }
}

}  // namespace twinarch
