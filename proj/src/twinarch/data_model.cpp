#include "twinarch/data_model.hpp"

#include <charconv>
#include <cmath>
#include <set>

#include "twinarch/error.hpp"

namespace twinarch {

using ojson = nlohmann::ordered_json;

namespace {

constexpr double kMaxExactInteger = 9007199254740992.0;  // 2^53

json parse_json_or_fail(std::string_view text) {
  json j = json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) fail(ErrorCode::MalformedJson, "payload is not valid JSON");
  return j;
}

std::string excerpt(std::string_view s) {
  std::string out;
  for (char c : s.substr(0, 32)) {
    const auto u = static_cast<unsigned char>(c);
    out += (u >= 0x20 && u < 0x7f) ? c : '?';
  }
  if (s.size() > 32) out += "...";
  return out;
}

// JSON number grammar: -?(0|[1-9][0-9]*)(\.[0-9]+)?([eE][+-]?[0-9]+)?
bool looks_like_number(std::string_view s, bool& integral) {
  std::size_t i = 0;
  integral = true;
  if (i < s.size() && s[i] == '-') ++i;
  if (i >= s.size()) return false;
  if (s[i] == '0') {
    ++i;
  } else if (s[i] >= '1' && s[i] <= '9') {
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
  } else {
    return false;
  }
  if (i < s.size() && s[i] == '.') {
    integral = false;
    ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
    if (i == start) return false;
  }
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    integral = false;
    ++i;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
    if (i == start) return false;
  }
  return i == s.size();
}

std::string number_text(double v, bool integer) {
  char buf[64];
  if (integer) {
    auto r = std::to_chars(buf, buf + sizeof buf, static_cast<long long>(v));
    return std::string(buf, r.ptr);
  }
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, r.ptr);
  // Keep a fractional marker so the integer flag round-trips.
  if (s.find_first_of(".eE") == std::string::npos && s.find("inf") == std::string::npos &&
      s.find("nan") == std::string::npos) {
    s += ".0";
  }
  return s;
}

std::string_view ditto_type_name(const Scalar& s) {
  if (s.is_integer()) return "integer";
  if (s.is_number()) return "double";
  if (s.is_string()) return "string";
  return "boolean";
}

bool scalar_matches_schema(const json& value, std::string_view schema) {
  if (schema == "integer") return value.is_number_integer();
  if (schema == "double" || schema == "number" || schema == "float") return value.is_number();
  if (schema == "string") return value.is_string();
  if (schema == "boolean") return value.is_boolean();
  return false;
}

Scalar scalar_for_schema(const json& value, std::string_view schema) {
  if (schema == "integer") {
    if (value.is_number_unsigned()) {
      return Scalar::integer(static_cast<std::int64_t>(value.get<std::uint64_t>()));
    }
    return Scalar::integer(value.get<std::int64_t>());
  }
  if (schema == "string") return Scalar::text(value.get<std::string>());
  if (schema == "boolean") return Scalar::boolean(value.get<bool>());
  return Scalar::number(value.get<double>());
}

bool has_type(const json& node, std::string_view type) {
  if (node.is_string()) return node.get<std::string>() == type;
  if (node.is_array()) {
    for (const auto& t : node) {
      if (t.is_string() && t.get<std::string>() == type) return true;
    }
  }
  return false;
}

std::optional<GeoPoint> parse_point(const json& node) {
  // Coordinates are carried as [lat, lon], the order used by the traffic sensor fixture.
  if (!node.is_object()) return std::nullopt;
  auto type = node.find("type");
  auto coords = node.find("coordinates");
  if (type == node.end() || !type->is_string() || type->get<std::string>() != "Point") {
    return std::nullopt;
  }
  if (coords == node.end() || !coords->is_array() || coords->size() != 2 ||
      !(*coords)[0].is_number() || !(*coords)[1].is_number()) {
    return std::nullopt;
  }
  GeoPoint p{(*coords)[0].get<double>(), (*coords)[1].get<double>()};
  if (!std::isfinite(p.lat) || !std::isfinite(p.lon)) return std::nullopt;
  return p;
}

ojson point_json(const GeoPoint& p) {
  return ojson{{"type", "Point"}, {"coordinates", ojson::array({p.lat, p.lon})}};
}

struct MeasurementGroup {
  std::string entity_id;
  std::string entity_type;
  std::optional<GeoPoint> location;
};

MeasurementGroup single_entity(std::span<const Measurement> ms, std::string_view format) {
  MeasurementGroup g;
  if (ms.empty()) return g;
  g.entity_id = ms.front().entity_id;
  g.entity_type = ms.front().entity_type;
  g.location = ms.front().location;
  std::set<std::string> names;
  for (const auto& m : ms) {
    if (m.entity_id != g.entity_id) {
      fail(ErrorCode::Unrepresentable,
           std::string(format) + " payload carries a single entity");
    }
    if (m.location != g.location) {
      fail(ErrorCode::Unrepresentable, "measurements disagree on location");
    }
    if (!names.insert(m.attribute).second) {
      fail(ErrorCode::Unrepresentable,
           "attribute " + m.attribute + " appears twice in one " + std::string(format) + " payload");
    }
  }
  return g;
}

void require_finite(const Scalar& v, const std::string& attr) {
  if (v.is_number() && !std::isfinite(v.as_number())) {
    fail(ErrorCode::Unrepresentable, "non-finite value for " + attr);
  }
  if (v.is_integer() && std::fabs(v.as_number()) > kMaxExactInteger) {
    fail(ErrorCode::Unrepresentable, "integer out of exact range for " + attr);
  }
}

std::string serialize_ultralight(std::span<const Measurement> ms, const SerializeOptions& opt) {
  if (ms.empty()) fail(ErrorCode::Unrepresentable, "Ultralight payload needs at least one pair");
  const auto g = single_entity(ms, "Ultralight");
  if (g.location) fail(ErrorCode::Unrepresentable, "Ultralight cannot carry a location");
  std::string out;
  for (const auto& m : ms) {
    auto key = opt.ultralight_keys.find(m.attribute);
    if (key == opt.ultralight_keys.end()) {
      fail(ErrorCode::Unrepresentable, "no Ultralight short key for " + m.attribute);
    }
    if (m.unit) fail(ErrorCode::Unrepresentable, "Ultralight cannot carry units");
    require_finite(m.value, m.attribute);
    std::string text;
    if (m.value.is_bool()) {
      fail(ErrorCode::Unrepresentable, "Ultralight has no boolean values");
    } else if (m.value.is_string()) {
      text = m.value.as_string();
      bool integral = false;
      if (text.empty() || text.find('|') != std::string::npos || looks_like_number(text, integral)) {
        fail(ErrorCode::Unrepresentable, "text value not representable in Ultralight");
      }
    } else {
      text = m.value.to_text();
    }
    if (!out.empty()) out += '|';
    out += key->second;
    out += '|';
    out += text;
  }
  return out;
}

ojson dtdl_telemetry_json(std::span<const Measurement> ms) {
  const auto g = single_entity(ms, "DTDL telemetry");
  if (g.location) fail(ErrorCode::Unrepresentable, "DTDL telemetry cannot carry a location");
  ojson out = ojson::object();
  for (const auto& m : ms) {
    require_finite(m.value, m.attribute);
    out[m.attribute] = ojson::parse(m.value.to_json().dump());
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Scalar

std::optional<Scalar> Scalar::from_json(const json& j) {
  if (j.is_boolean()) return boolean(j.get<bool>());
  if (j.is_string()) return text(j.get<std::string>());
  if (j.is_number_unsigned()) return integer(static_cast<std::int64_t>(j.get<std::uint64_t>()));
  if (j.is_number_integer()) return integer(j.get<std::int64_t>());
  if (j.is_number_float()) return number(j.get<double>());
  return std::nullopt;
}

json Scalar::to_json() const {
  if (is_integer()) return json(static_cast<std::int64_t>(as_number()));
  if (is_number()) return json(as_number());
  if (is_string()) return json(as_string());
  return json(as_bool());
}

std::string Scalar::to_text() const {
  if (is_number()) return number_text(as_number(), integer_);
  if (is_string()) return as_string();
  return as_bool() ? "true" : "false";
}

// ---------------------------------------------------------------------------
// Enum names

std::string_view to_string(Source s) noexcept {
  switch (s) {
    case Source::Ultralight: return "Ultralight";
    case Source::DittoThing: return "DittoThing";
    case Source::DtdlTelemetry: return "DtdlTelemetry";
    case Source::NgsiLd: return "NgsiLd";
    case Source::Internal: return "Internal";
  }
  return "Internal";
}

std::string_view to_string(WireFormat f) noexcept {
  switch (f) {
    case WireFormat::Ultralight: return "ultralight";
    case WireFormat::DittoThing: return "ditto";
    case WireFormat::DtdlTelemetry: return "dtdl";
    case WireFormat::NgsiLd: return "ngsi-ld";
  }
  return "ultralight";
}

std::optional<WireFormat> wire_format_from_string(std::string_view s) noexcept {
  if (s == "ultralight") return WireFormat::Ultralight;
  if (s == "ditto") return WireFormat::DittoThing;
  if (s == "dtdl") return WireFormat::DtdlTelemetry;
  if (s == "ngsi-ld" || s == "ngsild") return WireFormat::NgsiLd;
  return std::nullopt;
}

std::optional<Source> source_from_string(std::string_view s) noexcept {
  for (auto src : {Source::Ultralight, Source::DittoThing, Source::DtdlTelemetry, Source::NgsiLd,
                   Source::Internal}) {
    if (to_string(src) == s) return src;
  }
  return std::nullopt;
}

Source source_of(WireFormat f) noexcept {
  switch (f) {
    case WireFormat::Ultralight: return Source::Ultralight;
    case WireFormat::DittoThing: return Source::DittoThing;
    case WireFormat::DtdlTelemetry: return Source::DtdlTelemetry;
    case WireFormat::NgsiLd: return Source::NgsiLd;
  }
  return Source::Internal;
}

// ---------------------------------------------------------------------------
// CanonicalEntity

bool CanonicalEntity::update(const std::string& name, const EntityAttribute& attr) {
  auto it = attributes.find(name);
  if (it != attributes.end() && it->second.observed_at && attr.observed_at &&
      *attr.observed_at < *it->second.observed_at) {
    return false;
  }
  attributes[name] = attr;
  return true;
}

// ---------------------------------------------------------------------------
// Ultralight

std::vector<std::pair<std::string, std::string>> split_ultralight(std::string_view payload) {
  if (payload.empty()) fail(ErrorCode::MalformedPayload, "empty Ultralight payload");
  std::vector<std::string_view> tokens;
  std::size_t start = 0;
  while (true) {
    const auto bar = payload.find('|', start);
    tokens.push_back(payload.substr(start, bar == std::string_view::npos ? bar : bar - start));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  if (tokens.size() % 2 != 0) {
    fail(ErrorCode::MalformedPayload, "odd token count in '" + excerpt(payload) + "'");
  }
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i < tokens.size(); i += 2) {
    if (tokens[i].empty()) fail(ErrorCode::MalformedPayload, "empty key in '" + excerpt(payload) + "'");
    if (tokens[i + 1].empty()) {
      fail(ErrorCode::MalformedPayload, "empty value in '" + excerpt(payload) + "'");
    }
    pairs.emplace_back(std::string(tokens[i]), std::string(tokens[i + 1]));
  }
  return pairs;
}

std::optional<Scalar> ultralight_value(std::string_view token) {
  bool integral = false;
  if (looks_like_number(token, integral)) {
    if (integral) {
      long long v = 0;
      auto r = std::from_chars(token.data(), token.data() + token.size(), v);
      if (r.ec == std::errc() && std::fabs(static_cast<double>(v)) <= kMaxExactInteger) {
        return Scalar::integer(v);
      }
    }
    double d = 0;
    auto r = std::from_chars(token.data(), token.data() + token.size(), d);
    if (r.ec != std::errc() || !std::isfinite(d)) return std::nullopt;
    return Scalar::number(d);
  }
  return Scalar::text(std::string(token));
}

std::vector<Measurement> parse_ultralight(std::string_view payload, std::string_view device_id,
                                          const AttributeMap& attribute_map,
                                          TimePoint observed_at) {
  std::vector<Measurement> out;
  for (auto& [key, token] : split_ultralight(payload)) {
    auto attr = attribute_map.find(key);
    if (attr == attribute_map.end()) fail(ErrorCode::UnknownKey, "unknown Ultralight key '" + excerpt(key) + "'");
    auto value = ultralight_value(token);
    if (!value) fail(ErrorCode::MalformedPayload, "value out of range for key " + key);
    Measurement m;
    m.entity_id = std::string(device_id);
    m.attribute = attr->second;
    m.value = *value;
    m.observed_at = observed_at;
    m.source = Source::Ultralight;
    out.push_back(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Eclipse Ditto

CanonicalEntity parse_ditto_thing(std::string_view text) {
  const json j = parse_json_or_fail(text);
  if (!j.is_object()) fail(ErrorCode::MalformedJson, "Ditto Thing must be a JSON object");
  auto thing_id = j.find("thingId");
  if (thing_id == j.end() || !thing_id->is_string() || thing_id->get<std::string>().empty()) {
    fail(ErrorCode::SchemaViolation, "Ditto Thing lacks a thingId");
  }
  CanonicalEntity e;
  e.id = thing_id->get<std::string>();
  if (auto def = j.find("definition"); def != j.end()) {
    if (!def->is_string()) fail(ErrorCode::SchemaViolation, "definition must be a string");
    e.type = def->get<std::string>();
  }
  auto attrs = j.find("attributes");
  if (attrs == j.end()) return e;
  if (!attrs->is_object()) fail(ErrorCode::SchemaViolation, "attributes must be an object");
  for (const auto& [name, node] : attrs->items()) {
    if (!node.is_object()) fail(ErrorCode::SchemaViolation, "attribute " + excerpt(name) + " is not an object");
    auto type = node.find("type");
    auto value = node.find("value");
    if (type == node.end() || !type->is_string() || value == node.end()) {
      fail(ErrorCode::SchemaViolation, "attribute " + excerpt(name) + " needs type and value");
    }
    const std::string schema = type->get<std::string>();
    if (!scalar_matches_schema(*value, schema)) {
      fail(ErrorCode::SchemaViolation,
           "attribute " + excerpt(name) + " declared " + excerpt(schema) + " but value does not match");
    }
    if (value->is_number_float() && !std::isfinite(value->get<double>())) {
      fail(ErrorCode::SchemaViolation, "non-finite value");
    }
    EntityAttribute attr;
    attr.value = scalar_for_schema(*value, schema);
    for (const auto& [k, v] : node.items()) {
      if (k == "type" || k == "value") continue;
      if (k == "unit" && v.is_string()) {
        attr.unit = v.get<std::string>();
        continue;
      }
      attr.metadata[k] = v;
    }
    e.attributes[name] = std::move(attr);
  }
  return e;
}

// ---------------------------------------------------------------------------
// DTDL

std::vector<Measurement> parse_dtdl_telemetry(std::string_view model_json,
                                              std::string_view telemetry_json,
                                              std::string_view device_id, TimePoint observed_at) {
  const json model = parse_json_or_fail(model_json);
  const json telemetry = parse_json_or_fail(telemetry_json);
  if (!model.is_object() || !has_type(model.value("@type", json()), "Interface")) {
    fail(ErrorCode::SchemaViolation, "DTDL model must be an Interface");
  }
  auto model_id = model.find("@id");
  if (model_id == model.end() || !model_id->is_string()) {
    fail(ErrorCode::SchemaViolation, "DTDL interface lacks @id");
  }
  struct Decl {
    std::string schema;
    std::optional<std::string> unit;
  };
  std::map<std::string, Decl> declared;
  if (auto contents = model.find("contents"); contents != model.end()) {
    if (!contents->is_array()) fail(ErrorCode::SchemaViolation, "contents must be an array");
    for (const auto& entry : *contents) {
      if (!entry.is_object() || !has_type(entry.value("@type", json()), "Telemetry")) continue;
      auto name = entry.find("name");
      auto schema = entry.find("schema");
      if (name == entry.end() || !name->is_string() || schema == entry.end() || !schema->is_string()) {
        fail(ErrorCode::SchemaViolation, "Telemetry entry needs name and schema");
      }
      Decl d{schema->get<std::string>(), std::nullopt};
      if (auto unit = entry.find("unit"); unit != entry.end() && unit->is_string()) {
        d.unit = unit->get<std::string>();
      }
      declared[name->get<std::string>()] = std::move(d);
    }
  }
  if (!telemetry.is_object()) fail(ErrorCode::SchemaViolation, "telemetry must be a JSON object");

  const std::string dtmi = model_id->get<std::string>();
  std::vector<Measurement> out;
  for (const auto& [name, value] : telemetry.items()) {
    auto decl = declared.find(name);
    if (decl == declared.end()) {
      fail(ErrorCode::UndeclaredTelemetry, "telemetry '" + excerpt(name) + "' not declared by " + excerpt(dtmi));
    }
    const auto& schema = decl->second.schema;
    if (schema != "integer" && schema != "double" && schema != "string" && schema != "boolean") {
      fail(ErrorCode::SchemaViolation, "unsupported DTDL schema " + excerpt(schema));
    }
    if (!scalar_matches_schema(value, schema) ||
        (value.is_number_float() && !std::isfinite(value.get<double>()))) {
      fail(ErrorCode::SchemaViolation, "telemetry '" + excerpt(name) + "' does not match schema " + schema);
    }
    Measurement m;
    m.entity_id = device_id.empty() ? dtmi : std::string(device_id);
    m.entity_type = dtmi;
    m.attribute = name;
    m.value = scalar_for_schema(value, schema);
    m.unit = decl->second.unit;
    m.observed_at = observed_at;
    m.source = Source::DtdlTelemetry;
    out.push_back(std::move(m));
  }
  return out;
}

std::string dtdl_interface_for(std::span<const Measurement> ms, std::string_view dtmi) {
  ojson contents = ojson::array();
  std::set<std::string> seen;
  for (const auto& m : ms) {
    if (!seen.insert(m.attribute).second) continue;
    ojson entry = {{"@type", "Telemetry"}, {"name", m.attribute}, {"schema", ditto_type_name(m.value)}};
    if (m.unit) entry["unit"] = *m.unit;
    contents.push_back(std::move(entry));
  }
  ojson model = {{"@id", std::string(dtmi)}, {"@type", "Interface"}, {"contents", contents}};
  return dump_json(model);
}

// ---------------------------------------------------------------------------
// NGSI-LD

CanonicalEntity parse_ngsi_ld(std::string_view text) {
  const json j = parse_json_or_fail(text);
  if (!j.is_object()) fail(ErrorCode::MalformedJson, "NGSI-LD entity must be a JSON object");
  auto id = j.find("id");
  auto type = j.find("type");
  if (id == j.end() || !id->is_string() || id->get<std::string>().empty()) {
    fail(ErrorCode::SchemaViolation, "NGSI-LD entity lacks id");
  }
  if (type == j.end() || !type->is_string() || type->get<std::string>().empty()) {
    fail(ErrorCode::SchemaViolation, "NGSI-LD entity lacks type");
  }
  CanonicalEntity e;
  e.id = id->get<std::string>();
  e.type = type->get<std::string>();
  for (const auto& [key, node] : j.items()) {
    if (key == "id" || key == "type") continue;
    if (key == "@context") {
      e.context = node;
      continue;
    }
    if (key == "location") {
      std::optional<GeoPoint> p = parse_point(node);
      if (!p && node.is_object() && node.contains("value")) p = parse_point(node["value"]);
      if (!p) fail(ErrorCode::SchemaViolation, "location must be a GeoJSON Point");
      e.location = p;
      continue;
    }
    EntityAttribute attr;
    if (auto scalar = Scalar::from_json(node)) {
      attr.value = *scalar;
    } else if (node.is_object()) {
      auto value = node.find("value");
      if (value == node.end()) value = node.find("object");
      if (value == node.end()) fail(ErrorCode::SchemaViolation, "attribute " + excerpt(key) + " has no value");
      auto sv = Scalar::from_json(*value);
      if (!sv) fail(ErrorCode::SchemaViolation, "attribute " + excerpt(key) + " has a non-scalar value");
      if (sv->is_number() && !std::isfinite(sv->as_number())) {
        fail(ErrorCode::SchemaViolation, "non-finite value");
      }
      attr.value = *sv;
      for (const auto& [k, v] : node.items()) {
        if (k == "value" || k == "object") continue;
        if (k == "observedAt") {
          if (!v.is_string()) fail(ErrorCode::SchemaViolation, "observedAt must be a string");
          auto t = parse_rfc3339(v.get<std::string>());
          if (!t) fail(ErrorCode::SchemaViolation, "observedAt is not an RFC 3339 timestamp");
          attr.observed_at = *t;
        } else if (k == "unitCode" && v.is_string()) {
          attr.unit = v.get<std::string>();
        } else {
          attr.metadata[k] = v;
        }
      }
    } else {
      fail(ErrorCode::SchemaViolation, "attribute " + excerpt(key) + " must be an object or scalar");
    }
    e.attributes[key] = std::move(attr);
  }
  return e;
}

// ---------------------------------------------------------------------------
// Conversions

std::vector<Measurement> to_measurements(const CanonicalEntity& e, Source source,
                                         TimePoint ingest_time) {
  std::vector<Measurement> out;
  for (const auto& [name, attr] : e.attributes) {
    Measurement m;
    m.entity_id = e.id;
    m.entity_type = e.type;
    m.attribute = name;
    m.value = attr.value;
    m.unit = attr.unit;
    m.observed_at = attr.observed_at.value_or(ingest_time);
    m.location = e.location;
    m.source = source;
    out.push_back(std::move(m));
  }
  return out;
}

SerializeOptions ultralight_options(const AttributeMap& attribute_map) {
  SerializeOptions opt;
  for (const auto& [key, attr] : attribute_map) opt.ultralight_keys[attr] = key;
  return opt;
}

std::string serialize(const CanonicalEntity& e, WireFormat format, const SerializeOptions& opt) {
  switch (format) {
    case WireFormat::NgsiLd: {
      ojson out;
      out["id"] = e.id;
      out["type"] = e.type;
      if (!e.context.is_null()) out["@context"] = ojson::parse(e.context.dump());
      if (e.location) out["location"] = point_json(*e.location);
      for (const auto& [name, attr] : e.attributes) {
        require_finite(attr.value, name);
        ojson a = ojson::object();
        const bool relationship = attr.metadata.is_object() && attr.metadata.contains("type") &&
                                  attr.metadata["type"] == "Relationship";
        if (attr.metadata.contains("type")) a["type"] = ojson::parse(attr.metadata["type"].dump());
        a[relationship ? "object" : "value"] = ojson::parse(attr.value.to_json().dump());
        if (attr.observed_at) a["observedAt"] = format_rfc3339(*attr.observed_at);
        if (attr.unit) a["unitCode"] = *attr.unit;
        for (const auto& [k, v] : attr.metadata.items()) {
          if (k != "type") a[k] = ojson::parse(v.dump());
        }
        out[name] = std::move(a);
      }
      return dump_json(out);
    }
    case WireFormat::DittoThing: {
      if (e.location) fail(ErrorCode::Unrepresentable, "Ditto Thing attributes cannot carry a location");
      ojson out;
      out["thingId"] = e.id;
      if (!e.type.empty()) out["definition"] = e.type;
      ojson attrs = ojson::object();
      for (const auto& [name, attr] : e.attributes) {
        require_finite(attr.value, name);
        ojson a = {{"type", ditto_type_name(attr.value)}, {"value", ojson::parse(attr.value.to_json().dump())}};
        if (attr.unit) a["unit"] = *attr.unit;
        for (const auto& [k, v] : attr.metadata.items()) {
          if (k != "type" && k != "value" && k != "unit") a[k] = ojson::parse(v.dump());
        }
        attrs[name] = std::move(a);
      }
      out["attributes"] = std::move(attrs);
      return dump_json(out);
    }
    case WireFormat::DtdlTelemetry:
    case WireFormat::Ultralight: {
      const auto ms = to_measurements(e, Source::Internal, TimePoint{});
      return serialize(std::span<const Measurement>(ms), format, opt);
    }
  }
  fail(ErrorCode::Internal, "unhandled wire format");
}

std::string serialize(std::span<const Measurement> ms, WireFormat format,
                      const SerializeOptions& opt) {
  switch (format) {
    case WireFormat::Ultralight: return serialize_ultralight(ms, opt);
    case WireFormat::DtdlTelemetry: return dump_json(dtdl_telemetry_json(ms));
    case WireFormat::DittoThing:
    case WireFormat::NgsiLd: {
      if (ms.empty()) fail(ErrorCode::Unrepresentable, "entity payload needs at least one measurement");
      const auto g = single_entity(ms, to_string(format));
      CanonicalEntity e;
      e.id = g.entity_id;
      e.type = g.entity_type;
      e.location = g.location;
      for (const auto& m : ms) {
        EntityAttribute a;
        a.value = m.value;
        a.unit = m.unit;
        if (format == WireFormat::NgsiLd) a.observed_at = m.observed_at;
        e.attributes[m.attribute] = std::move(a);
      }
      if (format == WireFormat::NgsiLd && e.type.empty()) {
        fail(ErrorCode::Unrepresentable, "NGSI-LD entity needs a type");
      }
      return serialize(e, format, opt);
    }
  }
  fail(ErrorCode::Internal, "unhandled wire format");
}

// ---------------------------------------------------------------------------
// Canonical JSON

json to_json(const Measurement& m) {
  json j;
  j["entityId"] = m.entity_id;
  j["entityType"] = m.entity_type;
  j["attribute"] = m.attribute;
  j["value"] = m.value.to_json();
  if (m.unit) j["unit"] = *m.unit;
  j["observedAt"] = format_rfc3339(m.observed_at);
  if (m.location) j["location"] = {{"lat", m.location->lat}, {"lon", m.location->lon}};
  j["source"] = to_string(m.source);
  return j;
}

Measurement measurement_from_json(const json& j) {
  try {
    Measurement m;
    m.entity_id = j.at("entityId").get<std::string>();
    m.entity_type = j.value("entityType", std::string());
    m.attribute = j.at("attribute").get<std::string>();
    auto v = Scalar::from_json(j.at("value"));
    if (!v) fail(ErrorCode::SchemaViolation, "measurement value must be scalar");
    m.value = *v;
    if (j.contains("unit")) m.unit = j["unit"].get<std::string>();
    auto t = parse_rfc3339(j.at("observedAt").get<std::string>());
    if (!t) fail(ErrorCode::SchemaViolation, "observedAt is not RFC 3339");
    m.observed_at = *t;
    if (j.contains("location")) {
      m.location = GeoPoint{j["location"].at("lat").get<double>(), j["location"].at("lon").get<double>()};
    }
    m.source = source_from_string(j.value("source", std::string("Internal"))).value_or(Source::Internal);
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaViolation, e.what());
  }
}

json to_json(const CanonicalEntity& e) {
  return json::parse(serialize(e, WireFormat::NgsiLd));
}

std::string dump_json(const json& j, int indent) {
  return j.dump(indent, ' ', false, json::error_handler_t::replace);
}

std::string dump_json(const ojson& j, int indent) {
  return j.dump(indent, ' ', false, ojson::error_handler_t::replace);
}

}  // namespace twinarch
