#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "twinarch/time.hpp"

namespace twinarch {

using nlohmann::json;

/// A single observed value. Numbers are 64-bit floats; the integer flag
/// survives so that schema checks (`integer` vs `double`) stay exact.
class Scalar {
 public:
  Scalar() = default;

  static Scalar number(double v) { return Scalar(v, false); }
  static Scalar integer(std::int64_t v) { return Scalar(static_cast<double>(v), true); }
  static Scalar text(std::string v) { return Scalar(std::move(v)); }
  static Scalar boolean(bool v) { return Scalar(v); }

  /// JSON number/string/boolean only; anything else yields nullopt.
  static std::optional<Scalar> from_json(const json& j);

  bool is_number() const noexcept { return std::holds_alternative<double>(value_); }
  bool is_integer() const noexcept { return is_number() && integer_; }
  bool is_string() const noexcept { return std::holds_alternative<std::string>(value_); }
  bool is_bool() const noexcept { return std::holds_alternative<bool>(value_); }

  double as_number() const { return std::get<double>(value_); }
  const std::string& as_string() const { return std::get<std::string>(value_); }
  bool as_bool() const { return std::get<bool>(value_); }

  json to_json() const;
  /// Shortest text form that parses back to the same value.
  std::string to_text() const;

  bool operator==(const Scalar&) const = default;

 private:
  Scalar(double v, bool integer) : value_(v), integer_(integer) {}
  explicit Scalar(std::string v) : value_(std::move(v)) {}
  explicit Scalar(bool v) : value_(v) {}

  std::variant<double, std::string, bool> value_{0.0};
  bool integer_ = false;
};

struct GeoPoint {
  double lat = 0;
  double lon = 0;
  bool operator==(const GeoPoint&) const = default;
};

enum class Source { Ultralight, DittoThing, DtdlTelemetry, NgsiLd, Internal };
enum class WireFormat { Ultralight, DittoThing, DtdlTelemetry, NgsiLd };

std::string_view to_string(Source s) noexcept;
std::string_view to_string(WireFormat f) noexcept;
std::optional<WireFormat> wire_format_from_string(std::string_view s) noexcept;
std::optional<Source> source_from_string(std::string_view s) noexcept;
Source source_of(WireFormat f) noexcept;

struct Measurement {
  std::string entity_id;
  std::string entity_type;
  std::string attribute;
  Scalar value;
  std::optional<std::string> unit;
  TimePoint observed_at{};
  std::optional<GeoPoint> location;
  Source source = Source::Internal;

  bool operator==(const Measurement&) const = default;
};

struct EntityAttribute {
  Scalar value;
  std::optional<TimePoint> observed_at;
  std::optional<std::string> unit;
  json metadata = json::object();

  bool operator==(const EntityAttribute&) const = default;
};

/// NGSI-LD shaped entity: the canonical form every wire format maps into.
struct CanonicalEntity {
  std::string id;
  std::string type;
  std::map<std::string, EntityAttribute> attributes;
  std::optional<GeoPoint> location;
  json context;  // `@context`, null when absent

  /// Applies an attribute update; returns false (and leaves the entity
  /// unchanged) when the update is older than the stored observation.
  bool update(const std::string& name, const EntityAttribute& attr);

  bool operator==(const CanonicalEntity&) const = default;
};

/// short key -> attribute name
using AttributeMap = std::map<std::string, std::string>;

std::vector<Measurement> parse_ultralight(std::string_view payload, std::string_view device_id,
                                          const AttributeMap& attribute_map,
                                          TimePoint observed_at);

/// Splits an Ultralight payload into raw key/value token pairs. Throws
/// MalformedPayload on structural errors only.
std::vector<std::pair<std::string, std::string>> split_ultralight(std::string_view payload);

/// Converts one Ultralight value token (number if it is a JSON-style number, else text).
std::optional<Scalar> ultralight_value(std::string_view token);

CanonicalEntity parse_ditto_thing(std::string_view json_text);

std::vector<Measurement> parse_dtdl_telemetry(std::string_view model_json,
                                              std::string_view telemetry_json,
                                              std::string_view device_id, TimePoint observed_at);

CanonicalEntity parse_ngsi_ld(std::string_view json_text);

/// One Measurement per attribute; missing observedAt stamps take `ingest_time`.
std::vector<Measurement> to_measurements(const CanonicalEntity& entity, Source source,
                                         TimePoint ingest_time);

struct SerializeOptions {
  /// attribute name -> Ultralight short key
  std::map<std::string, std::string> ultralight_keys;
};

/// Inverts an AttributeMap (short key -> attribute) for serialization.
SerializeOptions ultralight_options(const AttributeMap& attribute_map);

std::string serialize(const CanonicalEntity& entity, WireFormat format,
                      const SerializeOptions& options = {});
std::string serialize(std::span<const Measurement> measurements, WireFormat format,
                      const SerializeOptions& options = {});

/// A DTDL interface declaring one Telemetry entry per distinct attribute.
std::string dtdl_interface_for(std::span<const Measurement> measurements, std::string_view dtmi);

json to_json(const Measurement& m);
Measurement measurement_from_json(const json& j);
json to_json(const CanonicalEntity& e);

/// Dump helper that never throws on invalid UTF-8.
std::string dump_json(const json& j, int indent = -1);
std::string dump_json(const nlohmann::ordered_json& j, int indent = -1);

}  // namespace twinarch
