#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "twinarch/data_model.hpp"
#include "twinarch/storage.hpp"

namespace twinarch {

struct ShadowType {
  std::string name;
  std::set<std::string> attributes;
  std::string entity_type;  // empty matches any entity type

  bool covers(const Measurement& m) const;
  bool operator==(const ShadowType&) const = default;
};

json to_json(const ShadowType& t);
ShadowType shadow_type_from_json(const json& j);

struct TracePoint {
  TimePoint observed_at{};
  std::string attribute;
  Scalar value;
  bool late = false;

  bool operator==(const TracePoint&) const = default;
};

struct Shadow {
  std::string shadow_id;
  ShadowType type;
  std::string entity_id;
  std::vector<TracePoint> trace;  // sorted by (observed_at, attribute)
  TimePoint created_at{};
  std::optional<TimePoint> updated_at;

  /// Newest point for `attribute` by timestamp.
  std::optional<TracePoint> latest(const std::string& attribute) const;
  bool operator==(const Shadow&) const = default;
};

json to_json(const Shadow& s);

struct ShadowQuery {
  std::optional<std::string> type;
  std::optional<std::string> entity_id;
  std::optional<std::string> name;  // shadow id
  std::optional<TimePoint> from;
  std::optional<TimePoint> to;
};

std::string shadow_id_for(const std::string& type_name, const std::string& entity_id);

/// Lifecycle and query surface for digital shadows. Trace points live in the
/// Shadows namespace; this class holds only an index.
class ShadowManager {
 public:
  explicit ShadowManager(StorageManager& storage, const LogicalClock* clock = nullptr);

  void register_type(const ShadowType& type);
  std::optional<ShadowType> type(const std::string& name) const;

  /// Backfills from the Measurements namespace. Throws DuplicateShadow.
  std::string create_shadow(const std::string& type_name, const std::string& entity_id);
  void delete_shadow(const std::string& shadow_id);

  std::vector<std::string> update_from_measurement(const Measurement& m);

  std::vector<Shadow> get_shadow(const ShadowQuery& q) const;
  /// Whole shadow; throws NotFound.
  Shadow shadow(const std::string& shadow_id) const;
  std::vector<std::string> shadow_ids() const;
  std::vector<std::string> shadows_for_entity(const std::string& entity_id) const;

  /// Rebuilds the in-memory index from the Shadows namespace, e.g. after journal replay.
  void rebuild_index();

 private:
  struct Entry {
    ShadowType type;
    std::string entity_id;
    TimePoint created_at{};
    std::optional<TimePoint> updated_at;
    std::map<std::string, TimePoint> newest;
  };

  bool append_locked(const std::string& id, Entry& e, const Measurement& m);
  Shadow load_locked(const std::string& id, const Entry& e, std::optional<TimePoint> from,
                     std::optional<TimePoint> to) const;

  StorageManager& storage_;
  const LogicalClock* clock_;
  mutable std::mutex mu_;
  std::map<std::string, ShadowType> types_;
  std::map<std::string, Entry> index_;
};

}  // namespace twinarch
