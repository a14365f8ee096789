#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "twinarch/time.hpp"

namespace twinarch {

using nlohmann::json;

enum class Namespace { Measurements, Shadows, SimResults, States, Plans, Feedback };

std::string_view to_string(Namespace ns) noexcept;
std::optional<Namespace> namespace_from_string(std::string_view s) noexcept;

struct RecordKey {
  Namespace ns = Namespace::Measurements;
  std::string entity_id;
  std::string name;  // attribute for measurements, record name otherwise
  TimePoint observed_at{};

  auto operator<=>(const RecordKey&) const = default;
  bool operator==(const RecordKey&) const = default;
};

struct Record {
  RecordKey key;
  json body;
  std::uint64_t revision = 0;
  TimePoint committed_at{};
  std::uint64_t commit_seq = 0;

  bool operator==(const Record&) const = default;
};

struct Query {
  Namespace ns = Namespace::Measurements;
  std::optional<std::string> entity_id;
  std::optional<std::string> name;
  std::optional<TimePoint> from;  // inclusive
  std::optional<TimePoint> to;    // exclusive
  std::optional<std::size_t> limit;
};

/// Throws InvalidQuery for from >= to or limit 0.
void validate(const Query& q);
bool matches(const Query& q, const RecordKey& key) noexcept;

/// Read ordering: observed_at ascending, then entity, then name.
bool read_order(const Record& a, const Record& b) noexcept;

/// `*` and `?` wildcards over the whole string.
bool glob_match(std::string_view pattern, std::string_view text) noexcept;

json to_json(const RecordKey& key);
RecordKey record_key_from_json(const json& j);
json to_json(const Record& r);

/// Ordered in-memory map with an optional JSON-lines journal. Not synchronized;
/// StorageManager owns the locking.
class SharedStorage {
 public:
  SharedStorage() = default;
  /// Appends to `journal` (created if missing). Existing lines are not replayed.
  explicit SharedStorage(const std::filesystem::path& journal);

  const Record* find(const RecordKey& key) const;
  /// Writes or replaces the record and journals it.
  void put(const Record& r);
  /// Removes the key; journals a tombstone carrying `revision`.
  void erase(const RecordKey& key, std::uint64_t revision, TimePoint committed_at);

  std::vector<Record> scan(const Query& q) const;
  std::vector<Record> all() const;
  std::size_t size() const noexcept { return records_.size(); }
  std::size_t count(Namespace ns) const;
  /// Oldest (by observed_at, then key) record in the namespace.
  const Record* oldest(Namespace ns) const;

  /// Highest revision ever assigned to `key`, including deleted incarnations.
  std::uint64_t last_revision(const RecordKey& key) const;

  /// Applies one journal line without re-journaling it. Returns the applied
  /// record; the body is null for tombstones.
  Record apply_journal_line(const json& line);

  bool journaled() const noexcept { return journal_.is_open(); }
  void flush();

 private:
  void journal(const RecordKey& key, const json& body, std::uint64_t revision,
               TimePoint committed_at);

  std::map<RecordKey, Record> records_;
  std::map<RecordKey, std::uint64_t> retired_;
  std::ofstream journal_;
};

/// Queue of records delivered to one subscriber, in commit order.
class Subscription {
 public:
  Subscription(Namespace ns, std::string pattern) : ns_(ns), pattern_(std::move(pattern)) {}

  std::optional<Record> try_pop();
  std::optional<Record> wait_pop(std::chrono::milliseconds timeout);
  std::vector<Record> drain();
  std::size_t pending() const;

  bool wants(const RecordKey& key) const noexcept;
  void push(const Record& r);

 private:
  Namespace ns_;
  std::string pattern_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Record> queue_;
};

struct StorageOptions {
  std::optional<std::filesystem::path> journal;
  /// Per-namespace record cap; the oldest record is evicted on overflow.
  std::map<Namespace, std::size_t> caps;
};

/// The CRUDop provider over SharedStorage.
class StorageManager {
 public:
  explicit StorageManager(const LogicalClock* clock = nullptr, StorageOptions options = {});

  std::uint64_t create(const RecordKey& key, json body);
  std::vector<Record> read(const Query& q) const;
  std::optional<Record> get(const RecordKey& key) const;
  std::uint64_t update(const RecordKey& key, json body);
  void remove(const RecordKey& key);

  /// Rebuilds state from a journal file into this (normally empty) store.
  /// Replayed lines are not journaled again. Returns the number of lines applied.
  std::size_t replay(const std::filesystem::path& journal);

  std::shared_ptr<Subscription> subscribe(Namespace ns, std::string entity_pattern);

  std::vector<Record> dump(std::optional<Namespace> ns = std::nullopt) const;
  std::size_t size() const;
  std::uint64_t commit_seq() const;
  void flush();

 private:
  TimePoint now() const { return clock_ ? clock_->now() : TimePoint{}; }
  void publish(const Record& r);
  void enforce_cap(Namespace ns);

  const LogicalClock* clock_;
  StorageOptions options_;
  mutable std::shared_mutex mu_;
  SharedStorage storage_;
  std::uint64_t seq_ = 0;
  std::mutex sub_mu_;
  std::vector<std::weak_ptr<Subscription>> subscribers_;
};

}  // namespace twinarch
