#pragma once

#include <map>
#include <string>
#include <vector>

#include "twinarch/data_model.hpp"
#include "twinarch/storage.hpp"

namespace twinarch {

struct UnitRule {
  std::string canonical;
  double factor = 1.0;
};

/// Source unit -> canonical unit. Speeds end up in km/h.
using UnitTable = std::map<std::string, UnitRule>;
const UnitTable& default_unit_table();

struct ProcessStats {
  std::size_t input = 0;
  std::size_t duplicates = 0;
  std::size_t non_finite = 0;
  std::size_t normalized = 0;
  std::size_t output = 0;
};

class DataProcessor {
 public:
  explicit DataProcessor(UnitTable units = default_unit_table()) : units_(std::move(units)) {}

  /// Dedup on (entity, attribute, observed_at) keeping the first, drop
  /// non-finite numbers, normalize units, sort by (observed_at, entity, attribute).
  std::vector<Measurement> process(std::vector<Measurement> raw, ProcessStats* stats = nullptr) const;

 private:
  UnitTable units_;
};

RecordKey measurement_key(const Measurement& m);
json measurement_body(const Measurement& m);
Measurement measurement_from_record(const Record& r);

struct StoreStats {
  std::size_t stored = 0;
  std::size_t rejected = 0;  // dedup/non-finite drops plus keys already in storage
  std::vector<Measurement> committed;
};

/// Facade over StorageManager and DataProcessor.
class DataManager {
 public:
  DataManager(StorageManager& storage, DataProcessor processor = DataProcessor())
      : storage_(storage), processor_(std::move(processor)) {}

  StoreStats store_measurements(std::vector<Measurement> raw);
  std::vector<Measurement> measurements(const std::string& entity_id,
                                        std::optional<std::string> attribute = std::nullopt) const;

  StorageManager& storage() noexcept { return storage_; }
  const StorageManager& storage() const noexcept { return storage_; }
  const DataProcessor& processor() const noexcept { return processor_; }

 private:
  StorageManager& storage_;
  DataProcessor processor_;
};

}  // namespace twinarch
