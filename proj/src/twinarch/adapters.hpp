#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "twinarch/data_manager.hpp"
#include "twinarch/data_model.hpp"
#include "twinarch/feedback.hpp"

namespace twinarch {

struct DeviceInfo {
  std::string entity_id;
  std::string entity_type;
  std::map<std::string, std::string> attributes;  // e.g. sensorType=trafficLoop
};

using DeviceRegistry = std::map<std::string, DeviceInfo>;

/// Exact match on device attributes. An empty filter accepts every known device.
struct DeviceFilter {
  std::map<std::string, std::string> required;

  bool accepts(const DeviceInfo& device) const noexcept;
};

enum class Direction { P2D, D2P };

struct AdapterConfig {
  Direction direction = Direction::P2D;
  WireFormat format = WireFormat::Ultralight;
  DeviceFilter filter;
  AttributeMap attribute_map;
  std::string dtdl_model;  // interface JSON, DTDL only
  DeviceRegistry devices;
  std::string command_device;  // D2P: device that receives commands
};

AdapterConfig adapter_config_from_json(const json& j);

struct IngestReceipt {
  std::size_t stored = 0;
  std::size_t rejected = 0;
  std::size_t parse_failed = 0;
  std::vector<Measurement> committed;
};

class P2DAdapter {
 public:
  P2DAdapter(AdapterConfig cfg, DataManager& data);

  /// Parses, filters, processes and commits one payload. A structurally
  /// unparseable payload throws ParseError carrying an excerpt; per-pair
  /// Ultralight key failures are counted as parse_failed instead.
  IngestReceipt ingest(std::string_view raw, const std::string& device_id, TimePoint now);

  /// Parsing only, no filter and no storage.
  std::vector<Measurement> decode(std::string_view raw, const std::string& device_id, TimePoint now,
                                  std::size_t* parse_failed = nullptr) const;

  const IngestReceipt& totals() const noexcept { return totals_; }
  const AdapterConfig& config() const noexcept { return cfg_; }

 private:
  AdapterConfig cfg_;
  DataManager& data_;
  IngestReceipt totals_;
};

struct Ack {
  bool ok = false;
  std::string correlation_id;
  std::string reason;
};

class DataReceiverPort {
 public:
  virtual ~DataReceiverPort() = default;
  virtual Ack deliver(std::string_view payload) = 0;
};

struct Delivery {
  std::string payload;
  Ack ack;
};

class D2PAdapter {
 public:
  D2PAdapter(AdapterConfig cfg, DataReceiverPort& receiver);

  /// Alert -> one notification; CommandPlan -> one envelope per action in
  /// plan order. The CommandPlan's commands vector is filled in. Throws
  /// DeliveryFailed on the first negative acknowledgement.
  std::vector<Delivery> emit(Feedback& fb, TimePoint now);

  /// Encodes without delivering.
  std::vector<OutboundCommand> commands_for(const Plan& plan, TimePoint now);
  std::string alert_payload(const Alert& alert, TimePoint now);

  std::size_t emitted() const noexcept { return emitted_; }

 private:
  std::string next_correlation_id();

  AdapterConfig cfg_;
  DataReceiverPort& receiver_;
  std::size_t emitted_ = 0;
  std::size_t counter_ = 0;
};

}  // namespace twinarch
