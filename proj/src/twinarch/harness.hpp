#pragma once

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "twinarch/adapters.hpp"
#include "twinarch/data_model.hpp"

namespace twinarch {

struct ScheduleEntry {
  int tick = 0;
  double flow = 0;
};

enum class FaultKind { Drop, Corrupt, Delay };

struct Fault {
  int tick = 0;
  FaultKind kind = FaultKind::Drop;
  int delay = 1;  // Delay only
};

struct HarnessConfig {
  std::string device_id = "TLF01";
  WireFormat format = WireFormat::Ultralight;
  std::string attribute = "vehicleFlow";
  std::string key = "f";  // Ultralight short key for `attribute`
  std::string entity_id;  // Ditto / NGSI-LD payload id; defaults to device_id
  std::string entity_type;
  std::string dtmi = "dtmi:example:TrafficSensor;1";
  std::vector<ScheduleEntry> schedule;  // ticks non-decreasing
  int latency = 0;                      // actuator latency in ticks
  std::vector<Fault> faults;
  double response_gain = 0.5;  // emitted flow drop per green-extension second
  double jitter = 0;           // relative, seeded
  std::uint64_t seed = 0;
  std::optional<GeoPoint> location;  // NGSI-LD only
};

HarnessConfig harness_config_from_json(const json& j);  // throws ConfigError

struct ActuatorState {
  double green_extension = 0;
  double divert = 0;
  std::string last_correlation_id;
  int applied_at = -1;
};

struct EmittedPayload {
  int tick = 0;        // tick it is handed over
  int scheduled = 0;   // tick it was produced for
  std::string payload;
  double flow = 0;
  bool corrupted = false;
};

/// Simulated traffic intersection. Commands received during tick t take effect
/// at tick t + 1 + latency; emitted flow follows
///   max(0, scheduled * (1 - divert) - response_gain * green_extension).
class PhysicalTwin final : public DataReceiverPort {
 public:
  explicit PhysicalTwin(HarnessConfig cfg);

  /// Payloads handed to the P2D adapter at `tick`, already fault-injected.
  std::vector<EmittedPayload> emit(int tick, TimePoint now);

  Ack deliver(std::string_view payload) override;  // at the current tick
  Ack receive(std::string_view payload, int tick);

  /// Flow the harness would emit for `scheduled` under the actuator state in force at `tick`.
  double response(double scheduled, int tick);
  const ActuatorState& actuator() const noexcept { return state_; }
  std::size_t received() const noexcept { return received_; }
  std::size_t acked() const noexcept { return acks_.size(); }
  const std::vector<Ack>& acks() const noexcept { return acks_; }
  const HarnessConfig& config() const noexcept { return cfg_; }
  int current_tick() const noexcept { return tick_; }
  void set_tick(int tick) noexcept { tick_ = tick; }
  int last_scheduled_tick() const;

  /// Encodes one measurement set in the configured wire format.
  std::string encode(const std::vector<Measurement>& ms) const;

 private:
  struct Pending {
    int apply_at;
    OutboundCommand command;
  };
  void apply_due(int tick);

  HarnessConfig cfg_;
  ActuatorState state_;
  std::vector<Pending> pending_;
  std::vector<std::pair<std::string, Scalar>> echo_;  // due echoes, emitted next
  std::map<int, std::vector<EmittedPayload>> delayed_;
  std::vector<Ack> acks_;
  std::size_t received_ = 0;
  int tick_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace twinarch
