#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "twinarch/storage.hpp"
#include "twinarch/time.hpp"

namespace twinarch {

using nlohmann::json;
using Values = std::map<std::string, double>;

struct ModelSpec {
  std::string model_id;
  std::string kind;
  Values parameters;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  int version = 1;

  bool operator==(const ModelSpec&) const = default;
};

/// Distance of one output at horizon end to the band [lo, hi].
struct Objective {
  std::string metric = "density";
  double lo = 0;
  double hi = 1;

  bool operator==(const Objective&) const = default;
};

double band_distance(double value, double lo, double hi) noexcept;

struct SimScenario {
  std::string scenario_id;  // assigned on submit when empty
  std::string model_id;
  std::string entity_id;
  Values initial_state;
  /// step index -> inputs; a value holds until the next entry (zero-order hold).
  std::map<int, Values> input_series;
  int horizon = 1;
  double step_size = 1.0;  // simulated seconds
  Values overrides;
  std::uint64_t seed = 0;
  TimePoint base_time{};
  std::string purpose = "what-if";  // or "nowcast"
  std::optional<Objective> objective;

  bool operator==(const SimScenario&) const = default;
};

struct SimStep {
  int step = 0;  // 1-based
  TimePoint t{};
  Values values;

  bool operator==(const SimStep&) const = default;
};

struct SimResult {
  std::string scenario_id;
  std::string model_id;
  std::string entity_id;
  std::string purpose;
  std::vector<SimStep> state_series;
  std::optional<double> objective;
  TimePoint completed_at{};

  bool operator==(const SimResult&) const = default;
};

json to_json(const ModelSpec& s);
ModelSpec model_spec_from_json(const json& j);
json to_json(const SimScenario& s);
SimScenario scenario_from_json(const json& j);
json to_json(const SimResult& r);
SimResult sim_result_from_json(const json& j);

/// A pluggable model kind. Implementations are stateless; the engine owns the
/// step loop and passes state in and out.
class ModelKind {
 public:
  virtual ~ModelKind() = default;
  virtual std::string kind() const = 0;
  virtual Values default_parameters() const = 0;
  virtual std::set<std::string> state_variables() const = 0;
  /// Kind-specific spec checks beyond the generic ones; throws InvalidSpec.
  virtual void check(const ModelSpec& spec, const Values& params) const = 0;
  virtual Values initial_state(const Values& params, const Values& given) const = 0;
  virtual Values step(const Values& params, const Values& state, const Values& inputs,
                      double step_size, std::mt19937_64& rng) const = 0;
};

/// Transition:
///   inflow'  = inflow_gain * inflow * (1 + jitter * (2u - 1)),  u ~ U[0,1) when jitter > 0
///   cap_eff  = capacity + green_sensitivity * green_extension
///   density' = clamp(density + (inflow' - cap_eff) / capacity_scale, 0, 1)
///   speed    = free_flow_speed * (1 - density')
///   throughput = min(inflow', cap_eff)
/// The single model input is the inflow (vehicles per step).
class TrafficFlowModel final : public ModelKind {
 public:
  std::string kind() const override { return "traffic-flow"; }
  Values default_parameters() const override;
  std::set<std::string> state_variables() const override { return {"density", "speed", "throughput"}; }
  void check(const ModelSpec& spec, const Values& params) const override;
  Values initial_state(const Values& params, const Values& given) const override;
  Values step(const Values& params, const Values& state, const Values& inputs, double step_size,
              std::mt19937_64& rng) const override;

  static double uniform(std::mt19937_64& rng);
};

class ModelRegistry {
 public:
  ModelRegistry();  // registers the built-in kinds
  void add(std::shared_ptr<const ModelKind> kind);
  const ModelKind& get(const std::string& kind) const;  // InvalidSpec when unknown
  bool has(const std::string& kind) const;

 private:
  std::map<std::string, std::shared_ptr<const ModelKind>> kinds_;
};

class ModelManager {
 public:
  explicit ModelManager(std::shared_ptr<ModelRegistry> registry = std::make_shared<ModelRegistry>());

  ModelSpec create_model(ModelSpec spec);
  ModelSpec update_model(ModelSpec spec);
  /// create when absent, update otherwise
  ModelSpec create_or_update(ModelSpec spec);
  ModelSpec get_model(const std::string& model_id) const;
  bool has_model(const std::string& model_id) const;

  /// Spec defaults merged with the kind's defaults.
  Values effective_parameters(const ModelSpec& spec) const;
  void check(const ModelSpec& spec) const;
  /// Throws InvalidSpec or NotFound.
  void check(const SimScenario& scenario) const;

  const ModelRegistry& registry() const { return *registry_; }

 private:
  std::shared_ptr<ModelRegistry> registry_;
  mutable std::mutex mu_;
  std::map<std::string, ModelSpec> models_;
};

/// Runs the step loop. Synchronous `execute` plus a FIFO worker pool.
class ModelEngine {
 public:
  explicit ModelEngine(const ModelManager& models, std::size_t workers = 1);
  ~ModelEngine();
  ModelEngine(const ModelEngine&) = delete;
  ModelEngine& operator=(const ModelEngine&) = delete;

  /// `progress`, when given, receives the completed step index after each step.
  SimResult execute(const ModelSpec& spec, const SimScenario& scenario,
                    const std::function<void(int, const Values&)>& progress = {}) const;

  void submit(std::function<void()> job);

 private:
  void worker_loop();

  const ModelManager& models_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> jobs_;
  bool stop_ = false;
  std::vector<std::thread> threads_;
};

enum class SimStatus { Queued, Running, Completed, Failed };
std::string_view to_string(SimStatus s) noexcept;

struct SimState {
  std::string scenario_id;
  SimStatus status = SimStatus::Queued;
  int step = 0;
  int horizon = 0;
  Values latest;
  std::optional<double> objective;
  std::string error;
};

json to_json(const SimState& s);

/// getSimState / scenarioSim facade. Completed results go to SimResults.
class Simulator {
 public:
  Simulator(ModelManager& models, StorageManager* storage = nullptr,
            const LogicalClock* clock = nullptr, std::size_t workers = 1);
  ~Simulator();

  std::string scenario_sim(SimScenario scenario);
  SimState get_sim_state(const std::string& scenario_id) const;
  /// Blocks until the scenario finishes; rethrows its failure.
  SimResult wait(const std::string& scenario_id);
  /// submit + wait
  SimResult run(SimScenario scenario);

  /// Recomputes a stored result from its journaled spec and scenario.
  SimResult recompute(const Record& sim_record) const;

  ModelManager& models() noexcept { return models_; }
  ModelEngine& engine() noexcept { return engine_; }

 private:
  struct Slot {
    SimScenario scenario;
    SimState state;
    std::optional<SimResult> result;
    std::exception_ptr error;
  };

  ModelManager& models_;
  StorageManager* storage_;
  const LogicalClock* clock_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, Slot> slots_;
  std::size_t next_ = 0;
  ModelEngine engine_;  // last: workers stop before the slots go away
};

}  // namespace twinarch
