#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "twinarch/adapters.hpp"
#include "twinarch/harness.hpp"
#include "twinarch/services.hpp"
#include "twinarch/shadow.hpp"
#include "twinarch/simulation.hpp"
#include "twinarch/storage.hpp"
#include "twinarch/trace.hpp"

namespace twinarch {

enum class LoopKind { Monitoring, Prediction };
std::string_view to_string(LoopKind k) noexcept;
std::optional<LoopKind> loop_from_string(std::string_view s) noexcept;

struct RunConfig {
  LoopKind loop = LoopKind::Monitoring;
  double tick_interval = 10;  // simulated seconds
  TimePoint start_time{};
  std::vector<std::string> entity_ids;
  std::map<std::string, std::string> labels;  // entity -> human label
  int horizon = 5;
  int max_ticks = 10;
  std::uint64_t seed = 0;
  bool direct_shadow_path = false;
  bool feedback_on_change_only = false;
  std::size_t workers = 1;
  AdapterConfig adapter;
  std::vector<ShadowType> shadow_types;
  ModelSpec model;
  std::string model_input;  // shadow attribute feeding the model input
  Values initial_state;
  PredictorConfig predictor;
  std::optional<std::filesystem::path> journal;
};

RunConfig run_config_from_json(const json& j);  // throws ConfigError

struct RunSetup {
  RunConfig run;
  HarnessConfig harness;
  std::optional<Thresholds> thresholds;
  std::optional<std::vector<CandidateSolution>> candidates;
};

struct Manifest {
  std::filesystem::path path;
  std::filesystem::path harness, run, thresholds, candidates;  // empty when absent
  std::filesystem::path output_dir;
};

/// Reads and validates the manifest and every file it references. Paths are
/// relative to the manifest. Throws ConfigError.
Manifest read_manifest(const std::filesystem::path& path);
RunSetup load_setup(const Manifest& m, std::optional<LoopKind> loop = std::nullopt);

struct MonitoringResult {
  std::map<std::string, TwinState> states;
  std::vector<Feedback> feedback;
  std::vector<std::string> rendered;  // last rendered state per entity, entity order
};

struct PredictionResult {
  std::optional<Prediction> prediction;
  std::vector<Deviation> deviations;
  std::vector<Evaluation> evaluations;
  std::optional<Plan> plan;
  std::optional<Feedback> feedback;
  std::vector<Delivery> deliveries;
  int feedback_tick = 0;
};

/// The central orchestrator. Owns one logical clock, storage, the twin's
/// components and the simulated physical twin for a single run.
class TwinManager final : public SimulationPort {
 public:
  explicit TwinManager(RunSetup setup);
  ~TwinManager() override;

  MonitoringResult run_monitoring();
  PredictionResult run_prediction();

  std::string new_scenario_sim(const SimScenario& scenario) override;
  SimResult await(const std::string& scenario_id) override;

  const InteractionTrace& trace() const noexcept { return trace_; }
  StorageManager& storage() noexcept { return *storage_; }
  ShadowManager& shadows() noexcept { return *shadows_; }
  PhysicalTwin& harness() noexcept { return *harness_; }
  Simulator& simulator() noexcept { return *simulator_; }
  ModelManager& models() noexcept { return *models_; }
  const RunSetup& setup() const noexcept { return setup_; }
  LogicalClock& clock() noexcept { return clock_; }
  int tick() const noexcept { return tick_; }

 private:
  void begin_tick(int tick);
  void ingest_tick(bool component_level);
  std::string model_id_for(const std::string& entity) const;
  std::string label_for(const std::string& entity) const;
  void ensure_shadows();
  void event(std::string from, std::string to, std::string message, const json& payload = json::object());

  RunSetup setup_;
  LogicalClock clock_;
  InteractionTrace trace_;
  int tick_ = 0;

  std::unique_ptr<StorageManager> storage_;
  std::unique_ptr<DataManager> data_;
  std::unique_ptr<ShadowManager> shadows_;
  std::shared_ptr<Subscription> shadow_feed_;
  std::unique_ptr<ModelManager> models_;
  std::unique_ptr<Simulator> simulator_;
  std::unique_ptr<PhysicalTwin> harness_;
  std::unique_ptr<P2DAdapter> p2d_;
  std::unique_ptr<D2PAdapter> d2p_;
  std::unique_ptr<StateMonitor> monitor_;
  std::unique_ptr<Predictor> predictor_;
  std::unique_ptr<DeviationDetector> detector_;
  std::unique_ptr<ScenarioGenerator> generator_;
  std::unique_ptr<Planner> planner_;
  std::unique_ptr<FeedbackExecutor> executor_;

  std::map<std::string, Values> nowcast_state_;
  std::map<std::string, std::string> last_feedback_;
};

/// Output files written by a run.
struct RunOutputs {
  std::filesystem::path trace;
  std::filesystem::path summary;
  std::optional<std::filesystem::path> verdict;
};

RunOutputs write_outputs(const std::filesystem::path& dir, const TwinManager& tm, const json& summary,
                         const std::optional<Verdict>& verdict);

json summarize(const MonitoringResult& r);
json summarize(const PredictionResult& r);

}  // namespace twinarch
