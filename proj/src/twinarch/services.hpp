#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "twinarch/adapters.hpp"
#include "twinarch/feedback.hpp"
#include "twinarch/shadow.hpp"
#include "twinarch/simulation.hpp"
#include "twinarch/storage.hpp"

namespace twinarch {

enum class Provenance { RealOnly, SimOnly, Fused };
std::string_view to_string(Provenance p) noexcept;

struct TwinState {
  std::string entity_id;
  TimePoint computed_at{};
  std::map<std::string, Scalar> metrics;
  std::map<std::string, TimePoint> observed;  // when each metric was observed or simulated
  Provenance provenance = Provenance::RealOnly;
};

json to_json(const TwinState& s);

/// "<label> has a traffic density of 80% with an average vehicle speed of 15 km/h"
std::string render_state(const std::string& label, const TwinState& state);

/// Base for the service layer. Services read storage snapshots and hold no
/// mutable state besides id counters.
class ServiceManager {
 public:
  ServiceManager(StorageManager& storage, const LogicalClock* clock) : storage_(storage), clock_(clock) {}
  virtual ~ServiceManager() = default;

 protected:
  TimePoint now() const { return clock_ ? clock_->now() : TimePoint{}; }
  void commit(const RecordKey& key, json body);

  StorageManager& storage_;
  const LogicalClock* clock_;
};

class StateMonitor : public ServiceManager {
 public:
  StateMonitor(ShadowManager& shadows, StorageManager& storage, const LogicalClock* clock)
      : ServiceManager(storage, clock), shadows_(shadows) {}

  /// Fuses the newest shadow values with the newest nowcast SimResult; the
  /// more recent value wins per metric, ties go to the shadow. Throws NotFound.
  TwinState get_state(const std::string& entity_id);

 private:
  ShadowManager& shadows_;
};

struct PredictedPoint {
  TimePoint t{};
  Values metrics;
};

struct Prediction {
  std::string entity_id;
  TimePoint base_time{};
  int horizon = 0;
  std::vector<PredictedPoint> series;
  std::string method;
};

json to_json(const Prediction& p);

struct PredictorConfig {
  std::string method = "linear";  // linear | last-value | moving-average
  std::size_t window = 10;
  std::size_t k = 3;               // moving-average width
  std::size_t min_window = 3;
  std::optional<double> step_seconds;  // default: spacing of the last two points
  std::vector<std::string> metrics;    // empty: every numeric attribute in the shadows
};

PredictorConfig predictor_config_from_json(const json& j);

/// One forecast series over (t seconds, value) samples. `future` holds the
/// times to predict.
std::vector<double> forecast(const std::vector<std::pair<double, double>>& samples,
                             const std::vector<double>& future, const PredictorConfig& cfg);

class Predictor : public ServiceManager {
 public:
  Predictor(ShadowManager& shadows, StorageManager& storage, const LogicalClock* clock,
            PredictorConfig cfg = {})
      : ServiceManager(storage, clock), shadows_(shadows), cfg_(std::move(cfg)) {}

  /// Throws InsufficientHistory when a forecast metric has fewer than
  /// min_window points.
  Prediction prediction(const std::string& entity_id, int horizon);

  const PredictorConfig& config() const noexcept { return cfg_; }

 private:
  ShadowManager& shadows_;
  PredictorConfig cfg_;
};

enum class DeviationKind { Real, Predicted };
std::string_view to_string(DeviationKind k) noexcept;

struct Deviation {
  std::string deviation_id;
  std::string entity_id;
  std::string metric;
  double value = 0;
  double expected = 0;  // the band edge that was crossed
  Severity severity = Severity::Warning;
  TimePoint detected_at{};
  TimePoint at{};  // time of the offending (predicted) point
  DeviationKind kind = DeviationKind::Real;
};

json to_json(const Deviation& d);

struct Band {
  double lo = 0;
  double hi = 0;
};

/// Outside [lo, hi] is a deviation. It is Critical when the distance to the
/// band exceeds (critical_multiplier - 1) * (hi - lo) / 2, i.e. when the value
/// also leaves the band widened about its centre by the multiplier.
struct Thresholds {
  std::map<std::string, Band> bands;
  double critical_multiplier = 1.5;
  Objective objective;  // metric scored by SolutionFinder, band taken from `bands`
};

Thresholds thresholds_from_json(const json& j);
Severity severity_for(const Band& band, double value, double critical_multiplier) noexcept;

class DeviationDetector : public ServiceManager {
 public:
  DeviationDetector(Thresholds thresholds, StorageManager& storage, const LogicalClock* clock)
      : ServiceManager(storage, clock), thr_(std::move(thresholds)) {}

  /// Throws MissingThreshold for a numeric metric without a band.
  std::vector<Deviation> detect(const TwinState& state);
  /// The worst point per metric, kind Predicted.
  std::vector<Deviation> detect(const Prediction& prediction);

  const Thresholds& thresholds() const noexcept { return thr_; }

 private:
  Deviation make(const std::string& entity, const std::string& metric, double value, TimePoint at,
                 DeviationKind kind);

  Thresholds thr_;
  std::size_t counter_ = 0;
};

/// Composite of Predictor and DeviationDetector behind the prediction interface.
class Analyzer {
 public:
  Analyzer(Predictor& predictor, DeviationDetector& detector) : predictor_(predictor), detector_(detector) {}

  Prediction prediction(const std::string& entity_id, int horizon) {
    return predictor_.prediction(entity_id, horizon);
  }
  std::vector<Deviation> analyze(const Prediction& p) { return detector_.detect(p); }

 private:
  Predictor& predictor_;
  DeviationDetector& detector_;
};

struct CandidateSolution {
  std::string name;
  std::vector<Action> actions;
};

std::vector<CandidateSolution> candidates_from_json(const json& j);

/// What a generated scenario is seeded from.
struct ScenarioContext {
  std::string model_id;
  std::string entity_id;
  Values initial_state;
  std::vector<double> inflow;  // forecast model input, one value per step
  int horizon = 1;
  double step_size = 1;
  TimePoint base_time{};
  std::uint64_t seed = 0;
  std::optional<Objective> objective;
};

/// Runs the model from `initial` over an observed input trace and returns the
/// final state: the helper that synchronizes a model with its shadow.
Values sync_initial_state(const ModelEngine& engine, const ModelSpec& spec,
                          const std::vector<double>& observed_inputs, const Values& initial);

class ScenarioGenerator {
 public:
  explicit ScenarioGenerator(const ModelManager& models) : models_(models) {}

  /// extend-green{seconds} -> green_extension override;
  /// divert{fraction} -> inflow * (1 - fraction). Anything else: UnmappableAction.
  SimScenario gen_scenario(const Deviation& deviation, const CandidateSolution& candidate,
                           const ScenarioContext& ctx) const;

 private:
  const ModelManager& models_;
};

/// How SolutionFinder reaches the simulator (through TwinManager's newScenarioSim).
class SimulationPort {
 public:
  virtual ~SimulationPort() = default;
  virtual std::string new_scenario_sim(const SimScenario& scenario) = 0;
  virtual SimResult await(const std::string& scenario_id) = 0;
};

struct Evaluation {
  std::string candidate;
  std::size_t actions = 0;
  std::string scenario_id;
  double objective = 0;
  bool feasible = false;
  double final_value = 0;
};

/// Picks the best candidate from scored evaluations: feasible only, then
/// lowest objective, fewest actions, lexicographic action names.
std::optional<std::size_t> select_best(const std::vector<Evaluation>& evals,
                                       const std::vector<CandidateSolution>& candidates);

using TraceHook = std::function<void(std::string_view from, std::string_view to, std::string_view message,
                                     const json& payload)>;

class SolutionFinder {
 public:
  SolutionFinder(ScenarioGenerator& generator, std::vector<CandidateSolution> catalog)
      : generator_(generator), catalog_(std::move(catalog)) {}

  /// Simulates every candidate and returns the argmin as an unsaved Plan.
  /// Throws NoFeasibleSolution; evaluations() stays valid either way.
  Plan find_solution(const Deviation& deviation, const ScenarioContext& ctx, SimulationPort& sims,
                     const TraceHook& hook = {});

  const std::vector<Evaluation>& evaluations() const noexcept { return evals_; }
  const std::vector<CandidateSolution>& catalog() const noexcept { return catalog_; }

 private:
  ScenarioGenerator& generator_;
  std::vector<CandidateSolution> catalog_;
  std::vector<Evaluation> evals_;
};

class Planner : public ServiceManager {
 public:
  using ServiceManager::ServiceManager;

  /// Assigns a plan id and commits the plan to the Plans namespace.
  Plan plan(Plan solution);

 private:
  std::size_t counter_ = 0;
};

std::string congestion_alert(const std::string& label);

class FeedbackExecutor : public ServiceManager {
 public:
  FeedbackExecutor(D2PAdapter& d2p, StorageManager& storage, const LogicalClock* clock)
      : ServiceManager(storage, clock), d2p_(d2p) {}

  /// Deviation without plan -> congestion Alert.
  Feedback execute(const Deviation& deviation, const std::string& label);
  /// Plan -> CommandPlan, one command per action in plan order.
  Feedback execute(const Plan& plan);
  /// Arbitrary alert (monitoring status messages).
  Feedback execute(const Alert& alert, const std::string& entity_id);

  const std::vector<Delivery>& last_deliveries() const noexcept { return last_; }

 private:
  Feedback deliver(Feedback fb, const std::string& entity_id);

  D2PAdapter& d2p_;
  std::vector<Delivery> last_;
  std::size_t counter_ = 0;
};

}  // namespace twinarch
