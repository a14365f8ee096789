#include "twinarch/orchestrator.hpp"

#include <fstream>
#include <sstream>

#include "twinarch/error.hpp"

namespace twinarch {

namespace fs = std::filesystem;

std::string_view to_string(LoopKind k) noexcept {
  return k == LoopKind::Monitoring ? "monitoring" : "prediction";
}

std::optional<LoopKind> loop_from_string(std::string_view s) noexcept {
  if (s == "monitoring") return LoopKind::Monitoring;
  if (s == "prediction") return LoopKind::Prediction;
  return std::nullopt;
}

namespace {

json read_json_file(const fs::path& p, const char* what) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::ConfigError, std::string(what) + " file not found: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::ConfigError, std::string(what) + " file is not valid JSON: " + p.string());
  return j;
}

// Re-throws any library error from config parsing as ConfigError.
template <class F>
auto as_config(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    fail(ErrorCode::ConfigError, std::string(what) + ": " + e.what());
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string(what) + ": " + e.what());
  }
}

json payload_text(std::string_view s) {
  // Corrupted payloads are not UTF-8; the digest goes over a lossless hex form.
  bool printable = true;
  for (unsigned char c : s) printable = printable && c >= 0x20 && c < 0x7f;
  if (printable) return std::string(s);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned char c : s) {
    out += hex[c >> 4];
    out += hex[c & 15];
  }
  return json{{"hex", out}};
}

const Deviation& worst_deviation(const std::vector<Deviation>& devs) {
  const Deviation* best = &devs.front();
  for (const auto& d : devs) {
    const double dd = std::abs(d.value - d.expected), bd = std::abs(best->value - best->expected);
    if (static_cast<int>(d.severity) > static_cast<int>(best->severity) ||
        (d.severity == best->severity && dd > bd)) {
      best = &d;
    }
  }
  return *best;
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::ConfigError, "run config must be an object");
  return as_config("run config", [&] {
    RunConfig c;
    auto loop = loop_from_string(j.value("loop", std::string("monitoring")));
    if (!loop) fail(ErrorCode::ConfigError, "loop must be monitoring or prediction");
    c.loop = *loop;
    c.tick_interval = j.value("tickInterval", c.tick_interval);
    if (!(c.tick_interval > 0)) fail(ErrorCode::ConfigError, "tickInterval must be > 0");
    if (auto s = j.find("startTime"); s != j.end()) {
      auto t = parse_rfc3339(s->get<std::string>());
      if (!t) fail(ErrorCode::ConfigError, "startTime must be RFC 3339");
      c.start_time = *t;
    }
    c.entity_ids = j.value("entities", std::vector<std::string>{});
    if (c.entity_ids.empty()) fail(ErrorCode::ConfigError, "run config needs at least one entity");
    c.labels = j.value("labels", std::map<std::string, std::string>{});
    c.horizon = j.value("horizon", c.horizon);
    c.max_ticks = j.value("maxTicks", c.max_ticks);
    if (c.max_ticks < 1) fail(ErrorCode::ConfigError, "maxTicks must be >= 1");
    if (c.horizon < 1) fail(ErrorCode::ConfigError, "horizon must be >= 1");
    c.seed = j.value("seed", std::uint64_t{0});
    c.direct_shadow_path = j.value("directShadowPath", false);
    c.feedback_on_change_only = j.value("feedbackOnChangeOnly", false);
    c.workers = j.value("workers", std::size_t{1});
    c.adapter = adapter_config_from_json(j.value("adapter", json::object()));
    c.adapter.direction = Direction::P2D;
    if (j.contains("commandDevice")) c.adapter.command_device = j["commandDevice"].get<std::string>();
    for (const auto& t : j.value("shadowTypes", json::array())) c.shadow_types.push_back(shadow_type_from_json(t));
    if (c.shadow_types.empty()) fail(ErrorCode::ConfigError, "run config needs shadowTypes");
    if (!j.contains("model")) fail(ErrorCode::ConfigError, "run config needs a model");
    c.model = model_spec_from_json(j["model"]);
    c.model_input = j.value("modelInput", c.model.inputs.empty() ? std::string() : c.model.inputs.front());
    if (auto s = j.find("initialState"); s != j.end()) {
      for (const auto& [k, v] : s->items()) c.initial_state[k] = v.get<double>();
    }
    c.predictor = predictor_config_from_json(j.value("predictor", json()));
    if (auto p = j.find("journal"); p != j.end() && p->is_string()) c.journal = p->get<std::string>();
    return c;
  });
}

Manifest read_manifest(const fs::path& path) {
  const json j = read_json_file(path, "manifest");
  if (!j.is_object()) fail(ErrorCode::ConfigError, "manifest must be an object");
  Manifest m;
  m.path = path;
  const fs::path base = path.parent_path();
  auto ref = [&](const char* key, bool required) -> fs::path {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
      if (required) fail(ErrorCode::ConfigError, std::string("manifest lacks ") + key);
      return {};
    }
    if (!it->is_string()) fail(ErrorCode::ConfigError, std::string("manifest ") + key + " must be a path");
    fs::path p = base / it->get<std::string>();
    if (!fs::exists(p)) fail(ErrorCode::ConfigError, std::string("manifest ") + key + " not found: " + p.string());
    return p;
  };
  m.harness = ref("harness", true);
  m.run = ref("run", true);
  m.thresholds = ref("thresholds", false);
  m.candidates = ref("candidates", false);
  m.output_dir = base / j.value("outputDir", std::string("out"));
  return m;
}

RunSetup load_setup(const Manifest& m, std::optional<LoopKind> loop) {
  RunSetup s;
  s.run = run_config_from_json(read_json_file(m.run, "run"));
  if (loop) s.run.loop = *loop;
  s.harness = as_config("harness config", [&] { return harness_config_from_json(read_json_file(m.harness, "harness")); });
  if (!m.thresholds.empty()) {
    s.thresholds = as_config("thresholds", [&] { return thresholds_from_json(read_json_file(m.thresholds, "thresholds")); });
  }
  if (!m.candidates.empty()) {
    s.candidates = as_config("candidates", [&] { return candidates_from_json(read_json_file(m.candidates, "candidates")); });
  }
  if (s.run.loop == LoopKind::Prediction) {
    if (!s.thresholds) fail(ErrorCode::ConfigError, "prediction loop needs a thresholds file");
    if (!s.candidates) fail(ErrorCode::ConfigError, "prediction loop needs a candidate catalog");
  }
  if (s.run.journal && s.run.journal->is_relative()) s.run.journal = m.output_dir / *s.run.journal;
  return s;
}

// ---------------------------------------------------------------------------
// TwinManager

TwinManager::TwinManager(RunSetup setup) : setup_(std::move(setup)), clock_(setup_.run.start_time) {
  const RunConfig& rc = setup_.run;
  if (rc.loop == LoopKind::Prediction) {
    if (!setup_.thresholds || !setup_.candidates) {
      fail(ErrorCode::ConfigError, "prediction loop needs thresholds and a candidate catalog");
    }
    if (rc.entity_ids.size() != 1) fail(ErrorCode::ConfigError, "prediction loop runs on exactly one entity");
  }
  StorageOptions so;
  so.journal = rc.journal;
  storage_ = std::make_unique<StorageManager>(&clock_, so);
  data_ = std::make_unique<DataManager>(*storage_);
  shadows_ = std::make_unique<ShadowManager>(*storage_, &clock_);
  shadow_feed_ = storage_->subscribe(Namespace::Measurements, "*");
  models_ = std::make_unique<ModelManager>();
  simulator_ = std::make_unique<Simulator>(*models_, storage_.get(), &clock_, rc.workers);
  harness_ = std::make_unique<PhysicalTwin>(setup_.harness);
  p2d_ = std::make_unique<P2DAdapter>(rc.adapter, *data_);
  AdapterConfig d2p_cfg = rc.adapter;
  d2p_cfg.direction = Direction::D2P;
  if (d2p_cfg.command_device.empty()) d2p_cfg.command_device = setup_.harness.device_id;
  d2p_ = std::make_unique<D2PAdapter>(d2p_cfg, *harness_);
  monitor_ = std::make_unique<StateMonitor>(*shadows_, *storage_, &clock_);

  PredictorConfig pc = rc.predictor;
  if (pc.metrics.empty()) {
    std::set<std::string> attrs;
    for (const auto& t : rc.shadow_types) attrs.insert(t.attributes.begin(), t.attributes.end());
    if (setup_.thresholds) {
      for (const auto& [metric, band] : setup_.thresholds->bands) {
        if (attrs.count(metric)) pc.metrics.push_back(metric);
      }
    }
    if (pc.metrics.empty() && !rc.model_input.empty()) pc.metrics.push_back(rc.model_input);
  }
  if (!pc.step_seconds) pc.step_seconds = rc.tick_interval;
  predictor_ = std::make_unique<Predictor>(*shadows_, *storage_, &clock_, pc);
  detector_ = std::make_unique<DeviationDetector>(setup_.thresholds.value_or(Thresholds{}), *storage_, &clock_);
  generator_ = std::make_unique<ScenarioGenerator>(*models_);
  planner_ = std::make_unique<Planner>(*storage_, &clock_);
  executor_ = std::make_unique<FeedbackExecutor>(*d2p_, *storage_, &clock_);

  as_config("model", [&] {
    for (const auto& e : rc.entity_ids) {
      ModelSpec spec = rc.model;
      spec.model_id = model_id_for(e);
      models_->check(spec);
    }
    return 0;
  });
  for (const auto& t : rc.shadow_types) shadows_->register_type(t);
  ensure_shadows();
}

TwinManager::~TwinManager() {
  if (storage_) storage_->flush();
}

std::string TwinManager::model_id_for(const std::string& entity) const {
  const auto& ids = setup_.run.entity_ids;
  return ids.size() == 1 ? setup_.run.model.model_id : setup_.run.model.model_id + "@" + entity;
}

std::string TwinManager::label_for(const std::string& entity) const {
  auto it = setup_.run.labels.find(entity);
  return it == setup_.run.labels.end() ? entity : it->second;
}

void TwinManager::ensure_shadows() {
  for (const auto& e : setup_.run.entity_ids) {
    for (const auto& t : setup_.run.shadow_types) {
      if (!shadows_->type(t.name)) continue;
      const auto id = shadow_id_for(t.name, e);
      const auto ids = shadows_->shadow_ids();
      if (std::find(ids.begin(), ids.end(), id) == ids.end()) shadows_->create_shadow(t.name, e);
    }
  }
}

void TwinManager::event(std::string from, std::string to, std::string message, const json& payload) {
  trace_.record(tick_, std::move(from), std::move(to), std::move(message), payload);
}

void TwinManager::begin_tick(int tick) {
  tick_ = tick;
  clock_.set(add_seconds(setup_.run.start_time, setup_.run.tick_interval * tick));
}

void TwinManager::ingest_tick(bool component_level) {
  const TimePoint now = clock_.now();
  for (const auto& p : harness_->emit(tick_, now)) {
    event("DataProvider", "P2DAdapter", "transmitData", json{{"payload", payload_text(p.payload)}});
    IngestReceipt r;
    try {
      r = p2d_->ingest(p.payload, setup_.harness.device_id, now);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ParseError) throw;
      event("P2DAdapter", "P2DAdapter", "parseError", json{{"error", e.what()}});
      continue;
    }
    if (r.stored == 0) {
      shadow_feed_->drain();
      event("P2DAdapter", "P2DAdapter", "filtered", json{{"rejected", r.rejected}, {"parseFailed", r.parse_failed}});
      continue;
    }
    const json counts{{"stored", r.stored}, {"rejected", r.rejected}, {"parseFailed", r.parse_failed}};
    if (component_level) {
      event("P2DAdapter", "DataProcessor", "process", counts);
      event("DataProcessor", "StorageManager", "CRUDop.create", counts);
    } else {
      event("P2DAdapter", "DataManager", "CRUDop.create", counts);
    }
    std::vector<std::string> updated;
    if (setup_.run.direct_shadow_path) {
      shadow_feed_->drain();
      event("P2DAdapter", "ShadowManager", "forward", counts);
      for (const auto& m : r.committed) {
        for (auto& id : shadows_->update_from_measurement(m)) updated.push_back(std::move(id));
      }
    } else {
      if (component_level) {
        event("DataProcessor", "ShadowManager", "update", counts);
      } else {
        event("ShadowManager", "DataManager", "CRUDop.read", counts);
      }
      for (const auto& rec : shadow_feed_->drain()) {
        if (rec.body.is_null()) continue;
        for (auto& id : shadows_->update_from_measurement(measurement_from_record(rec))) updated.push_back(std::move(id));
      }
    }
    if (!component_level) event("ShadowManager", "DigitalShadow", "updateShadow", json{{"shadows", updated}});
  }
}

MonitoringResult TwinManager::run_monitoring() {
  const RunConfig& rc = setup_.run;
  MonitoringResult out;
  for (int t = 1; t <= rc.max_ticks; ++t) {
    begin_tick(t);
    ingest_tick(false);
    out.rendered.clear();
    for (const auto& e : rc.entity_ids) {
      ModelSpec spec = rc.model;
      spec.model_id = model_id_for(e);
      event("TwinManager", "ModelManager", "createOrUpdateModel", json{{"modelId", spec.model_id}});
      const ModelSpec current = models_->create_or_update(spec);

      double input = 0;
      if (!rc.model_input.empty()) {
        ShadowQuery q;
        q.entity_id = e;
        q.to = clock_.now() + Millis{1};
        std::optional<TracePoint> newest;
        for (const auto& s : shadows_->get_shadow(q)) {
          auto p = s.latest(rc.model_input);
          if (p && p->value.is_number() && (!newest || p->observed_at > newest->observed_at)) newest = p;
        }
        if (newest) input = newest->value.as_number();
      }
      SimScenario sc;
      sc.model_id = current.model_id;
      sc.entity_id = e;
      auto prev = nowcast_state_.find(e);
      sc.initial_state = prev == nowcast_state_.end() ? rc.initial_state : prev->second;
      if (!current.inputs.empty()) sc.input_series[0] = {{current.inputs.front(), input}};
      sc.horizon = 1;
      sc.step_size = rc.tick_interval;
      sc.base_time = add_seconds(clock_.now(), -rc.tick_interval);
      sc.seed = rc.seed + static_cast<std::uint64_t>(t);
      sc.purpose = "nowcast";
      event("TwinManager", "DigitalModel", "modelExecution", json{{"modelId", current.model_id}, {"input", input}});
      const SimResult res = simulator_->run(sc);
      nowcast_state_[e] = res.state_series.back().values;
      event("DigitalModel", "DataManager", "storeResults",
            json{{"scenarioId", res.scenario_id}, {"state", res.state_series.back().values}});

      event("TwinManager", "ServiceManager", "getState", json{{"entity", e}});
      const TwinState st = monitor_->get_state(e);
      event("ServiceManager", "DataManager", "storeState", to_json(st));
      const std::string text = render_state(label_for(e), st);
      out.rendered.push_back(text);
      event("ServiceManager", "FeedbackProvider", "deliverState", json{{"state", text}});
      out.states[e] = st;

      Alert alert{"system ok", Severity::Info, {}};
      if (setup_.thresholds) {
        TwinState banded = st;
        std::erase_if(banded.metrics, [&](const auto& kv) { return !setup_.thresholds->bands.count(kv.first); });
        const auto devs = detector_->detect(banded);
        if (!devs.empty()) {
          const Deviation& d = worst_deviation(devs);
          alert = Alert{congestion_alert(label_for(e)), d.severity, d.deviation_id};
        }
      }
      if (rc.feedback_on_change_only && last_feedback_[e] == alert.message) continue;
      last_feedback_[e] = alert.message;
      event("FeedbackProvider", "D2PAdapter", "feedback",
            json{{"message", alert.message}, {"severity", to_string(alert.severity)}});
      Feedback fb = executor_->execute(alert, e);
      const auto& del = executor_->last_deliveries();
      event("D2PAdapter", "DataReceiver", "deliver",
            json{{"payload", del.empty() ? std::string() : del.front().payload}, {"ok", !del.empty() && del.front().ack.ok}});
      out.feedback.push_back(std::move(fb));
    }
  }
  storage_->flush();
  return out;
}

PredictionResult TwinManager::run_prediction() {
  const RunConfig& rc = setup_.run;
  PredictionResult out;
  for (int t = 1; t <= rc.max_ticks; ++t) {
    begin_tick(t);
    ingest_tick(true);
  }
  const std::string e = rc.entity_ids.front();
  event("TwinManager", "Predictor", "prediction", json{{"entity", e}, {"horizon", rc.horizon}});
  event("Predictor", "ShadowManager", "getShadow", json{{"entity", e}});
  const Prediction pred = predictor_->prediction(e, rc.horizon);
  out.prediction = pred;
  event("Predictor", "DeviationDetector", "predictedStates", to_json(pred));
  out.deviations = detector_->detect(pred);
  if (out.deviations.empty()) {
    storage_->flush();
    return out;
  }
  const Deviation dev = worst_deviation(out.deviations);
  event("DeviationDetector", "SolutionFinder", "deviation", to_json(dev));

  ModelSpec spec = rc.model;
  spec.model_id = model_id_for(e);
  spec = models_->create_or_update(spec);
  std::vector<double> observed;
  {
    const auto samples = shadows_->get_shadow(ShadowQuery{std::nullopt, e, std::nullopt, std::nullopt, std::nullopt});
    std::map<TimePoint, double> series;
    for (const auto& s : samples) {
      for (const auto& p : s.trace) {
        if (p.attribute == rc.model_input && p.value.is_number()) series.emplace(p.observed_at, p.value.as_number());
      }
    }
    for (const auto& [t, v] : series) observed.push_back(v);
  }
  ScenarioContext ctx;
  ctx.model_id = spec.model_id;
  ctx.entity_id = e;
  ctx.initial_state = sync_initial_state(simulator_->engine(), spec, observed, rc.initial_state);
  for (const auto& pt : pred.series) {
    auto it = pt.metrics.find(rc.model_input);
    if (it == pt.metrics.end()) fail(ErrorCode::ConfigError, "prediction does not cover model input " + rc.model_input);
    ctx.inflow.push_back(it->second);
  }
  ctx.horizon = pred.horizon;
  ctx.step_size = rc.tick_interval;
  ctx.base_time = pred.base_time;
  ctx.seed = rc.seed;
  ctx.objective = setup_.thresholds->objective;

  SolutionFinder finder(*generator_, *setup_.candidates);
  TraceHook hook = [this](std::string_view from, std::string_view to, std::string_view msg, const json& payload) {
    event(std::string(from), std::string(to), std::string(msg), payload);
  };
  std::optional<Plan> found;
  try {
    found = finder.find_solution(dev, ctx, *this, hook);
  } catch (const Error& err) {
    if (err.code() != ErrorCode::NoFeasibleSolution) throw;
  }
  out.evaluations = finder.evaluations();
  out.feedback_tick = tick_;
  if (found) {
    event("SolutionFinder", "Planner", "solution", to_json(*found));
    Plan plan = planner_->plan(*found);
    out.plan = plan;
    event("Planner", "FeedbackExecutor", "plan", to_json(plan));
    event("FeedbackExecutor", "D2PAdapter", "commandPlan", json{{"planId", plan.plan_id}});
    out.feedback = executor_->execute(plan);
    out.deliveries = executor_->last_deliveries();
    for (const auto& d : out.deliveries) {
      event("D2PAdapter", "DataReceiver", "command", json{{"payload", d.payload}, {"ok", d.ack.ok}});
    }
  } else {
    event("SolutionFinder", "FeedbackExecutor", "noPlan", to_json(dev));
    event("FeedbackExecutor", "D2PAdapter", "alert", json{{"deviationId", dev.deviation_id}});
    out.feedback = executor_->execute(dev, label_for(e));
    out.deliveries = executor_->last_deliveries();
    event("D2PAdapter", "DataReceiver", "alert",
          json{{"payload", out.deliveries.front().payload}, {"ok", out.deliveries.front().ack.ok}});
  }
  storage_->flush();
  return out;
}

std::string TwinManager::new_scenario_sim(const SimScenario& scenario) {
  event("Planner", "TwinManager", "newScenarioSim", json{{"entity", scenario.entity_id}});
  models_->check(scenario);
  event("TwinManager", "Simulator", "scenarioSim", to_json(scenario));
  event("Simulator", "ModelManager", "updateModel", json{{"modelId", scenario.model_id}, {"overrides", scenario.overrides}});
  event("ModelManager", "ModelEngine", "modelExecution", json{{"modelId", scenario.model_id}});
  return simulator_->scenario_sim(scenario);
}

SimResult TwinManager::await(const std::string& scenario_id) {
  SimResult r = simulator_->wait(scenario_id);
  event("TwinManager", "Simulator", "getSimState", to_json(simulator_->get_sim_state(scenario_id)));
  return r;
}

// ---------------------------------------------------------------------------
// Outputs

json summarize(const MonitoringResult& r) {
  json states = json::object();
  for (const auto& [e, s] : r.states) states[e] = to_json(s);
  json fb = json::array();
  for (const auto& f : r.feedback) fb.push_back(to_json(f));
  return json{{"loop", "monitoring"}, {"states", states}, {"rendered", r.rendered}, {"feedback", fb}};
}

json summarize(const PredictionResult& r) {
  json devs = json::array();
  for (const auto& d : r.deviations) devs.push_back(to_json(d));
  json evals = json::array();
  for (const auto& e : r.evaluations) {
    evals.push_back(json{{"candidate", e.candidate},
                         {"scenarioId", e.scenario_id},
                         {"objective", std::isfinite(e.objective) ? json(e.objective) : json()},
                         {"finalValue", e.final_value},
                         {"feasible", e.feasible}});
  }
  json j{{"loop", "prediction"}, {"deviations", devs}, {"evaluations", evals}};
  j["prediction"] = r.prediction ? to_json(*r.prediction) : json();
  j["plan"] = r.plan ? to_json(*r.plan) : json();
  j["feedback"] = r.feedback ? to_json(*r.feedback) : json();
  json acks = json::array();
  for (const auto& d : r.deliveries) acks.push_back(json{{"ok", d.ack.ok}, {"correlationId", d.ack.correlation_id}});
  j["acks"] = acks;
  return j;
}

RunOutputs write_outputs(const fs::path& dir, const TwinManager& tm, const json& summary,
                         const std::optional<Verdict>& verdict) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create output directory " + dir.string());
  RunOutputs out;
  out.trace = dir / "trace.jsonl";
  tm.trace().write(out.trace);
  out.summary = dir / "summary.json";
  {
    std::ofstream f(out.summary, std::ios::binary | std::ios::trunc);
    f << summary.dump(2, ' ', false, json::error_handler_t::replace) << '\n';
  }
  if (verdict) {
    out.verdict = dir / "verdict.json";
    std::ofstream f(*out.verdict, std::ios::binary | std::ios::trunc);
    f << verdict->to_json().dump(2) << '\n';
  }
  return out;
}

}  // namespace twinarch
