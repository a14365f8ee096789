#include "twinarch/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "twinarch/error.hpp"

namespace twinarch {

namespace {

Values values_from_json(const json& j, const char* what) {
  Values out;
  if (j.is_null()) return out;
  if (!j.is_object()) fail(ErrorCode::InvalidSpec, std::string(what) + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!v.is_number()) fail(ErrorCode::InvalidSpec, std::string(what) + "." + k + " must be a number");
    out[k] = v.get<double>();
  }
  return out;
}

std::vector<std::string> names_from_json(const json& j, const char* what) {
  std::vector<std::string> out;
  if (j.is_null()) return out;
  if (!j.is_array()) fail(ErrorCode::InvalidSpec, std::string(what) + " must be an array");
  for (const auto& v : j) {
    if (!v.is_string()) fail(ErrorCode::InvalidSpec, std::string(what) + " entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

bool all_finite(const Values& v) {
  return std::all_of(v.begin(), v.end(), [](const auto& kv) { return std::isfinite(kv.second); });
}

std::string describe(const Values& v) {
  std::string out = "{";
  for (const auto& [k, x] : v) {
    if (out.size() > 1) out += ", ";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out += k + "=" + buf;
  }
  return out + "}";
}

}  // namespace

double band_distance(double value, double lo, double hi) noexcept {
  if (value < lo) return lo - value;
  if (value > hi) return value - hi;
  return 0.0;
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const ModelSpec& s) {
  return json{{"modelId", s.model_id}, {"kind", s.kind},       {"parameters", s.parameters},
              {"inputs", s.inputs},    {"outputs", s.outputs}, {"version", s.version}};
}

ModelSpec model_spec_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::InvalidSpec, "model spec must be an object");
  ModelSpec s;
  s.model_id = j.value("modelId", std::string());
  s.kind = j.value("kind", std::string());
  s.parameters = values_from_json(j.value("parameters", json()), "parameters");
  s.inputs = names_from_json(j.value("inputs", json()), "inputs");
  s.outputs = names_from_json(j.value("outputs", json()), "outputs");
  if (auto v = j.find("version"); v != j.end()) {
    if (!v->is_number_integer()) fail(ErrorCode::InvalidSpec, "version must be an integer");
    s.version = v->get<int>();
  }
  return s;
}

json to_json(const SimScenario& s) {
  json inputs = json::array();
  for (const auto& [step, vals] : s.input_series) inputs.push_back(json{{"step", step}, {"values", vals}});
  json j{{"scenarioId", s.scenario_id},
         {"modelId", s.model_id},
         {"entityId", s.entity_id},
         {"initialState", s.initial_state},
         {"inputSeries", inputs},
         {"horizon", s.horizon},
         {"stepSize", s.step_size},
         {"overrides", s.overrides},
         {"seed", s.seed},
         {"baseTime", format_rfc3339(s.base_time)},
         {"purpose", s.purpose}};
  if (s.objective) {
    j["objective"] = {{"metric", s.objective->metric}, {"lo", s.objective->lo}, {"hi", s.objective->hi}};
  }
  return j;
}

SimScenario scenario_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::InvalidSpec, "scenario must be an object");
  try {
    SimScenario s;
    s.scenario_id = j.value("scenarioId", std::string());
    s.model_id = j.value("modelId", std::string());
    s.entity_id = j.value("entityId", std::string());
    s.initial_state = values_from_json(j.value("initialState", json()), "initialState");
    if (auto in = j.find("inputSeries"); in != j.end()) {
      if (!in->is_array()) fail(ErrorCode::InvalidSpec, "inputSeries must be an array");
      for (const auto& e : *in) {
        if (!e.is_object() || !e.contains("step") || !e["step"].is_number_integer()) {
          fail(ErrorCode::InvalidSpec, "inputSeries entries need an integer step");
        }
        s.input_series[e["step"].get<int>()] = values_from_json(e.value("values", json()), "values");
      }
    }
    if (auto h = j.find("horizon"); h != j.end()) {
      if (!h->is_number_integer()) fail(ErrorCode::InvalidSpec, "horizon must be an integer");
      s.horizon = h->get<int>();
    }
    s.step_size = j.value("stepSize", 1.0);
    s.overrides = values_from_json(j.value("overrides", json()), "overrides");
    s.seed = j.value("seed", std::uint64_t{0});
    if (auto b = j.find("baseTime"); b != j.end()) {
      auto t = b->is_string() ? parse_rfc3339(b->get<std::string>()) : std::nullopt;
      if (!t) fail(ErrorCode::InvalidSpec, "baseTime must be RFC 3339");
      s.base_time = *t;
    }
    s.purpose = j.value("purpose", std::string("what-if"));
    if (auto o = j.find("objective"); o != j.end() && o->is_object()) {
      s.objective = Objective{o->value("metric", std::string("density")), o->value("lo", 0.0),
                              o->value("hi", 1.0)};
    }
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidSpec, e.what());
  }
}

json to_json(const SimResult& r) {
  json series = json::array();
  for (const auto& st : r.state_series) {
    series.push_back(json{{"step", st.step}, {"t", format_rfc3339(st.t)}, {"values", st.values}});
  }
  json j{{"scenarioId", r.scenario_id}, {"modelId", r.model_id},  {"entityId", r.entity_id},
         {"purpose", r.purpose},        {"stateSeries", series},  {"completedAt", format_rfc3339(r.completed_at)}};
  j["objective"] = r.objective ? json(*r.objective) : json();
  return j;
}

SimResult sim_result_from_json(const json& j) {
  try {
    SimResult r;
    r.scenario_id = j.at("scenarioId").get<std::string>();
    r.model_id = j.value("modelId", std::string());
    r.entity_id = j.value("entityId", std::string());
    r.purpose = j.value("purpose", std::string());
    for (const auto& st : j.at("stateSeries")) {
      auto t = parse_rfc3339(st.at("t").get<std::string>());
      if (!t) fail(ErrorCode::IoError, "bad step time");
      r.state_series.push_back(SimStep{st.at("step").get<int>(), *t, values_from_json(st.at("values"), "values")});
    }
    if (j.contains("objective") && j["objective"].is_number()) r.objective = j["objective"].get<double>();
    auto c = parse_rfc3339(j.value("completedAt", std::string()));
    if (c) r.completed_at = *c;
    return r;
  } catch (const json::exception& e) {
    fail(ErrorCode::IoError, e.what());
  }
}

// ---------------------------------------------------------------------------
// TrafficFlowModel

Values TrafficFlowModel::default_parameters() const {
  return {{"capacity", 40.0},       {"capacity_scale", 100.0}, {"inflow_gain", 1.0},
          {"green_sensitivity", 1.0}, {"green_extension", 0.0}, {"free_flow_speed", 50.0},
          {"jitter", 0.0}};
}

void TrafficFlowModel::check(const ModelSpec& spec, const Values& p) const {
  if (spec.inputs.size() != 1) fail(ErrorCode::InvalidSpec, "traffic-flow takes exactly one input (inflow)");
  const auto vars = state_variables();
  for (const auto& o : spec.outputs) {
    if (!vars.count(o)) fail(ErrorCode::InvalidSpec, "traffic-flow has no output " + o);
  }
  if (!(p.at("capacity") > 0)) fail(ErrorCode::InvalidSpec, "capacity must be > 0");
  if (!(p.at("capacity_scale") > 0)) fail(ErrorCode::InvalidSpec, "capacity_scale must be > 0");
  if (!(p.at("inflow_gain") >= 0)) fail(ErrorCode::InvalidSpec, "inflow_gain must be >= 0");
  if (!(p.at("green_sensitivity") >= 0)) fail(ErrorCode::InvalidSpec, "green_sensitivity must be >= 0");
  if (!(p.at("green_extension") >= 0)) fail(ErrorCode::InvalidSpec, "green_extension must be >= 0");
  if (!(p.at("free_flow_speed") >= 0)) fail(ErrorCode::InvalidSpec, "free_flow_speed must be >= 0");
  const double jitter = p.at("jitter");
  if (!(jitter >= 0 && jitter < 1)) fail(ErrorCode::InvalidSpec, "jitter must be in [0, 1)");
}

Values TrafficFlowModel::initial_state(const Values& p, const Values& given) const {
  double d = 0;
  if (auto it = given.find("density"); it != given.end()) d = it->second;
  if (!std::isfinite(d)) fail(ErrorCode::NumericalFailure, "non-finite initial density");
  d = std::clamp(d, 0.0, 1.0);
  return {{"density", d}, {"speed", p.at("free_flow_speed") * (1 - d)}, {"throughput", 0.0}};
}

double TrafficFlowModel::uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Values TrafficFlowModel::step(const Values& p, const Values& state, const Values& inputs, double,
                              std::mt19937_64& rng) const {
  double inflow = inputs.empty() ? 0.0 : inputs.begin()->second;
  if (!std::isfinite(inflow)) fail(ErrorCode::NumericalFailure, "non-finite inflow");
  inflow *= p.at("inflow_gain");
  if (const double j = p.at("jitter"); j > 0) inflow *= 1 + j * (2 * uniform(rng) - 1);
  const double cap = p.at("capacity") + p.at("green_sensitivity") * p.at("green_extension");
  const double d0 = state.at("density");
  const double raw = d0 + (inflow - cap) / p.at("capacity_scale");
  if (!std::isfinite(raw)) fail(ErrorCode::NumericalFailure, "non-finite density");
  const double d = std::clamp(raw, 0.0, 1.0);
  return {{"density", d},
          {"speed", p.at("free_flow_speed") * (1 - d)},
          {"throughput", std::max(0.0, std::min(inflow, cap))}};
}

// ---------------------------------------------------------------------------
// Registry and manager

ModelRegistry::ModelRegistry() { add(std::make_shared<TrafficFlowModel>()); }

void ModelRegistry::add(std::shared_ptr<const ModelKind> kind) {
  const auto name = kind->kind();
  kinds_[name] = std::move(kind);
}

const ModelKind& ModelRegistry::get(const std::string& kind) const {
  auto it = kinds_.find(kind);
  if (it == kinds_.end()) fail(ErrorCode::InvalidSpec, "unknown model kind '" + kind + "'");
  return *it->second;
}

bool ModelRegistry::has(const std::string& kind) const { return kinds_.count(kind) > 0; }

ModelManager::ModelManager(std::shared_ptr<ModelRegistry> registry) : registry_(std::move(registry)) {}

Values ModelManager::effective_parameters(const ModelSpec& spec) const {
  Values p = registry_->get(spec.kind).default_parameters();
  for (const auto& [k, v] : spec.parameters) p[k] = v;
  return p;
}

void ModelManager::check(const ModelSpec& spec) const {
  if (spec.model_id.empty()) fail(ErrorCode::InvalidSpec, "model id must not be empty");
  const ModelKind& kind = registry_->get(spec.kind);
  const Values defaults = kind.default_parameters();
  for (const auto& [k, v] : spec.parameters) {
    if (!defaults.count(k)) fail(ErrorCode::InvalidSpec, "parameter " + k + " unknown to kind " + spec.kind);
    if (!std::isfinite(v)) fail(ErrorCode::InvalidSpec, "parameter " + k + " must be finite");
  }
  std::set<std::string> in(spec.inputs.begin(), spec.inputs.end());
  if (in.size() != spec.inputs.size()) fail(ErrorCode::InvalidSpec, "duplicate input names");
  for (const auto& o : spec.outputs) {
    if (in.count(o)) fail(ErrorCode::InvalidSpec, "name " + o + " is both input and output");
  }
  kind.check(spec, effective_parameters(spec));
}

void ModelManager::check(const SimScenario& sc) const {
  if (sc.horizon < 1) fail(ErrorCode::InvalidSpec, "horizon must be at least 1");
  if (!(sc.step_size > 0) || !std::isfinite(sc.step_size)) fail(ErrorCode::InvalidSpec, "step size must be > 0");
  if (sc.purpose != "nowcast" && sc.purpose != "what-if") {
    fail(ErrorCode::InvalidSpec, "purpose must be nowcast or what-if");
  }
  const ModelSpec spec = get_model(sc.model_id);
  Values params = effective_parameters(spec);
  for (const auto& [k, v] : sc.overrides) {
    if (!params.count(k)) fail(ErrorCode::InvalidSpec, "override " + k + " is not a model parameter");
    params[k] = v;
  }
  ModelSpec overridden = spec;
  overridden.parameters = params;
  registry_->get(spec.kind).check(overridden, params);
  std::set<std::string> in(spec.inputs.begin(), spec.inputs.end());
  for (const auto& [step, vals] : sc.input_series) {
    if (step < 0) fail(ErrorCode::InvalidSpec, "input step must be >= 0");
    for (const auto& [k, v] : vals) {
      if (!in.count(k)) fail(ErrorCode::InvalidSpec, "input " + k + " not declared by model");
    }
  }
}

ModelSpec ModelManager::create_model(ModelSpec spec) {
  check(spec);
  std::lock_guard lock(mu_);
  if (models_.count(spec.model_id)) fail(ErrorCode::DuplicateModel, spec.model_id);
  spec.version = 1;
  models_[spec.model_id] = spec;
  return spec;
}

ModelSpec ModelManager::update_model(ModelSpec spec) {
  check(spec);
  std::lock_guard lock(mu_);
  auto it = models_.find(spec.model_id);
  if (it == models_.end()) fail(ErrorCode::NotFound, "model " + spec.model_id);
  spec.version = it->second.version + 1;
  it->second = spec;
  return spec;
}

ModelSpec ModelManager::create_or_update(ModelSpec spec) {
  if (has_model(spec.model_id)) return update_model(std::move(spec));
  return create_model(std::move(spec));
}

ModelSpec ModelManager::get_model(const std::string& model_id) const {
  std::lock_guard lock(mu_);
  auto it = models_.find(model_id);
  if (it == models_.end()) fail(ErrorCode::NotFound, "model " + model_id);
  return it->second;
}

bool ModelManager::has_model(const std::string& model_id) const {
  std::lock_guard lock(mu_);
  return models_.count(model_id) > 0;
}

// ---------------------------------------------------------------------------
// Engine

ModelEngine::ModelEngine(const ModelManager& models, std::size_t workers) : models_(models) {
  for (std::size_t i = 0; i < std::max<std::size_t>(1, workers); ++i) {
    threads_.emplace_back([this] { worker_loop(); });
  }
}

ModelEngine::~ModelEngine() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void ModelEngine::submit(std::function<void()> job) {
  {
    std::lock_guard lock(mu_);
    jobs_.push_back(std::move(job));
  }
  cv_.notify_one();
}

void ModelEngine::worker_loop() {
  while (true) {
    std::function<void()> job;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stop_ || !jobs_.empty(); });
      if (jobs_.empty()) return;
      job = std::move(jobs_.front());
      jobs_.pop_front();
    }
    job();
  }
}

SimResult ModelEngine::execute(const ModelSpec& spec, const SimScenario& sc,
                               const std::function<void(int, const Values&)>& progress) const {
  const ModelKind& kind = models_.registry().get(spec.kind);
  Values params = models_.effective_parameters(spec);
  for (const auto& [k, v] : sc.overrides) params[k] = v;

  std::mt19937_64 rng(sc.seed);
  Values state = kind.initial_state(params, sc.initial_state);
  Values held;
  for (const auto& in : spec.inputs) held[in] = 0.0;

  const auto vars = kind.state_variables();
  std::vector<std::string> outputs = spec.outputs;
  if (outputs.empty()) outputs.assign(vars.begin(), vars.end());

  SimResult r;
  r.scenario_id = sc.scenario_id;
  r.model_id = spec.model_id;
  r.entity_id = sc.entity_id;
  r.purpose = sc.purpose;
  for (int i = 0; i < sc.horizon; ++i) {
    if (auto it = sc.input_series.find(i); it != sc.input_series.end()) {
      for (const auto& [k, v] : it->second) held[k] = v;
    }
    try {
      if (!all_finite(held)) fail(ErrorCode::NumericalFailure, "non-finite input " + describe(held));
      state = kind.step(params, state, held, sc.step_size, rng);
      if (!all_finite(state)) fail(ErrorCode::NumericalFailure, "non-finite state " + describe(state));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NumericalFailure) throw;
      std::string diag = std::string(e.what()) + " at step " + std::to_string(i + 1) + " after " +
                         std::to_string(r.state_series.size()) + " completed steps";
      if (!r.state_series.empty()) diag += ", last " + describe(r.state_series.back().values);
      fail(ErrorCode::NumericalFailure, diag);
    }
    SimStep st;
    st.step = i + 1;
    st.t = add_seconds(sc.base_time, sc.step_size * (i + 1));
    for (const auto& o : outputs) st.values[o] = state.at(o);
    if (progress) progress(st.step, st.values);
    r.state_series.push_back(std::move(st));
  }
  if (sc.objective) {
    const auto& last = r.state_series.back().values;
    auto it = last.find(sc.objective->metric);
    if (it == last.end()) fail(ErrorCode::InvalidSpec, "objective metric " + sc.objective->metric + " not an output");
    r.objective = band_distance(it->second, sc.objective->lo, sc.objective->hi);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Simulator

std::string_view to_string(SimStatus s) noexcept {
  switch (s) {
    case SimStatus::Queued: return "queued";
    case SimStatus::Running: return "running";
    case SimStatus::Completed: return "completed";
    case SimStatus::Failed: return "failed";
  }
  return "queued";
}

json to_json(const SimState& s) {
  json j{{"scenarioId", s.scenario_id}, {"status", to_string(s.status)}, {"step", s.step},
         {"horizon", s.horizon},        {"state", s.latest}};
  j["objective"] = s.objective ? json(*s.objective) : json();
  if (!s.error.empty()) j["error"] = s.error;
  return j;
}

Simulator::Simulator(ModelManager& models, StorageManager* storage, const LogicalClock* clock,
                     std::size_t workers)
    : models_(models), storage_(storage), clock_(clock), engine_(models, workers) {}

Simulator::~Simulator() = default;

std::string Simulator::scenario_sim(SimScenario sc) {
  models_.check(sc);
  const ModelSpec spec = models_.get_model(sc.model_id);
  std::string id;
  {
    std::lock_guard lock(mu_);
    if (sc.scenario_id.empty()) {
      char buf[32];
      do {
        std::snprintf(buf, sizeof buf, "sc-%06zu", ++next_);
      } while (slots_.count(buf));
      sc.scenario_id = buf;
    } else if (slots_.count(sc.scenario_id)) {
      fail(ErrorCode::InvalidSpec, "scenario id " + sc.scenario_id + " already submitted");
    }
    id = sc.scenario_id;
    Slot slot;
    slot.scenario = sc;
    slot.state.scenario_id = id;
    slot.state.horizon = sc.horizon;
    slots_.emplace(id, std::move(slot));
  }
  engine_.submit([this, id, spec, sc] {
    {
      std::lock_guard lock(mu_);
      slots_.at(id).state.status = SimStatus::Running;
    }
    try {
      SimResult r = engine_.execute(spec, sc, [this, &id](int step, const Values& v) {
        std::lock_guard lock(mu_);
        auto& st = slots_.at(id).state;
        st.step = step;
        st.latest = v;
      });
      r.completed_at = clock_ ? clock_->now() : TimePoint{};
      if (storage_) {
        json body{{"result", to_json(r)}, {"scenario", to_json(sc)}, {"model", to_json(spec)}};
        const std::string entity = sc.entity_id.empty() ? sc.model_id : sc.entity_id;
        storage_->create(RecordKey{Namespace::SimResults, entity, id, r.completed_at}, std::move(body));
      }
      std::lock_guard lock(mu_);
      auto& slot = slots_.at(id);
      slot.state.status = SimStatus::Completed;
      slot.state.objective = r.objective;
      slot.result = std::move(r);
    } catch (const std::exception& e) {
      std::lock_guard lock(mu_);
      auto& slot = slots_.at(id);
      slot.state.status = SimStatus::Failed;
      slot.state.error = e.what();
      slot.error = std::current_exception();
    }
    cv_.notify_all();
  });
  return id;
}

SimState Simulator::get_sim_state(const std::string& scenario_id) const {
  std::lock_guard lock(mu_);
  auto it = slots_.find(scenario_id);
  if (it == slots_.end()) fail(ErrorCode::NotFound, "scenario " + scenario_id);
  return it->second.state;
}

SimResult Simulator::wait(const std::string& scenario_id) {
  std::unique_lock lock(mu_);
  auto it = slots_.find(scenario_id);
  if (it == slots_.end()) fail(ErrorCode::NotFound, "scenario " + scenario_id);
  cv_.wait(lock, [&] {
    const auto s = it->second.state.status;
    return s == SimStatus::Completed || s == SimStatus::Failed;
  });
  if (it->second.error) std::rethrow_exception(it->second.error);
  return *it->second.result;
}

SimResult Simulator::run(SimScenario scenario) { return wait(scenario_sim(std::move(scenario))); }

SimResult Simulator::recompute(const Record& rec) const {
  const ModelSpec spec = model_spec_from_json(rec.body.at("model"));
  const SimScenario sc = scenario_from_json(rec.body.at("scenario"));
  SimResult r = engine_.execute(spec, sc);
  r.completed_at = rec.key.observed_at;
  return r;
}

}  // namespace twinarch
