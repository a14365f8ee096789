#include "twinarch/services.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "twinarch/error.hpp"

namespace twinarch {

namespace {

double seconds_between(TimePoint a, TimePoint b) {
  return static_cast<double>(to_millis(b) - to_millis(a)) / 1000.0;
}

std::string counter_id(const char* prefix, std::size_t n) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s-%06zu", prefix, n);
  return buf;
}

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", std::round(v * 10) / 10);
  std::string s = buf;
  if (s.size() > 2 && s.compare(s.size() - 2, 2, ".0") == 0) s.resize(s.size() - 2);
  if (s == "-0") s = "0";
  return s;
}

using Samples = std::map<std::string, std::vector<std::pair<TimePoint, double>>>;

// Numeric trace points per attribute over every shadow of the entity, time-sorted,
// one value per timestamp.
Samples entity_samples(const ShadowManager& shadows, const std::string& entity_id) {
  ShadowQuery q;
  q.entity_id = entity_id;
  std::map<std::string, std::map<TimePoint, double>> merged;
  for (const auto& s : shadows.get_shadow(q)) {
    for (const auto& p : s.trace) {
      if (p.value.is_number()) merged[p.attribute].emplace(p.observed_at, p.value.as_number());
    }
  }
  Samples out;
  for (auto& [attr, series] : merged) {
    auto& v = out[attr];
    for (const auto& [t, x] : series) v.emplace_back(t, x);
  }
  return out;
}

}  // namespace

std::string_view to_string(Provenance p) noexcept {
  switch (p) {
    case Provenance::RealOnly: return "RealOnly";
    case Provenance::SimOnly: return "SimOnly";
    case Provenance::Fused: return "Fused";
  }
  return "RealOnly";
}

std::string_view to_string(DeviationKind k) noexcept {
  return k == DeviationKind::Real ? "Real" : "Predicted";
}

void ServiceManager::commit(const RecordKey& key, json body) {
  if (storage_.get(key)) {
    storage_.update(key, std::move(body));
  } else {
    storage_.create(key, std::move(body));
  }
}

// ---------------------------------------------------------------------------
// State

json to_json(const TwinState& s) {
  json metrics = json::object();
  for (const auto& [k, v] : s.metrics) metrics[k] = v.to_json();
  json observed = json::object();
  for (const auto& [k, t] : s.observed) observed[k] = format_rfc3339(t);
  return json{{"entityId", s.entity_id},
              {"computedAt", format_rfc3339(s.computed_at)},
              {"metrics", metrics},
              {"observedAt", observed},
              {"provenance", to_string(s.provenance)}};
}

std::string render_state(const std::string& label, const TwinState& state) {
  auto num = [&](const char* name) -> std::optional<double> {
    auto it = state.metrics.find(name);
    if (it == state.metrics.end() || !it->second.is_number()) return std::nullopt;
    return it->second.as_number();
  };
  const auto density = num("density");
  const auto speed = num("speed");
  std::string out = label + " has ";
  if (density) {
    out += "a traffic density of " + short_number(*density * 100) + "%";
    if (speed) out += " with an average vehicle speed of " + short_number(*speed) + " km/h";
  } else if (speed) {
    out += "an average vehicle speed of " + short_number(*speed) + " km/h";
  } else {
    out += "no traffic state";
  }
  return out;
}

TwinState StateMonitor::get_state(const std::string& entity_id) {
  TwinState st;
  st.entity_id = entity_id;
  st.computed_at = now();
  std::map<std::string, std::pair<Scalar, TimePoint>> real, sim;

  ShadowQuery q;
  q.entity_id = entity_id;
  for (const auto& s : shadows_.get_shadow(q)) {
    for (const auto& p : s.trace) {
      auto it = real.find(p.attribute);
      if (it == real.end() || p.observed_at >= it->second.second) real[p.attribute] = {p.value, p.observed_at};
    }
  }

  Query sq;
  sq.ns = Namespace::SimResults;
  sq.entity_id = entity_id;
  const Record* newest = nullptr;
  auto records = storage_.read(sq);
  for (const auto& r : records) {
    if (r.body.contains("result") && r.body["result"].value("purpose", std::string()) == "nowcast") newest = &r;
  }
  if (newest) {
    const SimResult res = sim_result_from_json(newest->body["result"]);
    if (!res.state_series.empty()) {
      const auto& last = res.state_series.back();
      for (const auto& [k, v] : last.values) sim[k] = {Scalar::number(v), last.t};
    }
  }
  if (real.empty() && sim.empty()) fail(ErrorCode::NotFound, "no shadow or simulation data for " + entity_id);

  bool used_real = false, used_sim = false;
  for (const auto& [k, v] : real) {
    st.metrics[k] = v.first;
    st.observed[k] = v.second;
    used_real = true;
  }
  for (const auto& [k, v] : sim) {
    auto it = st.observed.find(k);
    if (it != st.observed.end() && it->second >= v.second) continue;
    st.metrics[k] = v.first;
    st.observed[k] = v.second;
    used_sim = true;
  }
  // A shadow metric fully replaced by simulation does not count as a contribution.
  used_real = std::any_of(real.begin(), real.end(), [&](const auto& kv) {
    return st.observed.at(kv.first) == kv.second.second && st.metrics.at(kv.first) == kv.second.first;
  });
  st.provenance = used_real && used_sim ? Provenance::Fused : used_sim ? Provenance::SimOnly : Provenance::RealOnly;
  commit(RecordKey{Namespace::States, entity_id, "state", st.computed_at}, to_json(st));
  return st;
}

// ---------------------------------------------------------------------------
// Prediction

json to_json(const Prediction& p) {
  json series = json::array();
  for (const auto& pt : p.series) series.push_back(json{{"t", format_rfc3339(pt.t)}, {"metrics", pt.metrics}});
  return json{{"entityId", p.entity_id},
              {"baseTime", format_rfc3339(p.base_time)},
              {"horizon", p.horizon},
              {"method", p.method},
              {"series", series}};
}

PredictorConfig predictor_config_from_json(const json& j) {
  PredictorConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) fail(ErrorCode::ConfigError, "predictor config must be an object");
  c.method = j.value("method", c.method);
  c.window = j.value("window", c.window);
  c.k = j.value("k", c.k);
  c.min_window = j.value("minWindow", c.min_window);
  if (j.contains("stepSeconds")) c.step_seconds = j["stepSeconds"].get<double>();
  if (j.contains("metrics")) c.metrics = j["metrics"].get<std::vector<std::string>>();
  if (c.method != "linear" && c.method != "last-value" && c.method != "moving-average") {
    fail(ErrorCode::ConfigError, "unknown prediction method " + c.method);
  }
  if (c.window < 1 || c.k < 1 || c.min_window < 1) fail(ErrorCode::ConfigError, "window sizes must be >= 1");
  return c;
}

std::vector<double> forecast(const std::vector<std::pair<double, double>>& samples,
                             const std::vector<double>& future, const PredictorConfig& cfg) {
  if (samples.empty() || samples.size() < cfg.min_window) {
    fail(ErrorCode::InsufficientHistory, "have " + std::to_string(samples.size()) + " points, need " +
                                             std::to_string(cfg.min_window));
  }
  std::vector<double> out;
  out.reserve(future.size());
  if (cfg.method == "last-value") {
    out.assign(future.size(), samples.back().second);
    return out;
  }
  if (cfg.method == "moving-average") {
    const std::size_t k = std::min(cfg.k, samples.size());
    double sum = 0;
    for (std::size_t i = samples.size() - k; i < samples.size(); ++i) sum += samples[i].second;
    out.assign(future.size(), sum / static_cast<double>(k));
    return out;
  }
  if (cfg.method != "linear") fail(ErrorCode::ConfigError, "unknown prediction method " + cfg.method);
  const std::size_t w = std::min(cfg.window, samples.size());
  const auto first = samples.end() - static_cast<std::ptrdiff_t>(w);
  double tm = 0, vm = 0;
  for (auto it = first; it != samples.end(); ++it) {
    tm += it->first;
    vm += it->second;
  }
  tm /= static_cast<double>(w);
  vm /= static_cast<double>(w);
  double sxy = 0, sxx = 0;
  for (auto it = first; it != samples.end(); ++it) {
    sxy += (it->first - tm) * (it->second - vm);
    sxx += (it->first - tm) * (it->first - tm);
  }
  const double slope = sxx > 0 ? sxy / sxx : 0.0;
  for (double t : future) out.push_back(vm + slope * (t - tm));
  return out;
}

Prediction Predictor::prediction(const std::string& entity_id, int horizon) {
  if (horizon < 1) fail(ErrorCode::InvalidArgument, "horizon must be at least 1");
  const Samples samples = entity_samples(shadows_, entity_id);
  std::vector<std::string> metrics = cfg_.metrics;
  if (metrics.empty()) {
    for (const auto& [k, v] : samples) metrics.push_back(k);
  }
  if (metrics.empty()) fail(ErrorCode::InsufficientHistory, "no numeric history for " + entity_id);

  TimePoint base = TimePoint::min();
  for (const auto& m : metrics) {
    auto it = samples.find(m);
    if (it == samples.end() || it->second.size() < cfg_.min_window) {
      const std::size_t have = it == samples.end() ? 0 : it->second.size();
      fail(ErrorCode::InsufficientHistory, m + " for " + entity_id + " has " + std::to_string(have) +
                                               " points, need " + std::to_string(cfg_.min_window));
    }
    base = std::max(base, it->second.back().first);
  }
  double step = 1.0;
  if (cfg_.step_seconds) {
    step = *cfg_.step_seconds;
  } else {
    const auto& s = samples.at(metrics.front());
    const double gap = seconds_between(s[s.size() - 2].first, s.back().first);
    if (gap > 0) step = gap;
  }
  if (!(step > 0)) fail(ErrorCode::ConfigError, "prediction step must be > 0");

  Prediction p;
  p.entity_id = entity_id;
  p.base_time = base;
  p.horizon = horizon;
  p.method = cfg_.method == "moving-average" ? "moving-average(" + std::to_string(cfg_.k) + ")" : cfg_.method;
  std::vector<double> future;
  for (int h = 1; h <= horizon; ++h) {
    future.push_back(step * h);
    p.series.push_back(PredictedPoint{add_seconds(base, step * h), {}});
  }
  for (const auto& m : metrics) {
    std::vector<std::pair<double, double>> xs;
    for (const auto& [t, v] : samples.at(m)) xs.emplace_back(seconds_between(base, t), v);
    const auto ys = forecast(xs, future, cfg_);
    for (int h = 0; h < horizon; ++h) p.series[h].metrics[m] = ys[h];
  }
  commit(RecordKey{Namespace::States, entity_id, "prediction", base}, to_json(p));
  return p;
}

// ---------------------------------------------------------------------------
// Deviations

json to_json(const Deviation& d) {
  return json{{"deviationId", d.deviation_id}, {"entityId", d.entity_id},
              {"metric", d.metric},            {"value", d.value},
              {"expected", d.expected},        {"severity", to_string(d.severity)},
              {"detectedAt", format_rfc3339(d.detected_at)},
              {"at", format_rfc3339(d.at)},    {"kind", to_string(d.kind)}};
}

Thresholds thresholds_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::ConfigError, "thresholds must be an object");
  Thresholds t;
  auto bands = j.find("bands");
  if (bands == j.end() || !bands->is_object()) fail(ErrorCode::ConfigError, "thresholds need a bands object");
  for (const auto& [metric, b] : bands->items()) {
    if (!b.is_object() || !b.contains("lo") || !b.contains("hi") || !b["lo"].is_number() || !b["hi"].is_number()) {
      fail(ErrorCode::ConfigError, "band " + metric + " needs numeric lo and hi");
    }
    Band band{b["lo"].get<double>(), b["hi"].get<double>()};
    if (!(band.lo <= band.hi)) fail(ErrorCode::ConfigError, "band " + metric + " has lo > hi");
    t.bands[metric] = band;
  }
  t.critical_multiplier = j.value("criticalMultiplier", t.critical_multiplier);
  if (!(t.critical_multiplier >= 1)) fail(ErrorCode::ConfigError, "criticalMultiplier must be >= 1");
  t.objective.metric = j.value("objectiveMetric", std::string("density"));
  if (auto b = t.bands.find(t.objective.metric); b != t.bands.end()) {
    t.objective.lo = b->second.lo;
    t.objective.hi = b->second.hi;
  } else {
    fail(ErrorCode::ConfigError, "objective metric " + t.objective.metric + " has no band");
  }
  return t;
}

Severity severity_for(const Band& band, double value, double critical_multiplier) noexcept {
  const double d = band_distance(value, band.lo, band.hi);
  if (d == 0) return Severity::Info;
  const double margin = (critical_multiplier - 1) * (band.hi - band.lo) / 2;
  return d > margin ? Severity::Critical : Severity::Warning;
}

Deviation DeviationDetector::make(const std::string& entity, const std::string& metric, double value,
                                  TimePoint at, DeviationKind kind) {
  const Band& b = thr_.bands.at(metric);
  Deviation d;
  d.deviation_id = counter_id("dev", ++counter_);
  d.entity_id = entity;
  d.metric = metric;
  d.value = value;
  d.expected = value < b.lo ? b.lo : b.hi;
  d.severity = severity_for(b, value, thr_.critical_multiplier);
  d.detected_at = now();
  d.at = at;
  d.kind = kind;
  return d;
}

std::vector<Deviation> DeviationDetector::detect(const TwinState& state) {
  for (const auto& [metric, v] : state.metrics) {
    if (v.is_number() && !thr_.bands.count(metric)) fail(ErrorCode::MissingThreshold, metric);
  }
  std::vector<Deviation> out;
  for (const auto& [metric, v] : state.metrics) {
    if (!v.is_number()) continue;
    const Band& b = thr_.bands.at(metric);
    if (band_distance(v.as_number(), b.lo, b.hi) == 0) continue;
    auto at = state.observed.count(metric) ? state.observed.at(metric) : state.computed_at;
    out.push_back(make(state.entity_id, metric, v.as_number(), at, DeviationKind::Real));
  }
  return out;
}

std::vector<Deviation> DeviationDetector::detect(const Prediction& p) {
  std::map<std::string, std::pair<double, std::size_t>> worst;  // metric -> (distance, index)
  for (std::size_t i = 0; i < p.series.size(); ++i) {
    for (const auto& [metric, v] : p.series[i].metrics) {
      auto b = thr_.bands.find(metric);
      if (b == thr_.bands.end()) fail(ErrorCode::MissingThreshold, metric);
      const double d = band_distance(v, b->second.lo, b->second.hi);
      auto it = worst.find(metric);
      if (it == worst.end() || d > it->second.first) worst[metric] = {d, i};
    }
  }
  std::vector<Deviation> out;
  for (const auto& [metric, w] : worst) {
    if (w.first == 0) continue;
    const auto& pt = p.series[w.second];
    out.push_back(make(p.entity_id, metric, pt.metrics.at(metric), pt.t, DeviationKind::Predicted));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenarios and solutions

std::vector<CandidateSolution> candidates_from_json(const json& j) {
  const json& list = j.is_object() ? j.value("candidates", json()) : j;
  if (!list.is_array()) fail(ErrorCode::ConfigError, "candidate catalog must be an array");
  std::vector<CandidateSolution> out;
  for (const auto& c : list) {
    if (!c.is_object() || !c.contains("actions") || !c["actions"].is_array()) {
      fail(ErrorCode::ConfigError, "candidate needs an actions array");
    }
    CandidateSolution cs;
    for (const auto& a : c["actions"]) cs.actions.push_back(action_from_json(a));
    cs.name = c.value("name", std::string());
    if (cs.name.empty()) {
      for (const auto& a : cs.actions) cs.name += (cs.name.empty() ? "" : "+") + a.name;
    }
    out.push_back(std::move(cs));
  }
  return out;
}

Values sync_initial_state(const ModelEngine& engine, const ModelSpec& spec,
                          const std::vector<double>& observed_inputs, const Values& initial) {
  if (observed_inputs.empty() || spec.inputs.empty()) return initial;
  SimScenario sc;
  sc.model_id = spec.model_id;
  sc.initial_state = initial;
  sc.horizon = static_cast<int>(observed_inputs.size());
  for (std::size_t i = 0; i < observed_inputs.size(); ++i) {
    sc.input_series[static_cast<int>(i)] = {{spec.inputs.front(), observed_inputs[i]}};
  }
  return engine.execute(spec, sc).state_series.back().values;
}

SimScenario ScenarioGenerator::gen_scenario(const Deviation&, const CandidateSolution& candidate,
                                            const ScenarioContext& ctx) const {
  if (candidate.actions.empty()) fail(ErrorCode::UnmappableAction, "candidate " + candidate.name + " has no actions");
  const ModelSpec spec = models_.get_model(ctx.model_id);
  const Values params = models_.effective_parameters(spec);
  SimScenario sc;
  sc.model_id = ctx.model_id;
  sc.entity_id = ctx.entity_id;
  sc.initial_state = ctx.initial_state;
  sc.horizon = ctx.horizon;
  sc.step_size = ctx.step_size;
  sc.base_time = ctx.base_time;
  sc.seed = ctx.seed;
  sc.purpose = "what-if";
  sc.objective = ctx.objective;
  double factor = 1.0;
  for (const auto& a : candidate.actions) {
    if (a.name == "extend-green") {
      auto s = a.args.find("seconds");
      if (s == a.args.end() || !s->is_number() || s->get<double>() < 0 || !params.count("green_extension")) {
        fail(ErrorCode::UnmappableAction, "extend-green needs seconds >= 0 and a green_extension parameter");
      }
      sc.overrides["green_extension"] += s->get<double>();
    } else if (a.name == "divert") {
      auto f = a.args.find("fraction");
      if (f == a.args.end() || !f->is_number() || f->get<double>() < 0 || f->get<double>() > 1 ||
          spec.inputs.empty()) {
        fail(ErrorCode::UnmappableAction, "divert needs fraction in [0, 1]");
      }
      factor *= 1 - f->get<double>();
    } else {
      fail(ErrorCode::UnmappableAction, "no model mapping for action '" + a.name + "'");
    }
  }
  if (!spec.inputs.empty()) {
    for (std::size_t i = 0; i < ctx.inflow.size(); ++i) {
      sc.input_series[static_cast<int>(i)] = {{spec.inputs.front(), ctx.inflow[i] * factor}};
    }
  }
  return sc;
}

std::optional<std::size_t> select_best(const std::vector<Evaluation>& evals,
                                       const std::vector<CandidateSolution>& candidates) {
  auto names = [&](std::size_t i) {
    std::vector<std::string> n;
    for (const auto& a : candidates[i].actions) n.push_back(a.name);
    return n;
  };
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < evals.size(); ++i) {
    if (!evals[i].feasible) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& a = evals[i];
    const auto& b = evals[*best];
    if (a.objective != b.objective) {
      if (a.objective < b.objective) best = i;
    } else if (a.actions != b.actions) {
      if (a.actions < b.actions) best = i;
    } else if (names(i) < names(*best)) {
      best = i;
    }
  }
  return best;
}

Plan SolutionFinder::find_solution(const Deviation& deviation, const ScenarioContext& ctx,
                                   SimulationPort& sims, const TraceHook& hook) {
  evals_.clear();
  for (const auto& c : catalog_) {
    Evaluation e;
    e.candidate = c.name;
    e.actions = c.actions.size();
    e.objective = std::numeric_limits<double>::infinity();
    SimScenario sc;
    try {
      sc = generator_.gen_scenario(deviation, c, ctx);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::UnmappableAction) throw;
      evals_.push_back(e);
      continue;
    }
    if (hook) hook("SolutionFinder", "ScenarioGenerator", "genScenario", json{{"candidate", c.name}});
    e.scenario_id = sims.new_scenario_sim(sc);
    const SimResult r = sims.await(e.scenario_id);
    const Objective obj = ctx.objective.value_or(Objective{});
    e.final_value = r.state_series.back().values.at(obj.metric);
    e.objective = r.objective.value_or(band_distance(e.final_value, obj.lo, obj.hi));
    e.feasible = e.objective == 0;
    evals_.push_back(e);
  }
  auto best = select_best(evals_, catalog_);
  if (!best) fail(ErrorCode::NoFeasibleSolution, "no candidate restores " + deviation.metric + " for " + deviation.entity_id);
  Plan p;
  p.entity_id = deviation.entity_id;
  p.actions = catalog_[*best].actions;
  p.expected_objective = evals_[*best].objective;
  p.scenario_ids = {evals_[*best].scenario_id};
  p.correlation_id = deviation.deviation_id;
  return p;
}

Plan Planner::plan(Plan solution) {
  if (solution.actions.empty()) fail(ErrorCode::InvalidArgument, "plan needs at least one action");
  if (solution.scenario_ids.empty()) fail(ErrorCode::InvalidArgument, "plan needs a supporting scenario");
  solution.plan_id = counter_id("plan", ++counter_);
  commit(RecordKey{Namespace::Plans, solution.entity_id, solution.plan_id, now()}, to_json(solution));
  return solution;
}

std::string congestion_alert(const std::string& label) {
  return "High congestion detected on " + label + "; notify drivers to avoid the area";
}

Feedback FeedbackExecutor::deliver(Feedback fb, const std::string& entity_id) {
  last_ = d2p_.emit(fb, now());
  json body = to_json(fb);
  json acks = json::array();
  for (const auto& d : last_) acks.push_back(json{{"ok", d.ack.ok}, {"correlationId", d.ack.correlation_id}});
  body["acks"] = acks;
  commit(RecordKey{Namespace::Feedback, entity_id, counter_id("feedback", ++counter_), now()}, std::move(body));
  return fb;
}

Feedback FeedbackExecutor::execute(const Deviation& deviation, const std::string& label) {
  Feedback fb{Alert{congestion_alert(label), deviation.severity, deviation.deviation_id}, deviation.deviation_id};
  return deliver(std::move(fb), deviation.entity_id);
}

Feedback FeedbackExecutor::execute(const Plan& plan) {
  Feedback fb{CommandPlan{plan, {}}, plan.correlation_id};
  return deliver(std::move(fb), plan.entity_id);
}

Feedback FeedbackExecutor::execute(const Alert& alert, const std::string& entity_id) {
  Feedback fb{alert, alert.correlation_id};
  return deliver(std::move(fb), entity_id);
}

}  // namespace twinarch
