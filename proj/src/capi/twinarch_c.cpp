#include "twinarch/twinarch.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "twinarch/catalog.hpp"
#include "twinarch/error.hpp"
#include "twinarch/orchestrator.hpp"
#include "twinarch/socket.hpp"

using namespace twinarch;

struct twinarch_runtime {
  LogicalClock clock;
  std::unique_ptr<StorageManager> storage;
  std::unique_ptr<DataManager> data;
  std::unique_ptr<ShadowManager> shadows;
  std::unique_ptr<P2DAdapter> p2d;
  std::vector<ShadowType> types;
};

namespace {

thread_local std::string g_last_error;

twinarch_status status_of(ErrorCode c) { return static_cast<twinarch_status>(static_cast<int>(c) + 1); }

char* dup(std::string_view s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size());
  p[s.size()] = '\0';
  return p;
}

template <class F>
twinarch_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return TWINARCH_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const json::exception& e) {
    g_last_error = std::string("MalformedJson: ") + e.what();
    return TWINARCH_E_MALFORMED_JSON;
  } catch (const std::bad_alloc&) {
    g_last_error = "Internal: out of memory";
    return TWINARCH_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = std::string("Internal: ") + e.what();
    return TWINARCH_E_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) fail(ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

void need_out(char** p, const char* what) {
  need(p, what);
  *p = nullptr;
}

json parse_arg(const char* text, const char* what) {
  if (!text || !*text) return json::object();
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::InvalidArgument, std::string(what) + " is not valid JSON");
  return j;
}

WireFormat format_arg(const char* f) {
  need(f, "format");
  auto w = wire_format_from_string(f);
  if (!w) fail(ErrorCode::InvalidArgument, std::string("unknown wire format: ") + f);
  return *w;
}

std::optional<TimePoint> time_arg(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  auto t = parse_rfc3339(it->get<std::string>());
  if (!t) fail(ErrorCode::InvalidArgument, std::string(key) + " must be RFC 3339");
  return t;
}

AttributeMap attribute_map_arg(const json& opt) {
  AttributeMap map;
  auto it = opt.find("attributeMap");
  if (it == opt.end()) return map;
  if (!it->is_object()) fail(ErrorCode::InvalidArgument, "attributeMap must be an object");
  for (const auto& [k, v] : it->items()) map[k] = v.get<std::string>();
  return map;
}

json measurements_json(const std::vector<Measurement>& ms) {
  json a = json::array();
  for (const auto& m : ms) a.push_back(to_json(m));
  return a;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_shadows(twinarch_runtime& rt, const std::string& entity, const std::optional<std::string>& type) {
  const auto ids = rt.shadows->shadow_ids();
  for (const auto& t : rt.types) {
    if (type && t.name != *type) continue;
    const auto id = shadow_id_for(t.name, entity);
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) rt.shadows->create_shadow(t.name, entity);
  }
}

void add_type(twinarch_runtime& rt, const ShadowType& t) {
  rt.shadows->register_type(t);
  for (const auto& have : rt.types) {
    if (have.name == t.name) return;
  }
  rt.types.push_back(t);
}

// Measurements that a registered type covers get a shadow on first sight.
void shadows_for(twinarch_runtime& rt, const Measurement& m) {
  const auto ids = rt.shadows->shadow_ids();
  for (const auto& t : rt.types) {
    if (!t.covers(m)) continue;
    const auto id = shadow_id_for(t.name, m.entity_id);
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) rt.shadows->create_shadow(t.name, m.entity_id);
  }
}

void advance_clock(twinarch_runtime& rt) {
  TimePoint latest{};
  for (const auto& r : rt.storage->dump(Namespace::Measurements)) latest = std::max(latest, r.key.observed_at);
  if (latest > rt.clock.now()) rt.clock.set(latest);
}

int exit_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidSpec:
    case ErrorCode::InvalidArgument:
    case ErrorCode::MissingThreshold:
      return 2;
    default:
      return 4;
  }
}

}  // namespace

extern "C" {

void twinarch_string_free(char* s) { std::free(s); }

const char* twinarch_last_error(void) { return g_last_error.c_str(); }

const char* twinarch_status_name(twinarch_status status) {
  if (status == TWINARCH_OK) return "Ok";
  if (status < TWINARCH_OK || status > TWINARCH_E_INTERNAL) return "Unknown";
  static thread_local std::string name;
  name = std::string(to_string(static_cast<ErrorCode>(static_cast<int>(status) - 1)));
  return name.c_str();
}

const char* twinarch_version(void) { return "0.1.0"; }

twinarch_status twinarch_catalog_json(char** out_json) {
  return guarded([&] {
    need_out(out_json, "out_json");
    *out_json = dup(dump_json(catalog::to_json(catalog::load_catalog()), 2));
  });
}

twinarch_status twinarch_catalog_check(char** out_report, int* out_ok) {
  return guarded([&] {
    need_out(out_report, "out_report");
    const auto report = catalog::check_catalog(catalog::load_catalog());
    if (out_ok) *out_ok = report.ok() ? 1 : 0;
    *out_report = dup(catalog::format_check_report(report));
  });
}

twinarch_status twinarch_report(const char* kind, const char* format, char** out) {
  return guarded([&] {
    need(kind, "kind");
    need(out, "out");
    const std::string k = kind, f = format ? format : "text";
    if (f != "text" && f != "json") fail(ErrorCode::InvalidArgument, "format must be text or json");
    const auto& cat = catalog::load_catalog();
    std::string text;
    if (k == "iso") {
      text = f == "text" ? catalog::iso_report(cat) : dump_json(catalog::iso_report_json(cat), 2) + "\n";
    } else if (k == "traceability") {
      text = f == "text" ? catalog::traceability_report(cat) : dump_json(catalog::traceability_report_json(cat), 2) + "\n";
    } else {
      fail(ErrorCode::InvalidArgument, "report kind must be iso or traceability");
    }
    *out = dup(text);
  });
}

twinarch_status twinarch_parse(const char* format, const char* data, size_t len, const char* options_json,
                               char** out_json) {
  return guarded([&] {
    need_out(out_json, "out_json");
    if (!data && len) fail(ErrorCode::InvalidArgument, "data is NULL");
    const WireFormat fmt = format_arg(format);
    const json opt = parse_arg(options_json, "options");
    const std::string_view payload(data ? data : "", len);
    const std::string device = opt.value("device", std::string("device"));
    const TimePoint at = time_arg(opt, "observedAt").value_or(TimePoint{});
    json out;
    switch (fmt) {
      case WireFormat::Ultralight: {
        const AttributeMap map = attribute_map_arg(opt);
        out["measurements"] = measurements_json(parse_ultralight(payload, device, map, at));
        break;
      }
      case WireFormat::DtdlTelemetry: {
        auto m = opt.find("dtdlModel");
        if (m == opt.end()) fail(ErrorCode::InvalidArgument, "dtdl parsing needs dtdlModel");
        const std::string model = m->is_string() ? m->get<std::string>() : m->dump();
        out["measurements"] = measurements_json(parse_dtdl_telemetry(model, payload, device, at));
        break;
      }
      case WireFormat::DittoThing:
      case WireFormat::NgsiLd: {
        const auto e = fmt == WireFormat::NgsiLd ? parse_ngsi_ld(payload) : parse_ditto_thing(payload);
        out["entity"] = to_json(e);
        out["measurements"] = measurements_json(to_measurements(e, source_of(fmt), at));
        break;
      }
    }
    *out_json = dup(dump_json(out, 2));
  });
}

twinarch_status twinarch_serialize(const char* format, const char* entity_json, const char* options_json,
                                   char** out) {
  return guarded([&] {
    need_out(out, "out");
    need(entity_json, "entity_json");
    const WireFormat fmt = format_arg(format);
    const json opt = parse_arg(options_json, "options");
    const AttributeMap map = attribute_map_arg(opt);
    const CanonicalEntity e = parse_ngsi_ld(entity_json);
    *out = dup(serialize(e, fmt, ultralight_options(map)));
  });
}

twinarch_status twinarch_runtime_create(const char* options_json, twinarch_runtime** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    const json opt = parse_arg(options_json, "options");
    auto rt = std::make_unique<twinarch_runtime>();
    StorageOptions so;
    std::optional<std::string> journal;
    if (auto j = opt.find("journal"); j != opt.end() && j->is_string()) journal = j->get<std::string>();
    if (journal && opt.value("append", false)) so.journal = *journal;
    rt->storage = std::make_unique<StorageManager>(&rt->clock, so);
    rt->data = std::make_unique<DataManager>(*rt->storage);
    rt->shadows = std::make_unique<ShadowManager>(*rt->storage, &rt->clock);
    if (journal && std::filesystem::exists(*journal)) {
      rt->storage->replay(*journal);
      rt->shadows->rebuild_index();
      advance_clock(*rt);
      for (const auto& id : rt->shadows->shadow_ids()) add_type(*rt, rt->shadows->shadow(id).type);
    }
    for (const auto& t : opt.value("shadowTypes", json::array())) add_type(*rt, shadow_type_from_json(t));
    if (auto a = opt.find("adapter"); a != opt.end()) {
      AdapterConfig cfg = adapter_config_from_json(*a);
      rt->p2d = std::make_unique<P2DAdapter>(std::move(cfg), *rt->data);
    }
    *out = rt.release();
  });
}

void twinarch_runtime_destroy(twinarch_runtime* rt) {
  if (!rt) return;
  try {
    rt->storage->flush();
  } catch (...) {
  }
  delete rt;
}

twinarch_status twinarch_runtime_replay(twinarch_runtime* rt, const char* journal_path, uint64_t* out_lines) {
  return guarded([&] {
    need(rt, "runtime");
    need(journal_path, "journal_path");
    const auto n = rt->storage->replay(journal_path);
    rt->shadows->rebuild_index();
    advance_clock(*rt);
    if (out_lines) *out_lines = n;
  });
}

twinarch_status twinarch_ingest(twinarch_runtime* rt, const char* device_id, const char* data, size_t len,
                                const char* observed_at, char** out_receipt) {
  return guarded([&] {
    need(rt, "runtime");
    need(device_id, "device_id");
    need_out(out_receipt, "out_receipt");
    if (!rt->p2d) fail(ErrorCode::ConfigError, "runtime has no adapter config");
    if (observed_at) {
      auto t = parse_rfc3339(observed_at);
      if (!t) fail(ErrorCode::InvalidArgument, "observed_at must be RFC 3339");
      rt->clock.set(*t);
    } else {
      rt->clock.advance(std::chrono::seconds(1));
    }
    const auto r = rt->p2d->ingest(std::string_view(data ? data : "", len), device_id, rt->clock.now());
    for (const auto& m : r.committed) {
      shadows_for(*rt, m);
      rt->shadows->update_from_measurement(m);
    }
    json j{{"stored", r.stored}, {"rejected", r.rejected}, {"parseFailed", r.parse_failed},
           {"committed", measurements_json(r.committed)}};
    rt->storage->flush();
    *out_receipt = dup(dump_json(j));
  });
}

twinarch_status twinarch_store_dump(twinarch_runtime* rt, const char* ns, char** out_jsonl) {
  return guarded([&] {
    need(rt, "runtime");
    need_out(out_jsonl, "out_jsonl");
    std::optional<Namespace> n;
    if (ns && *ns) {
      n = namespace_from_string(ns);
      if (!n) fail(ErrorCode::InvalidArgument, std::string("unknown namespace: ") + ns);
    }
    std::string text;
    for (const auto& r : rt->storage->dump(n)) text += dump_json(to_json(r)) + "\n";
    *out_jsonl = dup(text);
  });
}

twinarch_status twinarch_shadow_get(twinarch_runtime* rt, const char* query_json, char** out_json) {
  return guarded([&] {
    need(rt, "runtime");
    need_out(out_json, "out_json");
    const json qj = parse_arg(query_json, "query");
    ShadowQuery q;
    if (qj.contains("type")) q.type = qj["type"].get<std::string>();
    if (qj.contains("entity")) q.entity_id = qj["entity"].get<std::string>();
    if (qj.contains("name")) q.name = qj["name"].get<std::string>();
    q.from = time_arg(qj, "from");
    q.to = time_arg(qj, "to");
    if (q.entity_id) ensure_shadows(*rt, *q.entity_id, q.type);
    json a = json::array();
    for (const auto& s : rt->shadows->get_shadow(q)) a.push_back(to_json(s));
    *out_json = dup(dump_json(a, 2));
  });
}

twinarch_status twinarch_service_predict(twinarch_runtime* rt, const char* entity, int horizon,
                                         const char* config_json, char** out_json) {
  return guarded([&] {
    need(rt, "runtime");
    need(entity, "entity");
    need_out(out_json, "out_json");
    const json cj = parse_arg(config_json, "config");
    const PredictorConfig cfg = predictor_config_from_json(cj.empty() ? json() : cj);
    ensure_shadows(*rt, entity, std::nullopt);
    Predictor p(*rt->shadows, *rt->storage, &rt->clock, cfg);
    *out_json = dup(dump_json(to_json(p.prediction(entity, horizon)), 2));
  });
}

twinarch_status twinarch_sim_run(const char* request_json, char** out_result) {
  return guarded([&] {
    need(request_json, "request_json");
    need_out(out_result, "out_result");
    const json req = parse_arg(request_json, "request");
    if (!req.contains("model") || !req.contains("scenario")) {
      fail(ErrorCode::InvalidSpec, "sim request needs model and scenario");
    }
    ModelManager models;
    const ModelSpec spec = models.create_model(model_spec_from_json(req["model"]));
    SimScenario sc = scenario_from_json(req["scenario"]);
    if (sc.model_id.empty()) sc.model_id = spec.model_id;
    Simulator sim(models, nullptr, nullptr, 1);
    *out_result = dup(dump_json(to_json(sim.run(sc)), 2));
  });
}

twinarch_status twinarch_run(const char* manifest_path, const char* options_json, char** out_summary,
                             int* out_exit) {
  int code = 4;
  if (out_summary) *out_summary = nullptr;
  auto st = guarded([&] {
    need(manifest_path, "manifest_path");
    const json opt = parse_arg(options_json, "options");
    std::optional<LoopKind> loop;
    RunSetup setup;
    Manifest m;
    try {
      if (auto l = opt.find("loop"); l != opt.end()) {
        loop = loop_from_string(l->get<std::string>());
        if (!loop) fail(ErrorCode::ConfigError, "loop must be monitoring or prediction");
      }
      m = read_manifest(manifest_path);
      if (auto o = opt.find("outputDir"); o != opt.end()) m.output_dir = o->get<std::string>();
      setup = load_setup(m, loop);
      if (auto t = opt.find("ticks"); t != opt.end()) {
        setup.run.max_ticks = t->get<int>();
        if (setup.run.max_ticks < 1) fail(ErrorCode::ConfigError, "ticks must be >= 1");
      }
      if (auto s = opt.find("seed"); s != opt.end()) {
        setup.run.seed = s->get<std::uint64_t>();
        setup.harness.seed = s->get<std::uint64_t>();
      }
    } catch (const Error& e) {
      code = exit_for(e.code()) == 4 ? 2 : exit_for(e.code());
      throw;
    } catch (const json::exception& e) {
      code = 2;
      fail(ErrorCode::ConfigError, e.what());
    }

    std::optional<SequenceTemplate> tmpl;
    if (opt.value("check", false)) {
      try {
        if (auto t = opt.find("template"); t != opt.end() && t->is_string()) {
          tmpl = template_from_json(json::parse(read_file(t->get<std::string>())));
        } else {
          tmpl = template_for(to_string(setup.run.loop));
        }
      } catch (...) {
        code = 2;
        throw;
      }
    }
    if (setup.run.journal) std::filesystem::create_directories(setup.run.journal->parent_path());

    std::unique_ptr<TwinManager> tm;
    try {
      tm = std::make_unique<TwinManager>(setup);
    } catch (const Error& e) {
      code = exit_for(e.code());
      throw;
    }
    json summary;
    std::optional<Error> runtime_error;
    try {
      summary = setup.run.loop == LoopKind::Monitoring ? summarize(tm->run_monitoring()) : summarize(tm->run_prediction());
    } catch (const Error& e) {
      runtime_error = e;
      summary = json{{"loop", to_string(setup.run.loop)}, {"error", e.what()}};
    }
    std::optional<Verdict> verdict;
    if (tmpl && !runtime_error) {
      std::optional<std::size_t> expected;
      if (tmpl->per_tick) expected = static_cast<std::size_t>(setup.run.max_ticks);
      verdict = check_trace(tm->trace(), *tmpl, expected);
      summary["verdict"] = verdict->to_json();
    }
    summary["traceDigest"] = tm->trace().digest();
    write_outputs(m.output_dir, *tm, summary, verdict);
    if (runtime_error) {
      code = exit_for(runtime_error->code());
      throw *runtime_error;
    }
    code = verdict && !verdict->pass ? 3 : 0;
    if (out_summary) *out_summary = dup(dump_json(summary, 2));
  });
  if (out_exit) *out_exit = code;
  return st;
}

twinarch_status twinarch_trace_check(const char* loop, const char* trace_jsonl, const char* template_json,
                                     int expected_instances, char** out_verdict, int* out_pass) {
  if (out_verdict) *out_verdict = nullptr;
  return guarded([&] {
    need(trace_jsonl, "trace_jsonl");
    SequenceTemplate tmpl = template_json && *template_json ? template_from_json(parse_arg(template_json, "template"))
                                                            : template_for(loop ? loop : "");
    const auto trace = InteractionTrace::from_jsonl(trace_jsonl);
    std::optional<std::size_t> expected;
    if (expected_instances > 0) expected = static_cast<std::size_t>(expected_instances);
    const Verdict v = check_trace(trace, tmpl, expected);
    if (out_pass) *out_pass = v.pass ? 1 : 0;
    if (out_verdict) *out_verdict = dup(dump_json(v.to_json(), 2));
  });
}

twinarch_status twinarch_trace_template(const char* loop, char** out_json) {
  return guarded([&] {
    need(loop, "loop");
    need_out(out_json, "out_json");
    *out_json = dup(dump_json(to_json(template_for(loop)), 2));
  });
}

twinarch_status twinarch_harness_emit(const char* harness_json, int ticks, char** out_jsonl) {
  return guarded([&] {
    need_out(out_jsonl, "out_jsonl");
    PhysicalTwin twin(harness_config_from_json(parse_arg(harness_json, "harness")));
    std::string text;
    for (int t = 1; t <= ticks; ++t) {
      for (const auto& p : twin.emit(t, add_seconds(TimePoint{}, t))) {
        text += dump_json(json{{"tick", p.tick}, {"payload", p.payload}}) + "\n";
      }
    }
    *out_jsonl = dup(text);
  });
}

twinarch_status twinarch_ingest_serve(twinarch_runtime* rt, const char* device_id, const char* socket_path,
                                      uint64_t* out_lines) {
  return guarded([&] {
    need(rt, "runtime");
    need(device_id, "device_id");
    need(socket_path, "socket_path");
    if (!rt->p2d) fail(ErrorCode::ConfigError, "runtime has no adapter config");
    const std::string device = device_id;
    const auto n = serve_lines(socket_path, [&](std::string_view line) {
      rt->clock.advance(std::chrono::seconds(1));
      try {
        const auto r = rt->p2d->ingest(line, device, rt->clock.now());
        for (const auto& m : r.committed) {
      shadows_for(*rt, m);
      rt->shadows->update_from_measurement(m);
    }
        return dump_json(json{{"stored", r.stored}, {"rejected", r.rejected}, {"parseFailed", r.parse_failed}});
      } catch (const Error& e) {
        return dump_json(json{{"error", e.what()}});
      }
    });
    rt->storage->flush();
    if (out_lines) *out_lines = n;
  });
}

twinarch_status twinarch_harness_socket(const char* harness_json, int ticks, const char* socket_path,
                                        char** out_jsonl) {
  if (out_jsonl) *out_jsonl = nullptr;
  return guarded([&] {
    need(socket_path, "socket_path");
    PhysicalTwin twin(harness_config_from_json(parse_arg(harness_json, "harness")));
    LineChannel ch = LineChannel::connect(socket_path);
    std::string text;
    for (int t = 1; t <= ticks; ++t) {
      for (const auto& p : twin.emit(t, add_seconds(TimePoint{}, t))) {
        ch.send_line(p.payload);
        auto reply = ch.read_line();
        json r = reply ? json::parse(*reply, nullptr, false) : json();
        if (r.is_discarded()) r = *reply;
        text += dump_json(json{{"tick", p.tick}, {"payload", p.payload}, {"reply", r}}) + "\n";
      }
    }
    if (out_jsonl) *out_jsonl = dup(text);
  });
}

}  // extern "C"
