// twinarch command-line driver. Talks to the runtime through the C API only.
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "twinarch/twinarch.h"

using nlohmann::json;

namespace {

constexpr int kOk = 0, kConfig = 2, kConformance = 3, kRuntime = 4;

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { twinarch_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct Runtime {
  twinarch_runtime* rt = nullptr;
  ~Runtime() { twinarch_runtime_destroy(rt); }
};

int exit_for(twinarch_status st) {
  switch (st) {
    case TWINARCH_OK:
      return kOk;
    case TWINARCH_E_CONFIG:
    case TWINARCH_E_INVALID_ARGUMENT:
    case TWINARCH_E_INVALID_SPEC:
    case TWINARCH_E_MISSING_THRESHOLD:
      return kConfig;
    default:
      return kRuntime;
  }
}

int report_failure(twinarch_status st) {
  std::cerr << "twinarch: " << twinarch_last_error() << "\n";
  spdlog::debug("status {}", twinarch_status_name(st));
  return exit_for(st);
}

std::string slurp(std::istream& in) { return {std::istreambuf_iterator<char>(in), {}}; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return slurp(in);
}

json split_map(const std::vector<std::string>& pairs) {
  json m = json::object();
  for (const auto& p : pairs) {
    auto eq = p.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--map", "expects key=attribute, got " + p);
    m[p.substr(0, eq)] = p.substr(eq + 1);
  }
  return m;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("twinarch");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* lv = std::getenv("TWINARCH_LOG")) spdlog::set_level(spdlog::level::from_str(lv));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"twinarch: digital twin reference runtime"};
  app.require_subcommand(1);
  int code = kOk;

  // catalog
  auto* cat = app.add_subcommand("catalog", "inspect the embedded architecture catalog");
  bool cat_check = false, cat_iso = false;
  std::string cat_export;
  cat->add_flag("--check", cat_check, "validate catalog and traceability matrix");
  cat->add_flag("--iso-report", cat_iso, "print the ISO 23247 mapping");
  cat->add_option("--export", cat_export, "write catalog.json to this path");
  cat->callback([&] {
    twinarch_status st;
    if (cat_check) {
      OwnedString out;
      int ok = 0;
      if ((st = twinarch_catalog_check(&out.p, &ok)) != TWINARCH_OK) {
        code = report_failure(st);
        return;
      }
      std::cout << out.str();
      code = ok ? kOk : kConformance;
      return;
    }
    OwnedString out;
    st = cat_iso ? twinarch_report("iso", "text", &out.p) : twinarch_catalog_json(&out.p);
    if (st != TWINARCH_OK) {
      code = report_failure(st);
      return;
    }
    if (!cat_export.empty() && !cat_iso) {
      std::ofstream f(cat_export, std::ios::binary | std::ios::trunc);
      f << out.str() << "\n";
      if (!f) {
        std::cerr << "twinarch: cannot write " << cat_export << "\n";
        code = kRuntime;
      }
      return;
    }
    std::cout << out.str() << (cat_iso ? "" : "\n");
  });

  // report
  auto* rep = app.add_subcommand("report", "deterministic catalog reports");
  std::string rep_kind, rep_format = "text";
  rep->add_option("kind", rep_kind, "iso | traceability")->required()->check(CLI::IsMember({"iso", "traceability"}));
  rep->add_option("--format", rep_format, "json | text")->check(CLI::IsMember({"json", "text"}));
  rep->callback([&] {
    OwnedString out;
    if (auto st = twinarch_report(rep_kind.c_str(), rep_format.c_str(), &out.p); st != TWINARCH_OK) {
      code = report_failure(st);
      return;
    }
    std::cout << out.str();
  });

  // parse / serialize
  auto* parse = app.add_subcommand("parse", "parse one payload from stdin into canonical JSON");
  std::string fmt, device = "device", dtdl_model, observed_at;
  std::vector<std::string> map_pairs;
  const auto formats = CLI::IsMember({"ultralight", "ditto", "dtdl", "ngsi-ld"});
  parse->add_option("--format", fmt, "ultralight | ditto | dtdl | ngsi-ld")->required()->check(formats);
  parse->add_option("--device", device, "device id for formats without one");
  parse->add_option("--map", map_pairs, "Ultralight key=attribute");
  parse->add_option("--dtdl-model", dtdl_model, "DTDL interface file");
  parse->add_option("--observed-at", observed_at, "RFC 3339 stamp for untimed payloads");
  parse->callback([&] {
    json opt{{"device", device}, {"attributeMap", split_map(map_pairs)}};
    if (!dtdl_model.empty()) opt["dtdlModel"] = read_file(dtdl_model);
    if (!observed_at.empty()) opt["observedAt"] = observed_at;
    const std::string data = slurp(std::cin);
    OwnedString out;
    const std::string o = opt.dump();
    if (auto st = twinarch_parse(fmt.c_str(), data.data(), data.size(), o.c_str(), &out.p); st != TWINARCH_OK) {
      code = report_failure(st);
      return;
    }
    std::cout << out.str() << "\n";
  });

  auto* ser = app.add_subcommand("serialize", "serialize an NGSI-LD entity from stdin into a wire format");
  std::string ser_fmt;
  std::vector<std::string> ser_map;
  ser->add_option("--format", ser_fmt, "ultralight | ditto | dtdl | ngsi-ld")->required()->check(formats);
  ser->add_option("--map", ser_map, "Ultralight key=attribute");
  ser->callback([&] {
    const std::string data = slurp(std::cin);
    const std::string o = json{{"attributeMap", split_map(ser_map)}}.dump();
    OwnedString out;
    if (auto st = twinarch_serialize(ser_fmt.c_str(), data.c_str(), o.c_str(), &out.p); st != TWINARCH_OK) {
      code = report_failure(st);
      return;
    }
    std::cout << out.str() << "\n";
  });

  // ingest
  auto* ing = app.add_subcommand("ingest", "ingest payloads through the P2D adapter");
  std::string ing_fmt = "ultralight", ing_device, ing_config, ing_journal, ing_socket, ing_at, ing_types;
  std::vector<std::string> ing_map;
  bool ing_lines = false;
  ing->add_option("--format", ing_fmt)->check(formats);
  ing->add_option("--device", ing_device, "sending device id")->required();
  ing->add_option("--config", ing_config, "adapter config JSON");
  ing->add_option("--map", ing_map, "Ultralight key=attribute");
  ing->add_option("--journal", ing_journal, "journal to replay and append to");
  ing->add_option("--socket", ing_socket, "listen on this Unix socket instead of stdin");
  ing->add_option("--observed-at", ing_at, "RFC 3339 stamp for the payload");
  ing->add_option("--shadow-types", ing_types, "shadow type list JSON");
  ing->add_flag("--lines", ing_lines, "one payload per stdin line (default for ultralight)");
  ing->callback([&] {
    json adapter;
    if (!ing_config.empty()) {
      adapter = json::parse(read_file(ing_config));
    } else {
      adapter = json{{"format", ing_fmt},
                     {"attributeMap", split_map(ing_map)},
                     {"devices", {{ing_device, {{"entityId", ing_device}}}}}};
    }
    json opt{{"adapter", adapter}, {"append", true}};
    if (!ing_journal.empty()) opt["journal"] = ing_journal;
    if (!ing_types.empty()) opt["shadowTypes"] = json::parse(read_file(ing_types));
    Runtime rt;
    const std::string o = opt.dump();
    if (auto st = twinarch_runtime_create(o.c_str(), &rt.rt); st != TWINARCH_OK) {
      code = report_failure(st);
      return;
    }
    if (!ing_socket.empty()) {
      uint64_t lines = 0;
      if (auto st = twinarch_ingest_serve(rt.rt, ing_device.c_str(), ing_socket.c_str(), &lines); st != TWINARCH_OK) {
        code = report_failure(st);
        return;
      }
      std::cout << json{{"lines", lines}}.dump() << "\n";
      return;
    }
    const std::string data = slurp(std::cin);
    std::vector<std::string> payloads;
    if (ing_lines || ing_fmt == "ultralight") {
      std::istringstream ss(data);
      for (std::string line; std::getline(ss, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) payloads.push_back(line);
      }
    } else {
      payloads.push_back(data);
    }
    for (const auto& p : payloads) {
      OwnedString out;
      auto st = twinarch_ingest(rt.rt, ing_device.c_str(), p.data(), p.size(), ing_at.empty() ? nullptr : ing_at.c_str(),
                                &out.p);
      if (st != TWINARCH_OK) {
        code = report_failure(st);
        continue;
      }
      std::cout << out.str() << "\n";
    }
  });

  // store
  auto* store = app.add_subcommand("store", "inspect a storage journal");
  auto* dump = store->add_subcommand("dump", "print records as JSON lines");
  store->require_subcommand(1);
  std::string st_journal, st_ns;
  dump->add_option("--journal", st_journal, "journal file")->required()->check(CLI::ExistingFile);
  dump->add_option("--namespace", st_ns, "measurements | shadows | simresults | states | plans | feedback");
  dump->callback([&] {
    Runtime rt;
    const std::string o = json{{"journal", st_journal}}.dump();
    OwnedString out;
    twinarch_status st = twinarch_runtime_create(o.c_str(), &rt.rt);
    if (st == TWINARCH_OK) st = twinarch_store_dump(rt.rt, st_ns.empty() ? nullptr : st_ns.c_str(), &out.p);
    if (st != TWINARCH_OK) {
      code = report_failure(st);
      return;
    }
    std::cout << out.str();
  });

  // shadow
  auto* shadow = app.add_subcommand("shadow", "query digital shadows");
  shadow->require_subcommand(1);
  auto* sget = shadow->add_subcommand("get", "print shadow traces as JSON");
  std::string sh_journal, sh_type, sh_entity, sh_from, sh_to, sh_entity_type;
  std::vector<std::string> sh_attrs;
  sget->add_option("--journal", sh_journal, "journal file")->required()->check(CLI::ExistingFile);
  sget->add_option("--type", sh_type, "shadow type");
  sget->add_option("--entity", sh_entity, "entity id");
  sget->add_option("--from", sh_from, "RFC 3339 lower bound (inclusive)");
  sget->add_option("--to", sh_to, "RFC 3339 upper bound (exclusive)");
  sget->add_option("--attributes", sh_attrs, "define --type with these attributes when the journal lacks it");
  sget->add_option("--entity-type", sh_entity_type, "entity type for a type defined by --attributes");
  sget->callback([&] {
    json opt{{"journal", sh_journal}};
    if (!sh_attrs.empty()) {
      if (sh_type.empty()) throw CLI::ValidationError("--attributes", "needs --type");
      opt["shadowTypes"] = json::array({{{"name", sh_type}, {"attributes", sh_attrs}, {"entityType", sh_entity_type}}});
    }
    json q = json::object();
    if (!sh_type.empty()) q["type"] = sh_type;
    if (!sh_entity.empty()) q["entity"] = sh_entity;
    if (!sh_from.empty()) q["from"] = sh_from;
    if (!sh_to.empty()) q["to"] = sh_to;
    Runtime rt;
    OwnedString out;
    const std::string o = opt.dump(), qs = q.dump();
    twinarch_status st = twinarch_runtime_create(o.c_str(), &rt.rt);
    if (st == TWINARCH_OK) st = twinarch_shadow_get(rt.rt, qs.c_str(), &out.p);
    if (st != TWINARCH_OK) {
      code = report_failure(st);
      return;
    }
    std::cout << out.str() << "\n";
  });

  // sim
  auto* sim = app.add_subcommand("sim", "run digital models");
  sim->require_subcommand(1);
  auto* srun = sim->add_subcommand("run", "execute one scenario");
  std::string sim_file;
  srun->add_option("--scenario", sim_file, "JSON file {model, scenario}")->required()->check(CLI::ExistingFile);
  srun->callback([&] {
    const std::string req = read_file(sim_file);
    OwnedString out;
    if (auto st = twinarch_sim_run(req.c_str(), &out.p); st != TWINARCH_OK) {
      code = report_failure(st);
      return;
    }
    std::cout << out.str() << "\n";
  });

  // service
  auto* svc = app.add_subcommand("service", "run analytics services");
  svc->require_subcommand(1);
  auto* pred = svc->add_subcommand("predict", "forecast shadow metrics");
  std::string pr_journal, pr_entity, pr_config, pr_type = "telemetry";
  std::vector<std::string> pr_attrs;
  int pr_horizon = 5;
  pred->add_option("--journal", pr_journal, "journal file")->required()->check(CLI::ExistingFile);
  pred->add_option("--entity", pr_entity, "entity id")->required();
  pred->add_option("--horizon", pr_horizon, "steps ahead")->check(CLI::PositiveNumber);
  pred->add_option("--config", pr_config, "predictor config JSON");
  pred->add_option("--type", pr_type, "shadow type name for --attributes");
  pred->add_option("--attributes", pr_attrs, "attributes to shadow when the journal has no shadows");
  pred->callback([&] {
    json opt{{"journal", pr_journal}};
    if (!pr_attrs.empty()) opt["shadowTypes"] = json::array({{{"name", pr_type}, {"attributes", pr_attrs}}});
    const std::string cfg = pr_config.empty() ? std::string() : read_file(pr_config);
    Runtime rt;
    OwnedString out;
    const std::string o = opt.dump();
    twinarch_status st = twinarch_runtime_create(o.c_str(), &rt.rt);
    if (st == TWINARCH_OK) {
      st = twinarch_service_predict(rt.rt, pr_entity.c_str(), pr_horizon, cfg.empty() ? nullptr : cfg.c_str(), &out.p);
    }
    if (st != TWINARCH_OK) {
      code = report_failure(st);
      return;
    }
    std::cout << out.str() << "\n";
  });

  // run
  auto* run = app.add_subcommand("run", "drive a monitoring or prediction loop against the harness");
  std::string run_loop, run_config, run_template, run_out;
  int run_ticks = 0;
  uint64_t run_seed = 0;
  bool run_check = false;
  run->add_option("--loop", run_loop, "monitoring | prediction")->check(CLI::IsMember({"monitoring", "prediction"}));
  run->add_option("--config", run_config, "run manifest JSON")->required();
  auto* ticks_opt = run->add_option("--ticks", run_ticks, "override maxTicks");
  auto* seed_opt = run->add_option("--seed", run_seed, "seed for harness and models");
  run->add_flag("--check", run_check, "check the trace against the sequence template");
  run->add_option("--template", run_template, "template JSON used by --check");
  run->add_option("--out", run_out, "output directory (default: manifest outputDir)");
  run->callback([&] {
    json opt{{"check", run_check}};
    if (!run_loop.empty()) opt["loop"] = run_loop;
    if (ticks_opt->count()) opt["ticks"] = run_ticks;
    if (seed_opt->count()) opt["seed"] = run_seed;
    if (!run_template.empty()) opt["template"] = run_template;
    if (!run_out.empty()) opt["outputDir"] = run_out;
    OwnedString out;
    int exit_code = kRuntime;
    const std::string o = opt.dump();
    auto st = twinarch_run(run_config.c_str(), o.c_str(), &out.p, &exit_code);
    if (st != TWINARCH_OK) std::cerr << "twinarch: " << twinarch_last_error() << "\n";
    if (out.p) {
      json s = json::parse(out.str());
      if (s.contains("verdict")) std::cout << s["verdict"].dump() << "\n";
      spdlog::info("trace digest {}", s.value("traceDigest", std::string()));
    }
    code = exit_code;
  });

  // trace
  auto* trace = app.add_subcommand("trace", "sequence templates and trace conformance");
  trace->require_subcommand(1);
  auto* tcheck = trace->add_subcommand("check", "check a JSON-lines trace");
  std::string tr_loop = "monitoring", tr_file, tr_template;
  int tr_instances = 0;
  tcheck->add_option("--loop", tr_loop)->check(CLI::IsMember({"monitoring", "prediction"}));
  tcheck->add_option("--trace", tr_file, "trace.jsonl")->required()->check(CLI::ExistingFile);
  tcheck->add_option("--template", tr_template, "template JSON instead of the embedded one");
  tcheck->add_option("--instances", tr_instances, "expected instance count");
  tcheck->callback([&] {
    const std::string text = read_file(tr_file);
    const std::string tmpl = tr_template.empty() ? std::string() : read_file(tr_template);
    OwnedString out;
    int pass = 0;
    auto st = twinarch_trace_check(tr_loop.c_str(), text.c_str(), tmpl.empty() ? nullptr : tmpl.c_str(), tr_instances,
                                   &out.p, &pass);
    if (st != TWINARCH_OK) {
      code = st == TWINARCH_E_PARSE_ERROR ? kConformance : report_failure(st);
      if (st == TWINARCH_E_PARSE_ERROR) std::cerr << "twinarch: " << twinarch_last_error() << "\n";
      return;
    }
    std::cout << out.str() << "\n";
    code = pass ? kOk : kConformance;
  });
  auto* ttmpl = trace->add_subcommand("template", "print an embedded template");
  std::string tt_loop = "monitoring";
  ttmpl->add_option("--loop", tt_loop)->check(CLI::IsMember({"monitoring", "prediction"}));
  ttmpl->callback([&] {
    OwnedString out;
    if (auto st = twinarch_trace_template(tt_loop.c_str(), &out.p); st != TWINARCH_OK) {
      code = report_failure(st);
      return;
    }
    std::cout << out.str() << "\n";
  });

  // harness
  auto* har = app.add_subcommand("harness", "run the physical twin emulator");
  std::string h_config, h_socket;
  int h_ticks = 10;
  har->add_option("--config", h_config, "harness config JSON")->required()->check(CLI::ExistingFile);
  har->add_option("--ticks", h_ticks)->check(CLI::PositiveNumber);
  har->add_option("--socket", h_socket, "send payloads to an `ingest --socket` listener");
  har->callback([&] {
    const std::string cfg = read_file(h_config);
    OwnedString out;
    auto st = h_socket.empty() ? twinarch_harness_emit(cfg.c_str(), h_ticks, &out.p)
                               : twinarch_harness_socket(cfg.c_str(), h_ticks, h_socket.c_str(), &out.p);
    if (st != TWINARCH_OK) {
      code = report_failure(st);
      return;
    }
    std::cout << out.str();
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int r = app.exit(e);
    return r == 0 ? 0 : kConfig;
  } catch (const std::exception& e) {
    std::cerr << "twinarch: " << e.what() << "\n";
    return kConfig;
  }
  return code;
}
