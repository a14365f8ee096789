#ifndef TWINARCH_TWINARCH_H
#define TWINARCH_TWINARCH_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TWINARCH_API __declspec(dllexport)
#else
#define TWINARCH_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum twinarch_status {
  TWINARCH_OK = 0,
  TWINARCH_E_CATALOG_CORRUPT,
  TWINARCH_E_MALFORMED_PAYLOAD,
  TWINARCH_E_UNKNOWN_KEY,
  TWINARCH_E_MALFORMED_JSON,
  TWINARCH_E_SCHEMA_VIOLATION,
  TWINARCH_E_UNDECLARED_TELEMETRY,
  TWINARCH_E_UNREPRESENTABLE,
  TWINARCH_E_DUPLICATE_KEY,
  TWINARCH_E_NOT_FOUND,
  TWINARCH_E_INVALID_QUERY,
  TWINARCH_E_PARSE_ERROR,
  TWINARCH_E_DELIVERY_FAILED,
  TWINARCH_E_MALFORMED_COMMAND,
  TWINARCH_E_DUPLICATE_SHADOW,
  TWINARCH_E_DUPLICATE_MODEL,
  TWINARCH_E_INVALID_SPEC,
  TWINARCH_E_NUMERICAL_FAILURE,
  TWINARCH_E_INSUFFICIENT_HISTORY,
  TWINARCH_E_MISSING_THRESHOLD,
  TWINARCH_E_UNMAPPABLE_ACTION,
  TWINARCH_E_NO_FEASIBLE_SOLUTION,
  TWINARCH_E_CONFIG,
  TWINARCH_E_INVALID_ARGUMENT,
  TWINARCH_E_IO,
  TWINARCH_E_INTERNAL
} twinarch_status;

typedef struct twinarch_runtime twinarch_runtime;

/* Every char** result is heap-allocated and must go back through
   twinarch_string_free. On failure the out pointer is left NULL. */
TWINARCH_API void twinarch_string_free(char* s);

/* Message of the last failure on the calling thread; "" when none. */
TWINARCH_API const char* twinarch_last_error(void);
TWINARCH_API const char* twinarch_status_name(twinarch_status status);
TWINARCH_API const char* twinarch_version(void);

/* catalog */
TWINARCH_API twinarch_status twinarch_catalog_json(char** out_json);
/* *out_ok is 1 when the embedded catalog and matrix check clean. */
TWINARCH_API twinarch_status twinarch_catalog_check(char** out_report, int* out_ok);
/* kind: "iso" | "traceability"; format: "text" | "json" */
TWINARCH_API twinarch_status twinarch_report(const char* kind, const char* format, char** out);

/* wire formats: "ultralight" | "ditto" | "dtdl" | "ngsi-ld".
   options_json may be NULL; keys: device, attributeMap, dtdlModel, observedAt. */
TWINARCH_API twinarch_status twinarch_parse(const char* format, const char* data, size_t len,
                                            const char* options_json, char** out_json);
/* entity_json is an NGSI-LD entity; options_json keys: attributeMap. */
TWINARCH_API twinarch_status twinarch_serialize(const char* format, const char* entity_json,
                                                const char* options_json, char** out);

/* runtime. options_json may be NULL; keys:
     journal      path replayed at creation
     append       when true, new commits are appended to the journal
     shadowTypes  [{name, attributes, entityType}]
     adapter      adapter config used by twinarch_ingest */
TWINARCH_API twinarch_status twinarch_runtime_create(const char* options_json, twinarch_runtime** out);
TWINARCH_API void twinarch_runtime_destroy(twinarch_runtime* rt);
TWINARCH_API twinarch_status twinarch_runtime_replay(twinarch_runtime* rt, const char* journal_path,
                                                     uint64_t* out_lines);
/* observed_at: RFC 3339 stamp or NULL for the runtime clock. */
TWINARCH_API twinarch_status twinarch_ingest(twinarch_runtime* rt, const char* device_id, const char* data,
                                             size_t len, const char* observed_at, char** out_receipt);
/* ns may be NULL for every namespace. Output is JSON lines. */
TWINARCH_API twinarch_status twinarch_store_dump(twinarch_runtime* rt, const char* ns, char** out_jsonl);
/* query_json keys: type, entity, name, from, to */
TWINARCH_API twinarch_status twinarch_shadow_get(twinarch_runtime* rt, const char* query_json, char** out_json);
/* config_json is a predictor config, or NULL for defaults. */
TWINARCH_API twinarch_status twinarch_service_predict(twinarch_runtime* rt, const char* entity, int horizon,
                                                      const char* config_json, char** out_json);

/* simulation: {"model": ModelSpec, "scenario": SimScenario} */
TWINARCH_API twinarch_status twinarch_sim_run(const char* request_json, char** out_result);

/* loops. options_json keys: loop, ticks, seed, check, template, outputDir.
   *out_exit receives 0 (ok), 2 (config), 3 (conformance) or 4 (runtime).
   Config and runtime failures also return their error status; a failed
   conformance check returns TWINARCH_OK. */
TWINARCH_API twinarch_status twinarch_run(const char* manifest_path, const char* options_json,
                                          char** out_summary, int* out_exit);
/* template_json may be NULL for the embedded template of `loop`. */
TWINARCH_API twinarch_status twinarch_trace_check(const char* loop, const char* trace_jsonl,
                                                  const char* template_json, int expected_instances,
                                                  char** out_verdict, int* out_pass);
TWINARCH_API twinarch_status twinarch_trace_template(const char* loop, char** out_json);

/* harness: drives the physical twin for `ticks` ticks and returns the emitted
   payloads as JSON lines [{tick, payload}]. */
TWINARCH_API twinarch_status twinarch_harness_emit(const char* harness_json, int ticks, char** out_jsonl);

/* socket mode: newline-delimited payloads over a Unix domain socket.
   The server accepts one client, ingests each line and answers with a receipt. */
TWINARCH_API twinarch_status twinarch_ingest_serve(twinarch_runtime* rt, const char* device_id,
                                                   const char* socket_path, uint64_t* out_lines);
/* Connects to socket_path, sends each tick's payloads and collects the
   replies as JSON lines [{tick, payload, reply}]. */
TWINARCH_API twinarch_status twinarch_harness_socket(const char* harness_json, int ticks,
                                                     const char* socket_path, char** out_jsonl);

#ifdef __cplusplus
}
#endif

#endif
