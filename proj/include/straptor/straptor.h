#ifndef STRAPTOR_H
#define STRAPTOR_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define STRAPTOR_API __declspec(dllexport)
#else
#define STRAPTOR_API __attribute__((visibility("default")))
#endif

typedef enum straptor_status {
  STRAPTOR_OK = 0,
  STRAPTOR_INVALID_ENCODING,
  STRAPTOR_EMPTY_INPUT,
  STRAPTOR_NO_TABLE_FOUND,
  STRAPTOR_MALFORMED_MARKUP,
  STRAPTOR_CORRUPT_WORKBOOK,
  STRAPTOR_UNSUPPORTED_FEATURE,
  STRAPTOR_UNSUPPORTED_FORMAT,
  STRAPTOR_NESTING_TOO_DEEP,
  STRAPTOR_INVALID_GRID,
  STRAPTOR_TIMEOUT,
  STRAPTOR_AUTH_FAILURE,
  STRAPTOR_MALFORMED_RESPONSE,
  STRAPTOR_MISSING_SCRIPT_ENTRY,
  STRAPTOR_DIMENSION_MISMATCH,
  STRAPTOR_ZERO_VECTOR,
  STRAPTOR_MODEL_ERROR,
  STRAPTOR_INVALID_CONFIG,
  STRAPTOR_NODE_NOT_FOUND,
  STRAPTOR_TYPE_MISMATCH,
  STRAPTOR_SYNTAX_ERROR,
  STRAPTOR_SCHEMA_VIOLATION,
  STRAPTOR_STRUCTURE_VIOLATION,
  STRAPTOR_CYCLE_CREATED,
  STRAPTOR_ROOT_DELETION,
  STRAPTOR_INVALID_EDIT,
  STRAPTOR_UNPARSEABLE_CANDIDATES,
  STRAPTOR_EMPTY_GRID,
  STRAPTOR_UNDECOMPOSABLE_QUESTION,
  STRAPTOR_INVALID_PLAN,
  STRAPTOR_STEP_FAILURE,
  STRAPTOR_NO_TREES,
  STRAPTOR_SESSION_NOT_FOUND,
  STRAPTOR_TREE_NOT_FOUND,
  STRAPTOR_JOB_NOT_FOUND,
  STRAPTOR_VERSION_CONFLICT,
  STRAPTOR_INVALID_ARGUMENT,
  STRAPTOR_IO,
  STRAPTOR_INTERNAL
} straptor_status;

typedef struct straptor_gateway straptor_gateway;
typedef struct straptor_tree straptor_tree;
typedef struct straptor_server straptor_server;

/* Error code name, e.g. "UnsupportedFormat". Static storage. */
STRAPTOR_API const char* straptor_status_string(straptor_status status);
/* Nonzero for failures raised by a model provider. */
STRAPTOR_API int straptor_status_is_model_error(straptor_status status);
/* Message of the last failed call on this thread; "" after a success. */
STRAPTOR_API const char* straptor_last_error(void);
STRAPTOR_API const char* straptor_version(void);
/* Releases strings returned through char** out parameters. */
STRAPTOR_API void straptor_string_free(char* s);

/* config_path may be NULL for a gateway without providers. */
STRAPTOR_API straptor_status straptor_gateway_open(const char* config_path, straptor_gateway** out);
STRAPTOR_API void straptor_gateway_free(straptor_gateway* gw);

/* mode: "heuristic" or "model"; tau in [0, 1]; gw may be NULL in heuristic mode.
   report_json may be NULL. */
STRAPTOR_API straptor_status straptor_tree_convert_file(const char* path, const char* mode, double tau,
                                                        const straptor_gateway* gw, straptor_tree** out,
                                                        char** report_json);
STRAPTOR_API straptor_status straptor_tree_from_json(const char* json, size_t len, straptor_tree** out);
STRAPTOR_API straptor_status straptor_tree_load_file(const char* path, straptor_tree** out);
/* Canonical serialization. */
STRAPTOR_API straptor_status straptor_tree_to_json(const straptor_tree* tree, char** out);
STRAPTOR_API straptor_status straptor_tree_save_file(const straptor_tree* tree, const char* path);
/* JSON list of edit objects, applied all-or-nothing. */
STRAPTOR_API straptor_status straptor_tree_apply_edits(straptor_tree* tree, const char* edits_json);
STRAPTOR_API void straptor_tree_free(straptor_tree* tree);

/* decomposer: "template" or "llm". Writes the answer JSON (text, confidence,
   elapsed_ms, plan, sub_questions, retrieval_path, trace, verification). */
STRAPTOR_API straptor_status straptor_ask(const straptor_tree* tree, const char* question, const char* decomposer,
                                          const straptor_gateway* gw, char** answer_json);

/* cases_path holds one {table_path, question, gold_answer} object per line;
   relative table paths resolve against dir (the cases file's directory when NULL). */
STRAPTOR_API straptor_status straptor_bench(const char* cases_path, const char* dir, const char* decomposer,
                                            size_t jobs, const straptor_gateway* gw, char** report_json);

/* config_path may be NULL. port 0 picks a free port, reported in bound_port. */
STRAPTOR_API straptor_status straptor_server_start(const char* data_dir, const char* config_path, const char* host,
                                                   int port, straptor_server** out, int* bound_port);
/* Nonzero while the listener is accepting requests. */
STRAPTOR_API int straptor_server_running(const straptor_server* server);
/* Blocks until the server stops. */
STRAPTOR_API straptor_status straptor_server_wait(straptor_server* server);
STRAPTOR_API void straptor_server_stop(straptor_server* server);
STRAPTOR_API void straptor_server_free(straptor_server* server);

#ifdef __cplusplus
}
#endif

#endif
