#ifndef DTSI_DTSI_H
#define DTSI_DTSI_H

#include <stddef.h>

#if defined(_WIN32)
#define DTSI_API __declspec(dllexport)
#else
#define DTSI_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dtsi_status {
  DTSI_OK = 0,
  DTSI_E_INPUT = 1,     /* malformed model, unknown name, bad parameter */
  DTSI_E_ANALYSIS = 2,  /* e.g. several closed classes, not a bisimulation */
  DTSI_E_LIMIT = 3,     /* state or closure cap exceeded */
  DTSI_E_ARG = 4,       /* null handle, index out of range */
  DTSI_E_INTERNAL = 5
} dtsi_status;

typedef enum dtsi_format { DTSI_FORMAT_JSON = 0, DTSI_FORMAT_CSV = 1, DTSI_FORMAT_DOT = 2 } dtsi_format;

typedef enum dtsi_vector {
  DTSI_VEC_SJ = 0,
  DTSI_VEC_VAR = 1,
  DTSI_VEC_PSI_STAR = 2,
  DTSI_VEC_PSI = 3,
  DTSI_VEC_PHI = 4,
  DTSI_VEC_PHI_DIRECT = 5
} dtsi_vector;

typedef enum dtsi_matrix { DTSI_MAT_PM = 0, DTSI_MAT_P_STAR = 1 } dtsi_matrix;

typedef struct dtsi_model dtsi_model;
typedef struct dtsi_ts dtsi_ts;
typedef struct dtsi_net dtsi_net;
typedef struct dtsi_rg dtsi_rg;
typedef struct dtsi_quotient dtsi_quotient;
typedef struct dtsi_solution dtsi_solution;

/* Message for the last failing call on this thread; never NULL. */
DTSI_API const char* dtsi_last_error(void);
/* Releases any string returned through a char** out-parameter. */
DTSI_API void dtsi_string_free(char* s);
DTSI_API const char* dtsi_version(void);

/* ---- models ---- */
DTSI_API dtsi_status dtsi_model_load(const char* path, dtsi_model** out);
DTSI_API dtsi_status dtsi_model_parse(const char* text, dtsi_model** out);
DTSI_API void dtsi_model_free(dtsi_model* m);
/* "name=value" or "name=start:stop:step". */
DTSI_API dtsi_status dtsi_model_bind(dtsi_model* m, const char* spec);
/* JSON object: params, definitions, states, indices. */
DTSI_API dtsi_status dtsi_model_info(const dtsi_model* m, char** json);
DTSI_API dtsi_status dtsi_model_sweep_count(const dtsi_model* m, size_t* n);
/* JSON object of the bindings at sweep point i. */
DTSI_API dtsi_status dtsi_model_sweep_point(const dtsi_model* m, size_t i, char** json);
/* Canonical text of the root (definition == NULL) or a named definition. */
DTSI_API dtsi_status dtsi_model_expression(const dtsi_model* m, const char* definition, char** text);

/* ---- transition systems ---- */
DTSI_API dtsi_status dtsi_ts_build(const dtsi_model* m, const char* definition, size_t max_states, dtsi_ts** out);
/* Built at sweep point i; works when parameters carry ranges. */
DTSI_API dtsi_status dtsi_ts_build_point(const dtsi_model* m, const char* definition, size_t i, size_t max_states,
                                         dtsi_ts** out);
/* Same structure as base, values taken from sweep point i of m. */
DTSI_API dtsi_status dtsi_ts_at_point(const dtsi_ts* base, const dtsi_model* m, size_t i, dtsi_ts** out);
DTSI_API void dtsi_ts_free(dtsi_ts* ts);
DTSI_API dtsi_status dtsi_ts_size(const dtsi_ts* ts, size_t* states, size_t* tangible);
DTSI_API dtsi_status dtsi_ts_export(const dtsi_ts* ts, dtsi_format fmt, char** out);

/* ---- nets ---- */
DTSI_API dtsi_status dtsi_net_build(const dtsi_model* m, const char* definition, dtsi_net** out);
DTSI_API void dtsi_net_free(dtsi_net* n);
DTSI_API dtsi_status dtsi_net_size(const dtsi_net* n, size_t* places, size_t* transitions);
DTSI_API dtsi_status dtsi_net_export(const dtsi_net* n, dtsi_format fmt, char** out);
DTSI_API dtsi_status dtsi_rg_build(const dtsi_net* n, size_t max_markings, dtsi_rg** out);
DTSI_API void dtsi_rg_free(dtsi_rg* rg);
DTSI_API dtsi_status dtsi_rg_size(const dtsi_rg* rg, size_t* markings, size_t* tangible);
DTSI_API dtsi_status dtsi_rg_export(const dtsi_rg* rg, dtsi_format fmt, char** out);
/* message is NULL when both checks pass. */
DTSI_API dtsi_status dtsi_rg_check(const dtsi_rg* rg, int* safe, int* clean, char** message);
/* mapping: JSON array, entry k is the marking matched with state k+1 (1-based). */
DTSI_API dtsi_status dtsi_check_iso(const dtsi_ts* ts, const dtsi_rg* rg, double tol, int* isomorphic, char** mapping);

/* ---- analysis ---- */
DTSI_API dtsi_status dtsi_solve(const dtsi_ts* ts, dtsi_solution** out);
DTSI_API dtsi_status dtsi_quotient_build(const dtsi_ts* ts, double tol, dtsi_quotient** out);
DTSI_API void dtsi_quotient_free(dtsi_quotient* q);
DTSI_API dtsi_status dtsi_quotient_blocks(const dtsi_quotient* q, size_t* blocks);
/* JSON: blocks with members and arcs. CSV: state to block map. */
DTSI_API dtsi_status dtsi_quotient_export(const dtsi_quotient* q, dtsi_format fmt, char** out);
DTSI_API dtsi_status dtsi_quotient_solve(const dtsi_quotient* q, dtsi_solution** out);
DTSI_API void dtsi_solution_free(dtsi_solution* s);
DTSI_API dtsi_status dtsi_solution_size(const dtsi_solution* s, size_t* states);
/* Copies up to cap entries into buf; *n receives the full length. */
DTSI_API dtsi_status dtsi_solution_vector(const dtsi_solution* s, dtsi_vector which, double* buf, size_t cap, size_t* n);
/* Row-major; cap counts doubles. */
DTSI_API dtsi_status dtsi_solution_matrix(const dtsi_solution* s, dtsi_matrix which, double* buf, size_t cap, size_t* n);
/* Period of the embedded chain's closed class (> 1: no limiting distribution). */
DTSI_API dtsi_status dtsi_solution_period(const dtsi_solution* s, int* period);
/* JSON report or per-state CSV. */
DTSI_API dtsi_status dtsi_solution_export(const dtsi_solution* s, dtsi_format fmt, char** out);
/* expr is an index name from m (may be NULL) or an index expression. */
DTSI_API dtsi_status dtsi_solution_index(const dtsi_solution* s, const dtsi_model* m, const char* expr, double* value);
/* Probability of a derived step trace ("{a} / {b} {c}") from 1-based state. */
DTSI_API dtsi_status dtsi_solution_trace(const dtsi_solution* s, size_t state, const char* trace, double* value);

/* ---- equivalence ---- */
/* partition: JSON array of blocks over the union, states of b numbered after a. */
DTSI_API dtsi_status dtsi_equivalent(const dtsi_ts* a, const dtsi_ts* b, double tol, int* equivalent, char** partition);

#ifdef __cplusplus
}
#endif

#endif
