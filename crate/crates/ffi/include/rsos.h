#ifndef RSOS_H
#define RSOS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

enum RsosInitKind
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  RSOS_INIT_KIND_ZERO = 0,
  RSOS_INIT_KIND_WELL = 1,
  /*
   Heights supplied in box index order.
   */
  RSOS_INIT_KIND_EXPLICIT = 2,
};
#ifndef __cplusplus
typedef int32_t RsosInitKind;
#endif // __cplusplus

enum RsosModelKind
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  RSOS_MODEL_KIND_RSOS = 0,
  RSOS_MODEL_KIND_K_RSOS = 1,
  RSOS_MODEL_KIND_BD = 2,
};
#ifndef __cplusplus
typedef int32_t RsosModelKind;
#endif // __cplusplus

enum RsosStatus
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  RSOS_STATUS_OK = 0,
  RSOS_STATUS_NULL_POINTER = 1,
  RSOS_STATUS_INVALID_ARGUMENT = 2,
  RSOS_STATUS_OUT_OF_RANGE = 3,
  RSOS_STATUS_IO = 4,
  RSOS_STATUS_PARSE = 5,
  RSOS_STATUS_UNSUPPORTED = 6,
  RSOS_STATUS_CAP_EXCEEDED = 7,
  RSOS_STATUS_PANIC = 8,
};
#ifndef __cplusplus
typedef int32_t RsosStatus;
#endif // __cplusplus

/*
 A dual process run.
 */
typedef struct RsosDualTrajectory RsosDualTrajectory;

/*
 Clock rings of one space-time box.
 */
typedef struct RsosEventSet RsosEventSet;

/*
 Heights after an evolution.
 */
typedef struct RsosField RsosField;

/*
 Update rule. `kind` holds an [`RsosModelKind`]; `k` is read only for `KRsos`.
 */
typedef struct RsosModel {
  int32_t kind;
  uint32_t k;
} RsosModel;

/*
 Starting heights. `kind` holds an [`RsosInitKind`]; `heights`/`len` are
 read only for `Explicit`.
 */
typedef struct RsosInit {
  int32_t kind;
  const int64_t *heights;
  size_t len;
} RsosInit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL after a success.
 The pointer stays valid until the next call into the library on this thread.
 */
const char *rsos_last_error(void);

/*
 Library version as a static nul-terminated string.
 */
const char *rsos_version(void);

/*
 # Safety
 `s` must be NULL or a string returned by this library and not yet freed.
 */
void rsos_string_free(char *s);

/*
 Samples the clock rings of `[-radius, radius]^dim × (0, horizon)`.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
RsosStatus rsos_event_set_generate(size_t dim,
                                   int32_t radius,
                                   double horizon,
                                   double rate,
                                   bool periodic,
                                   uint64_t seed,
                                   struct RsosEventSet **out);

/*
 Samples rings on the box a dual run up to `until` needs by default.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
RsosStatus rsos_event_set_generate_for_dual(size_t dim,
                                            double until,
                                            uint64_t seed,
                                            struct RsosEventSet **out);

/*
 # Safety
 `set` must be NULL or a handle from this library that has not been freed.
 */
void rsos_event_set_free(struct RsosEventSet *set);

/*
 Number of rings, or 0 for a NULL handle.

 # Safety
 `set` must be NULL or a live handle.
 */
size_t rsos_event_set_len(const struct RsosEventSet *set);

/*
 Time reversal `t -> T - t`; a new handle.

 # Safety
 `set` must be a live handle and `out` writable.
 */
RsosStatus rsos_event_set_reverse(const struct RsosEventSet *set, struct RsosEventSet **out);

/*
 Serializes the rings as JSONL into a new string.

 # Safety
 `set` must be a live handle and `out` writable.
 */
RsosStatus rsos_event_set_to_jsonl(const struct RsosEventSet *set, char **out);

/*
 # Safety
 `text` must be a nul-terminated string and `out` writable.
 */
RsosStatus rsos_event_set_from_jsonl(const char *text, struct RsosEventSet **out);

/*
 Runs the forward dynamics up to `until`.

 # Safety
 `set` must be a live handle, `init.heights` must point to `init.len`
 values when the kind is explicit, and `out` must be writable.
 */
RsosStatus rsos_evolve(const struct RsosEventSet *set,
                       struct RsosModel model,
                       struct RsosInit init,
                       double until,
                       struct RsosField **out);

/*
 # Safety
 `field` must be NULL or a handle that has not been freed.
 */
void rsos_field_free(struct RsosField *field);

/*
 Number of sites, or 0 for a NULL handle.

 # Safety
 `field` must be NULL or a live handle.
 */
size_t rsos_field_len(const struct RsosField *field);

/*
 Copies all heights in box index order. `cap` must be at least
 [`rsos_field_len`].

 # Safety
 `field` must be a live handle and `buf` must hold `cap` values.
 */
RsosStatus rsos_field_heights(const struct RsosField *field, int64_t *buf, size_t cap);

/*
 Height at the site with `dim` coordinates.

 # Safety
 `field` must be a live handle, `coords` must hold `dim` values and `out`
 must be writable.
 */
RsosStatus rsos_field_height_at(const struct RsosField *field,
                                const int32_t *coords,
                                size_t dim,
                                int64_t *out);

/*
 Optimal path value at `(t, x)` over paths ending at `end_time`.
 `out_exact` receives whether the box certifies the value.

 # Safety
 `set` must be a live handle, `coords` must hold `dim` values, the init
 must be valid as for [`rsos_evolve`] and both outputs must be writable.
 */
RsosStatus rsos_min_weight(const struct RsosEventSet *set,
                           double t,
                           const int32_t *coords,
                           size_t dim,
                           struct RsosInit init,
                           double end_time,
                           struct RsosModel model,
                           int64_t *out_value,
                           bool *out_exact);

/*
 Runs the dual process from the well at the origin up to `until`.

 # Safety
 `set` must be a live handle and `out` writable.
 */
RsosStatus rsos_dual_run(const struct RsosEventSet *set,
                         double until,
                         struct RsosDualTrajectory **out);

/*
 # Safety
 `traj` must be NULL or a handle that has not been freed.
 */
void rsos_dual_free(struct RsosDualTrajectory *traj);

/*
 Minimum of the dual surface at the end of the run.

 # Safety
 `traj` must be a live handle and `out` writable.
 */
RsosStatus rsos_dual_final_min(const struct RsosDualTrajectory *traj, int64_t *out);

/*
 Minimum of the dual surface at time `t`.

 # Safety
 `traj` must be a live handle and `out` writable.
 */
RsosStatus rsos_dual_min_at(const struct RsosDualTrajectory *traj, double t, int64_t *out);

/*
 Time at which the minimum first reaches `u`. `OutOfRange` when the run
 ended first.

 # Safety
 `traj` must be a live handle and `out` writable.
 */
RsosStatus rsos_dual_hitting_time(const struct RsosDualTrajectory *traj, uint64_t u, double *out);

/*
 Whether the run never touched a face of its box.

 # Safety
 `traj` must be a live handle and `out` writable.
 */
RsosStatus rsos_dual_exact(const struct RsosDualTrajectory *traj, bool *out);

/*
 Runs an experiment from `key = value` configuration text. The text must
 name the experiment. With `write_outputs` the report files and manifest
 land in the configured output directory. `out_json`, when not NULL,
 receives the report as a JSON string.

 # Safety
 `config_text` must be a nul-terminated string, `out_passed` writable and
 `out_json` NULL or writable.
 */
RsosStatus rsos_experiment_run(const char *config_text,
                               size_t jobs,
                               bool write_outputs,
                               bool *out_passed,
                               char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RSOS_H */
