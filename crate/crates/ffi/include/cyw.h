#ifndef CYW_H
#define CYW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Boundary treatment for operator queries.
typedef enum CywBoundary {
  CYW_BOUNDARY_CLOSED = 0,
  CYW_BOUNDARY_ROBIN = 1,
} CywBoundary;

// Status codes. Values 2 to 6 agree with the exit codes of the `cyw` binary.
typedef enum CywStatus {
  CYW_STATUS_OK = 0,
  CYW_STATUS_NULL_POINTER = 1,
  CYW_STATUS_CONFIG = 2,
  CYW_STATUS_OBSTRUCTION = 3,
  CYW_STATUS_GATE = 4,
  CYW_STATUS_ITERATION = 5,
  CYW_STATUS_VERIFICATION = 6,
  CYW_STATUS_BUFFER_TOO_SMALL = 7,
  CYW_STATUS_PANIC = 8,
} CywStatus;

// Outcome of the antipodal condition check.
typedef enum CywVerdict {
  CYW_VERDICT_PASS_I = 0,
  CYW_VERDICT_PASS_II = 1,
  CYW_VERDICT_PASS_III = 2,
  CYW_VERDICT_FAIL = 3,
} CywVerdict;

// A preset mesh with its background metric.
typedef struct CywMesh CywMesh;

// A finished configured run, successful or not.
typedef struct CywRun CywRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *cyw_last_error(void);

// # Safety
// `s` must come from this library and not have been freed.
void cyw_string_free(char *s);

// Builds a preset (`round-s3`, `flat-t3`, `ball-negR`, `annulus`, `bump-t3`).
//
// # Safety
// `preset` must be a NUL-terminated string and `out` a writable pointer.
enum CywStatus cyw_mesh_new_preset(const char *preset, uint32_t refinement, struct CywMesh **out);

// # Safety
// `mesh` must be NULL or a live handle.
void cyw_mesh_free(struct CywMesh *mesh);

// Number of vertices, 0 for NULL.
//
// # Safety
// `mesh` must be NULL or a live handle.
size_t cyw_mesh_vertex_count(const struct CywMesh *mesh);

// Chart coordinates of vertex `index` (three doubles, four on the sphere
// preset) into `coords`, which holds `len` doubles. `written` receives the
// coordinate count.
//
// # Safety
// `mesh` must be live, `coords` must hold `len` doubles and `written` must
// be writable.
enum CywStatus cyw_mesh_vertex(const struct CywMesh *mesh,
                               size_t index,
                               double *coords,
                               size_t len,
                               size_t *written);

// First eigenvalue of the conformal Laplacian. When `eigenfunction` is not
// NULL it receives the positive, mass-normalized eigenvector and must hold
// `len ≥ vertex count` doubles.
//
// # Safety
// `mesh` must be live, `eigenvalue` writable, `eigenfunction` NULL or
// holding `len` doubles.
enum CywStatus cyw_first_eigenpair(const struct CywMesh *mesh,
                                   enum CywBoundary bc,
                                   double *eigenvalue,
                                   double *eigenfunction,
                                   size_t len);

// Discrete Yamabe quotient of `u` (`len` must equal the vertex count).
//
// # Safety
// `mesh` must be live, `u` must hold `len` doubles, `quotient` writable.
enum CywStatus cyw_yamabe_quotient(const struct CywMesh *mesh,
                                   enum CywBoundary bc,
                                   const double *u,
                                   size_t len,
                                   double *quotient);

// Checks the antipodal condition for an expression in `x0..x3`, `tau`,
// `xi` on the round-sphere preset at `refinement`. A failed condition is a
// successful call with `CYW_VERDICT_FAIL`.
//
// # Safety
// `expression` must be a NUL-terminated string and `verdict` writable.
enum CywStatus cyw_check_condition_a(const char *expression,
                                     uint32_t refinement,
                                     enum CywVerdict *verdict);

// Runs the pipeline on a configuration file's text. The return value is
// the run's status; `out` receives a handle whenever a report exists, even
// on failure, so partial reports stay inspectable. Nothing is written to
// disk.
//
// # Safety
// `config` must be a NUL-terminated string and `out` writable.
enum CywStatus cyw_run_config(const char *config, struct CywRun **out);

// # Safety
// `run` must be NULL or a live handle.
void cyw_run_free(struct CywRun *run);

// Whether the run produced a verified solution. False for NULL.
//
// # Safety
// `run` must be NULL or a live handle.
bool cyw_run_accepted(const struct CywRun *run);

// Report text without a timestamp line; free with [`cyw_string_free`].
// NULL for a NULL handle.
//
// # Safety
// `run` must be NULL or a live handle.
char *cyw_run_report(const struct CywRun *run);

// Copies the solution `u` into `values` (holding `len` doubles). `written`
// receives the vertex count, or 0 when the run has no solution.
//
// # Safety
// `run` must be live, `values` must hold `len` doubles, `written` writable.
enum CywStatus cyw_run_solution(const struct CywRun *run,
                                double *values,
                                size_t len,
                                size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CYW_H */
