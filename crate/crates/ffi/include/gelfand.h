#ifndef GELFAND_H
#define GELFAND_H

/* Generated by cbindgen from the gelfand-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GelfandStatus {
  GELFAND_STATUS_OK = 0,
  GELFAND_STATUS_NULL_POINTER = 1,
  GELFAND_STATUS_INVALID_ARGUMENT = 2,
  GELFAND_STATUS_OUTSIDE_DOMAIN = 3,
  GELFAND_STATUS_COINCIDENT_POINTS = 4,
  GELFAND_STATUS_IO = 5,
  GELFAND_STATUS_NUMERICAL = 6,
  GELFAND_STATUS_PANIC = 7,
} GelfandStatus;

/**
 * Opaque Green-function evaluator.
 */
typedef struct GelfandGreen GelfandGreen;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *gelfand_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *gelfand_version(void);

/**
 * Evaluator on the unit disk (closed forms).
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum GelfandStatus gelfand_green_new_disk(struct GelfandGreen **out);

/**
 * Evaluator on the domain described by a mesh file.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum GelfandStatus gelfand_green_new_mesh(const char *path, struct GelfandGreen **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `h` must come from a constructor above and not be used afterwards.
 */
void gelfand_green_free(struct GelfandGreen *h);

/**
 * `G(x, y)`.
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
enum GelfandStatus gelfand_green_eval(const struct GelfandGreen *h,
                                      double x1,
                                      double x2,
                                      double y1,
                                      double y2,
                                      double *out);

/**
 * Robin function `R(x)`, its gradient (2 values) and Hessian (4 values, row
 * major). `grad` and `hess` may be null.
 *
 * # Safety
 * `h` must be a live handle; non-null outputs must hold the stated lengths.
 */
enum GelfandStatus gelfand_robin(const struct GelfandGreen *h,
                                 double x1,
                                 double x2,
                                 double *value,
                                 double *grad,
                                 double *hess);

/**
 * The `m`-point Hamiltonian at `points` (`2m` values `x1, y1, …`) and,
 * when `grad` is non-null, its gradient (`2m` values).
 *
 * # Safety
 * `h` must be a live handle, `points` must hold `2m` values and non-null
 * outputs the stated lengths.
 */
enum GelfandStatus gelfand_hamiltonian(const struct GelfandGreen *h,
                                       const double *points,
                                       size_t m,
                                       double *value,
                                       double *grad);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GELFAND_H */
