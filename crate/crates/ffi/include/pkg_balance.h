#ifndef PKG_BALANCE_H
#define PKG_BALANCE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum PkgbStatus {
  PKGB_STATUS_OK = 0,
  // A required pointer argument was null.
  PKGB_STATUS_NULL_POINTER = 1,
  // Arguments were rejected, e.g. zero workers or an unknown policy.
  PKGB_STATUS_INVALID_ARGUMENT = 2,
  // A workload file could not be read or parsed.
  PKGB_STATUS_IO = 3,
  // The call panicked; the handle involved should be freed.
  PKGB_STATUS_PANIC = 4,
} PkgbStatus;

// Opaque routing state: true loads, partitioners and load estimates.
typedef struct PkgbRouter PkgbRouter;

// Summary of a simulation run.
typedef struct PkgbSummary {
  uint64_t messages;
  double avg_imbalance;
  double normalized_avg;
  double final_imbalance;
  uint64_t max_load;
} PkgbSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread, or null after a
// successful call. The pointer stays valid until the next call on the same
// thread.
const char *pkgb_last_error(void);

// Library version as a static NUL-terminated string.
const char *pkgb_version(void);

// Creates a router.
//
// `partitioner` is one of `kg`, `sg`, `potc`, `ongreedy`, `pkg`. `estimation`
// (`global`, `local`, `probing:N`) applies to `pkg` only and may be null.
// `split` (`shuffle`, `keyed`) may be null for shuffle.
//
// # Safety
// String arguments must be null or NUL-terminated; `out` must be writable.
enum PkgbStatus pkgb_router_new(size_t workers,
                                size_t sources,
                                size_t choices,
                                uint64_t seed,
                                const char *partitioner,
                                const char *estimation,
                                const char *split,
                                struct PkgbRouter **out);

// Releases a router. Null is ignored.
//
// # Safety
// `router` must come from [`pkgb_router_new`] and not be used afterwards.
void pkgb_router_free(struct PkgbRouter *router);

// Routes the next message with `key`. The message's timestamp is the number
// of messages routed so far, which picks its source under the configured
// split. Either output pointer may be null.
//
// # Safety
// `router` must be a live handle; non-null outputs must be writable.
enum PkgbStatus pkgb_router_route(struct PkgbRouter *router,
                                  uint64_t key,
                                  size_t *out_source,
                                  size_t *out_worker);

// Routes one message with `key` through an explicit `source`.
//
// # Safety
// `router` must be a live handle; `out_worker` may be null or writable.
enum PkgbStatus pkgb_router_route_from(struct PkgbRouter *router,
                                       size_t source,
                                       uint64_t key,
                                       size_t *out_worker);

// Number of workers of the router.
//
// # Safety
// `router` must be a live handle; `out` must be writable.
enum PkgbStatus pkgb_router_workers(const struct PkgbRouter *router, size_t *out);

// Copies the true worker loads into `buf`, which must hold at least as many
// entries as there are workers.
//
// # Safety
// `router` must be a live handle; `buf` must be writable for `len` entries.
enum PkgbStatus pkgb_router_loads(const struct PkgbRouter *router, uint64_t *buf, size_t len);

// Current imbalance `max - mean` of the router's true loads.
//
// # Safety
// `router` must be a live handle; `out` must be writable.
enum PkgbStatus pkgb_router_imbalance(const struct PkgbRouter *router, double *out);

// Imbalance `max - mean` of `len` load counters.
//
// # Safety
// `loads` must be readable for `len` entries; `out` must be writable.
enum PkgbStatus pkgb_imbalance(const uint64_t *loads, size_t len, double *out);

// Runs a whole simulation over a synthetic workload spec such as
// `lognormal:1.789,2.366,16384,1000000`, seeded by `seed` for both the
// workload and the hash functions.
//
// # Safety
// String arguments must be null or NUL-terminated; `out` must be writable.
enum PkgbStatus pkgb_simulate(const char *workload,
                              size_t workers,
                              size_t sources,
                              size_t choices,
                              uint64_t seed,
                              const char *partitioner,
                              const char *estimation,
                              const char *split,
                              struct PkgbSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PKG_BALANCE_H */
