/* shufflehist C API. Generated by cbindgen; do not edit. */

#ifndef SHUFFLEHIST_H
#define SHUFFLEHIST_H

/* This file is auto-generated from the shufflehist-ffi crate. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes for every API call.
typedef enum ShStatus {
  SH_STATUS_OK = 0,
  SH_STATUS_NULL_ARGUMENT = 1,
  // An argument violated a structural precondition.
  SH_STATUS_DOMAIN = 2,
  // No valid protocol configuration exists for the requested parameters.
  SH_STATUS_INFEASIBLE = 3,
  // Parameters fall outside the analyzed regime.
  SH_STATUS_OUT_OF_REGIME = 4,
  // A resource cap (enumeration size, memory budget) was exceeded.
  SH_STATUS_RESOURCE = 5,
  SH_STATUS_IO = 6,
  SH_STATUS_PARSE = 7,
} ShStatus;

// An input dataset: `n` items, each a bin id in `[1, d]`.
typedef struct ShDataset ShDataset;

// De-biased frequency estimates from one protocol execution.
typedef struct ShEstimate ShEstimate;

// A solved protocol configuration.
typedef struct ShSolvedParams {
  // Fabricated messages per user.
  uint32_t k;
  // Flip probability (max of the privacy root and the concentration floor).
  double q;
  // Root of the privacy quadratic.
  double q_hat;
  // Concentration floor.
  double q_tilde;
  // De-bias factor 1/(1-2q).
  double scale;
  // 90%-confidence error bound for the requested mode.
  double bound;
} ShSolvedParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Create a dataset of `n` i.i.d. draws from Zipf(`s`) truncated to `[1, d]`,
// deterministic in `seed`. On success writes a handle the caller must
// release with `sh_dataset_free`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one pointer.
enum ShStatus sh_dataset_zipf(uintptr_t n,
                              uintptr_t d,
                              double s,
                              uint64_t seed,
                              struct ShDataset **out);

// Create a dataset from `len` bin ids in `[1, d]`.
//
// # Safety
// `items` must point to `len` readable `uint32_t`s; `out` as above.
enum ShStatus sh_dataset_from_items(const uint32_t *items,
                                    uintptr_t len,
                                    uintptr_t d,
                                    struct ShDataset **out);

// Number of users in the dataset; 0 for NULL.
//
// # Safety
// `ds` must be NULL or a live handle from a dataset constructor.
uintptr_t sh_dataset_len(const struct ShDataset *ds);

// Release a dataset handle. NULL is a no-op.
//
// # Safety
// `ds` must be NULL or a handle not yet freed.
void sh_dataset_free(struct ShDataset *ds);

// Smallest feasible number of fabricated messages per user for the budget.
// `max_mode` selects the maximum-error schedule over `d` bins; otherwise the
// per-bin schedule is used and `d` is ignored.
//
// # Safety
// `out_k` must point to writable storage for one `uint32_t`.
enum ShStatus sh_min_k(double eps,
                       double delta,
                       uintptr_t n,
                       bool max_mode,
                       uintptr_t d,
                       uint32_t *out_k);

// Solve the flip probability and error bound; `k = 0` requests the smallest
// feasible value.
//
// # Safety
// `out` must point to writable storage for one `ShSolvedParams`.
enum ShStatus sh_solve_params(double eps,
                              double delta,
                              uintptr_t n,
                              uint32_t k,
                              bool max_mode,
                              uintptr_t d,
                              struct ShSolvedParams *out);

// Run the bit-flip protocol (index-list pipeline, maximum-error schedule)
// on the dataset; `k = 0` requests the smallest feasible value. On success
// writes an estimate handle the caller must release with
// `sh_estimate_free`.
//
// # Safety
// `ds` must be a live dataset handle; `out` as in the constructors.
enum ShStatus sh_run_flip(const struct ShDataset *ds,
                          double eps,
                          double delta,
                          uint32_t k,
                          uint64_t seed,
                          struct ShEstimate **out);

// Number of bins in the estimate; 0 for NULL.
//
// # Safety
// `est` must be NULL or a live estimate handle.
uintptr_t sh_estimate_len(const struct ShEstimate *est);

// Copy the `d` per-bin estimates into `out` (which must hold `len >= d`
// doubles).
//
// # Safety
// `est` must be a live estimate handle; `out` must point to `len` writable
// doubles.
enum ShStatus sh_estimate_values(const struct ShEstimate *est, double *out, uintptr_t len);

// Largest absolute deviation of the estimate from the dataset's exact
// histogram.
//
// # Safety
// `est` and `ds` must be live handles; `out` must be writable.
enum ShStatus sh_estimate_max_error(const struct ShEstimate *est,
                                    const struct ShDataset *ds,
                                    double *out);

// Release an estimate handle. NULL is a no-op.
//
// # Safety
// `est` must be NULL or a handle not yet freed.
void sh_estimate_free(struct ShEstimate *est);

// Tight additive privacy slack of the reduced two-bit mechanism at level
// `eps`, by exact enumeration (`m` capped at `cap`; pass 0 for the default
// cap of 200).
//
// # Safety
// `out_delta` must be writable.
enum ShStatus sh_audit_reduced_mechanism(uint64_t m,
                                         double q,
                                         double eps,
                                         uintptr_t cap,
                                         double *out_delta);

// The 90%-confidence top-t approximation gap at the given parameters.
//
// # Safety
// `out` must be writable.
enum ShStatus sh_top_t_alpha_bound(uintptr_t n, uint32_t k, double q, uintptr_t d, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHUFFLEHIST_H */
