#ifndef PRICEDISP_H
#define PRICEDISP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum PtStatus {
  PT_STATUS_OK = 0,
  PT_STATUS_NULL_POINTER = 1,
  PT_STATUS_INVALID_ARGUMENT = 2,
  PT_STATUS_PARSE = 3,
  PT_STATUS_UNSUPPORTED = 4,
  PT_STATUS_DOMAIN = 5,
  PT_STATUS_VERIFICATION_FAILED = 6,
  PT_STATUS_IO = 7,
  PT_STATUS_PANIC = 8,
} PtStatus;

/**
 * Opaque equilibrium profile.
 */
typedef struct PtProfile PtProfile;

/**
 * Opaque consideration structure.
 */
typedef struct PtStructure PtStructure;

/**
 * Transaction-weighted statistics of one firm.
 */
typedef struct PtPassthroughSummary {
  double harmonic_b;
  double mean_paid;
  double tau_trans;
} PtPassthroughSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next `pt_*` call on the same thread.
 */
const char *pt_last_error(void);

/**
 * Binomial structure: each of `n` firms is considered independently with
 * probability `lambda`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum PtStatus pt_structure_binomial(size_t n, double lambda, struct PtStructure **out);

/**
 * Independent structure with per-firm consideration probabilities.
 *
 * # Safety
 * `lambdas` must point to `len` readable doubles; `out` must be valid for writes.
 */
enum PtStatus pt_structure_independent(const double *lambdas, size_t len, struct PtStructure **out);

/**
 * Structure from a generator string such as `spatial:n=4,k=2`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum PtStatus pt_structure_parse(const char *spec, struct PtStructure **out);

/**
 * Structure from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum PtStatus pt_structure_from_json(const char *json, struct PtStructure **out);

/**
 * # Safety
 * `s` must come from a `pt_structure_*` constructor and not be freed twice.
 */
void pt_structure_free(struct PtStructure *s);

/**
 * Solves the margin game.
 *
 * # Safety
 * `s` must be a live structure handle; `out` must be valid for writes.
 */
enum PtStatus pt_solve(const struct PtStructure *s, struct PtProfile **out);

/**
 * # Safety
 * `p` must come from [`pt_solve`] and not be freed twice.
 */
void pt_profile_free(struct PtProfile *p);

/**
 * # Safety
 * `p` must be a live profile handle; `out` must be valid for writes.
 */
enum PtStatus pt_profile_firm_count(const struct PtProfile *p, size_t *out);

/**
 * Margin quantile `μ_firm(u)`.
 *
 * # Safety
 * `p` must be a live profile handle; `out` must be valid for writes.
 */
enum PtStatus pt_profile_quantile(const struct PtProfile *p, size_t firm, double u, double *out);

/**
 * Margin CDF `F_firm(mu)`.
 *
 * # Safety
 * `p` must be a live profile handle; `out` must be valid for writes.
 */
enum PtStatus pt_profile_cdf(const struct PtProfile *p, size_t firm, double mu, double *out);

/**
 * Equilibrium profit in the margin game.
 *
 * # Safety
 * `p` must be a live profile handle; `out` must be valid for writes.
 */
enum PtStatus pt_profile_profit(const struct PtProfile *p, size_t firm, double *out);

/**
 * Profile as JSON; free the string with [`pt_string_free`].
 *
 * # Safety
 * `p` must be a live profile handle; `out` must be valid for writes.
 */
enum PtStatus pt_profile_to_json(const struct PtProfile *p, char **out);

/**
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void pt_string_free(char *s);

/**
 * Price with normalized margin `mu` at cost `c` under `demand`
 * (e.g. `linear:b=1`).
 *
 * # Safety
 * `demand` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum PtStatus pt_phi(const char *demand, double c, double mu, double *out);

/**
 * Pass-through of a fixed margin, `∂φ/∂c`.
 *
 * # Safety
 * `demand` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum PtStatus pt_phi_c(const char *demand, double c, double mu, double *out);

/**
 * Harmonic integral, mean paid price and transaction-weighted pass-through.
 *
 * # Safety
 * `p` must be a live profile handle, `demand` a NUL-terminated string and
 * `out` valid for writes.
 */
enum PtStatus pt_passthrough_summary(const struct PtProfile *p,
                                     size_t firm,
                                     const char *demand,
                                     double c,
                                     struct PtPassthroughSummary *out);

/**
 * Checks `p` for profitable deviations on a margin grid of `grid` points.
 * Returns [`PtStatus::VerificationFailed`] when the largest gain exceeds
 * `tol`; `max_gap` receives it either way.
 *
 * # Safety
 * `s` and `p` must be live handles; `max_gap` must be valid for writes.
 */
enum PtStatus pt_verify(const struct PtStructure *s,
                        const struct PtProfile *p,
                        size_t grid,
                        double tol,
                        double *max_gap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRICEDISP_H */
