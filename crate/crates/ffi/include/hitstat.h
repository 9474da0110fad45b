#ifndef HITSTAT_H
#define HITSTAT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum HsStatus {
  HS_STATUS_OK = 0,
  HS_STATUS_INVALID_ARGUMENT = 1,
  HS_STATUS_HYPOTHESIS_VIOLATED = 2,
  HS_STATUS_INSUFFICIENT_DATA = 3,
  HS_STATUS_HORIZON_EXCEEDED = 4,
  HS_STATUS_NULL_POINTER = 5,
  HS_STATUS_IO = 6,
  HS_STATUS_PANIC = 7,
} HsStatus;

typedef enum HsSystemKind {
  HS_SYSTEM_KIND_DOUBLING = 0,
  HS_SYSTEM_KIND_CAT_MAP = 1,
  HS_SYSTEM_KIND_INTERMITTENT = 2,
  HS_SYSTEM_KIND_GAUSS = 3,
} HsSystemKind;

typedef enum HsVerdict {
  HS_VERDICT_INTERSECTS = 0,
  HS_VERDICT_DISJOINT = 1,
  HS_VERDICT_UNKNOWN = 2,
} HsVerdict;

// Opaque system handle.
typedef struct HsSystem HsSystem;

// Opaque tower handle.
typedef struct HsTower HsTower;

typedef struct HsVEstimate {
  double lower;
  double upper;
  double se;
  uint64_t samples;
  uint64_t intersects;
  uint64_t unknown;
} HsVEstimate;

typedef struct HsChenStein {
  double eps;
  uint64_t n;
  double t;
  uint64_t p;
  double r1;
  double r2;
  double bound_per_k;
} HsChenStein;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread (NUL-terminated) into `buf`
// and returns its length without the terminator; 0 when there is none.
// Passing a null `buf` or `len = 0` only queries the length.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
uintptr_t hs_last_error_message(char *buf, uintptr_t len);

// Library version as a static NUL-terminated string.
const char *hs_version(void);

// Creates a system; `alpha` is read only for the intermittent map.
//
// # Safety
// `out_system` must be valid for writes.
enum HsStatus hs_system_new(enum HsSystemKind kind, double alpha, struct HsSystem **out_system);

// # Safety
// `system` must come from [`hs_system_new`] and not be used afterwards.
void hs_system_free(struct HsSystem *system);

// Default horizon constant `1 / (4 ln A)` of the system.
//
// # Safety
// `system` must be a live handle; `out_a` valid for writes.
enum HsStatus hs_system_default_a_frak(const struct HsSystem *system, double *out_a);

// Very-short-return verdict for the ball `B_rho((x, y))`; `y` is ignored
// by 1D systems. `out_witness` receives the first intersecting iterate
// (0 when none).
//
// # Safety
// `system` must be a live handle; out-pointers valid for writes.
enum HsStatus hs_short_return_verdict(const struct HsSystem *system,
                                      double x,
                                      double y,
                                      double rho,
                                      double a_frak,
                                      enum HsVerdict *out_verdict,
                                      uint32_t *out_witness);

// Monte Carlo bounds on the measure of very-short-return centers.
//
// # Safety
// `system` must be a live handle; `out_estimate` valid for writes.
enum HsStatus hs_estimate_v_measure(const struct HsSystem *system,
                                    double rho,
                                    double a_frak,
                                    uint64_t samples,
                                    uint64_t seed,
                                    struct HsVEstimate *out_estimate);

// Builds a tower with `m(R = k) ∝ k^{-(lambda+1)}`, `k = 1..=max_r`.
//
// # Safety
// `out_tower` must be valid for writes.
enum HsStatus hs_tower_build(double lambda,
                             uint32_t max_r,
                             uint32_t beams_per_height,
                             struct HsTower **out_tower);

// # Safety
// `tower` must come from [`hs_tower_build`] and not be used afterwards.
void hs_tower_free(struct HsTower *tower);

// `Ω(s)`.
//
// # Safety
// `tower` must be a live handle; `out_omega` valid for writes.
enum HsStatus hs_tower_omega(const struct HsTower *tower, uint32_t s, double *out_omega);

// Log-log slope of `Ω` over the default grid `[4, max_r / 10]`.
//
// # Safety
// `tower` must be a live handle; `out_slope` valid for writes.
enum HsStatus hs_tower_omega_slope(const struct HsTower *tower, double *out_slope);

// `m(R > k)`.
//
// # Safety
// `tower` must be a live handle; `out_mass` valid for writes.
enum HsStatus hs_tower_tail_mass(const struct HsTower *tower, uint32_t k, double *out_mass);

// `e^{-t} t^k / k!`; NaN when `t` is negative or not finite.
double hs_poisson_pmf(double t, uint64_t k);

// Exact `Σ_k |Bin(N, t/N){k} − Poi(t){k}|` and the bound `2t²/N`.
//
// # Safety
// Out-pointers must be valid for writes.
enum HsStatus hs_binomial_poisson_tv(uint64_t n, double t, double *out_exact, double *out_bound);

// Chen–Stein quantities of the stationary two-state chain with transition
// matrix `transition` (row-major `p00, p01, p10, p11`), with `N = ⌊t/ε⌋`.
//
// # Safety
// `transition` must point to 4 doubles; `out_report` valid for writes.
enum HsStatus hs_chen_stein_markov(const double *transition,
                                   double t,
                                   uint64_t p,
                                   struct HsChenStein *out_report);

// `6t·e_size·(N(R₁+R₂) + pε) + 2t²/N` for the inputs in `report`.
//
// # Safety
// `report` must be readable; `out_bound` valid for writes.
enum HsStatus hs_chen_stein_bound(const struct HsChenStein *report,
                                  uint64_t e_size,
                                  double *out_bound);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HITSTAT_H */
