#ifndef FPP_H
#define FPP_H

#include <stddef.h>
#include <stdint.h>

typedef enum FppStatus {
  FPP_STATUS_OK = 0,
  FPP_STATUS_NULL_POINTER = 1,
  FPP_STATUS_INVALID_ARGUMENT = 2,
  FPP_STATUS_NO_SOLUTION = 3,
  FPP_STATUS_BUDGET_EXCEEDED = 4,
  FPP_STATUS_RESOURCE = 5,
  FPP_STATUS_IO = 6,
  FPP_STATUS_INVALID_CONFIG = 7,
  FPP_STATUS_OUT_OF_RANGE = 8,
  FPP_STATUS_PANIC = 9,
} FppStatus;

/*
 A weight law.
 */
typedef struct FppDistribution FppDistribution;

/*
 A configured batch of trials and, once run, its records.
 */
typedef struct FppExperiment FppExperiment;

/*
 A weighted graph on vertices `0..n`.
 */
typedef struct FppGraph FppGraph;

/*
 Points of the extremal process inside a window.
 */
typedef struct FppPointSet FppPointSet;

typedef struct FppConstants {
  double lambda;
  double alpha;
  double gamma;
  double beta;
  double s_star;
  double alpha_prime;
} FppConstants;

/*
 One point: raw weight and hopcount, rescaled `(x, h)`.
 */
typedef struct FppPoint {
  double weight;
  uint64_t hops;
  double x;
  double h;
} FppPoint;

/*
 Numeric view of a trial record. Verdicts: 0 holds, 1 violated,
 2 unverified. `has_star` is 0 when `x_star`/`h_star` are absent (NaN).
 */
typedef struct FppTrialRecord {
  uint64_t trial_index;
  uint64_t seed;
  uint8_t budget_exceeded;
  uint8_t g1;
  uint8_t g2;
  uint8_t g3;
  uint8_t g_all;
  uint8_t unverified_tail;
  uint8_t has_star;
  double w_r;
  double wt_r;
  uint64_t count_in_window;
  double x_star;
  double h_star;
  double conditional_intensity_approx;
  uint64_t nodes_expanded;
} FppTrialRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *fpp_last_error_message(void);

/*
 Parses `exponential(r)`, `gaussian(m,v)`, `uniform(a,b)` or
 `shifted_exponential(r,s)`.

 # Safety
 `spec` must be a NUL-terminated string; `out` must be writable.
 */
enum FppStatus fpp_distribution_parse(const char *spec, struct FppDistribution **out);

/*
 # Safety
 `dist` must come from [`fpp_distribution_parse`] and not be used again.
 */
void fpp_distribution_free(struct FppDistribution *dist);

/*
 # Safety
 `dist` must be a live handle; `out` must be writable.
 */
enum FppStatus fpp_constants_derive(const struct FppDistribution *dist,
                                    double lambda,
                                    struct FppConstants *out);

/*
 `Lambda(window) = gamma (e^{alpha x_hi} - e^{alpha x_lo}) (Phi(h_hi) - Phi(h_lo))`.
 Infinite bounds are passed as `+-INFINITY`.

 # Safety
 `consts` must be readable; `out` must be writable.
 */
enum FppStatus fpp_intensity_mass(const struct FppConstants *consts,
                                  double x_lo,
                                  double x_hi,
                                  double h_lo,
                                  double h_hi,
                                  double *out);

/*
 Monte Carlo renewal function `V(x)` with its standard error.

 # Safety
 Handles must be live; `value` and `stderr` must be writable.
 */
enum FppStatus fpp_renewal_estimate(const struct FppDistribution *dist,
                                    const struct FppConstants *consts,
                                    double x,
                                    size_t replications,
                                    uint64_t seed,
                                    double *value,
                                    double *stderr);

/*
 Samples `G(n, lambda/n)` with i.i.d. weights.

 # Safety
 `dist` must be live; `out` must be writable.
 */
enum FppStatus fpp_graph_generate(size_t n,
                                  double lambda,
                                  const struct FppDistribution *dist,
                                  uint64_t seed,
                                  struct FppGraph **out);

/*
 Builds a graph from `m` undirected edges `(us[i], vs[i], ws[i])`.

 # Safety
 The three arrays must hold `m` elements; `out` must be writable.
 */
enum FppStatus fpp_graph_from_edges(size_t n,
                                    const size_t *us,
                                    const size_t *vs,
                                    const double *ws,
                                    size_t m,
                                    struct FppGraph **out);

/*
 # Safety
 `graph` must be a live handle or null.
 */
void fpp_graph_free(struct FppGraph *graph);

/*
 # Safety
 `graph` must be live; outputs must be writable.
 */
enum FppStatus fpp_graph_size(const struct FppGraph *graph, size_t *vertices, size_t *edges);

/*
 Enumerates every simple `0 -> n-1` path whose rescaled point falls in the
 window, with at most `hop_cap` hops.

 # Safety
 Handles must be live; `out` must be writable.
 */
enum FppStatus fpp_enumerate_extremal(const struct FppGraph *graph,
                                      const struct FppConstants *consts,
                                      double x_lo,
                                      double x_hi,
                                      double h_lo,
                                      double h_hi,
                                      size_t hop_cap,
                                      struct FppPointSet **out);

/*
 # Safety
 `points` must be live; `len` must be writable.
 */
enum FppStatus fpp_points_len(const struct FppPointSet *points, size_t *len);

/*
 # Safety
 `points` must be live; `out` must be writable.
 */
enum FppStatus fpp_points_get(const struct FppPointSet *points, size_t index, struct FppPoint *out);

/*
 # Safety
 `points` must be a live handle or null.
 */
void fpp_points_free(struct FppPointSet *points);

/*
 Chen-Stein bound for `m` indicators with success probabilities `p`.
 Neighborhoods are given in compressed rows: the neighbors of `i` are
 `indices[offsets[i]..offsets[i+1]]`, with `E[X_i X_j chi]` in the same
 slots of `pair_terms`. `offsets` holds `m + 1` entries.

 # Safety
 Arrays must hold the stated number of elements; `out` must be writable.
 */
enum FppStatus fpp_stein_bound(size_t m,
                               const double *p,
                               const size_t *offsets,
                               const size_t *indices,
                               const double *pair_terms,
                               double chi_zero_prob,
                               double *out);

/*
 One draw of the additive martingale `W_depth` of the branching random walk.

 # Safety
 `dist` must be live; `out` must be writable.
 */
enum FppStatus fpp_simulate_w(const struct FppDistribution *dist,
                              double lambda,
                              size_t depth,
                              uint64_t seed,
                              double *out);

/*
 Extinction probability of a Galton-Watson tree with Poisson(`lambda`)
 offspring, `lambda > 1`.

 # Safety
 `out` must be writable.
 */
enum FppStatus fpp_extinction_probability(double lambda, double *out);

/*
 Creates an experiment from config text (`key = value` lines).

 # Safety
 `text` must be a NUL-terminated string; `out` must be writable.
 */
enum FppStatus fpp_experiment_new(const char *text, struct FppExperiment **out);

/*
 Creates an experiment from a config file.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum FppStatus fpp_experiment_load(const char *path, struct FppExperiment **out);

/*
 Sets the worker count (0 restores the default pool).

 # Safety
 `exp` must be live.
 */
enum FppStatus fpp_experiment_set_workers(struct FppExperiment *exp, size_t workers);

/*
 Runs every trial, replacing earlier records.

 # Safety
 `exp` must be live and not shared across threads during the call.
 */
enum FppStatus fpp_experiment_run(struct FppExperiment *exp);

/*
 # Safety
 `exp` must be live; `len` must be writable.
 */
enum FppStatus fpp_experiment_record_count(const struct FppExperiment *exp, size_t *len);

/*
 # Safety
 `exp` must be live; `out` must be writable.
 */
enum FppStatus fpp_experiment_record(const struct FppExperiment *exp,
                                     size_t index,
                                     struct FppTrialRecord *out);

/*
 Writes the records as CSV (`jsonl == 0`) or JSON lines.

 # Safety
 `exp` must be live; `path` must be a NUL-terminated string.
 */
enum FppStatus fpp_experiment_write(const struct FppExperiment *exp,
                                    const char *path,
                                    uint8_t jsonl);

/*
 # Safety
 `exp` must be a live handle or null.
 */
void fpp_experiment_free(struct FppExperiment *exp);

/*
 Library version, a static NUL-terminated string.
 */
const char *fpp_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FPP_H */
