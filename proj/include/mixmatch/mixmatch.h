/* mixmatch: budgeted search for a training-source mixture.
 *
 * C interface over the C++ core. All functions are thread-compatible: two
 * threads may work on distinct handles concurrently, but a single handle
 * needs external synchronization. Every function that can fail returns an
 * mm_status; mm_last_error() describes the most recent failure on the
 * calling thread.
 *
 * Strings are NUL-terminated UTF-8. Paths are passed straight to the host
 * filesystem. Output CSV files are byte-identical across repeated runs with
 * the same inputs and seeds.
 */
#ifndef MIXMATCH_H
#define MIXMATCH_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define MM_API __declspec(dllexport)
#else
#define MM_API __attribute__((visibility("default")))
#endif

typedef enum mm_status {
  MM_OK = 0,
  MM_ERR_INVALID_ARGUMENT = 1, /* bad parameter or malformed config */
  MM_ERR_IO = 2,               /* filesystem or other environment failure */
  MM_ERR_NUMERIC = 3,          /* non-finite values during optimization */
  MM_ERR_CHECK_FAILED = 4      /* a verification run found violations */
} mm_status;

MM_API const char* mm_version(void);

/* Message for the calling thread's most recent error; empty string if none. */
MM_API const char* mm_last_error(void);

/* ------------------------------------------------------------------ suite */

/* A suite bundles K training sources, a validation set, a test target, and
 * the derived smoothness/noise constants. Configs are key = value files;
 * `kind = synthetic` describes generators, `kind = ingest` points at a CSV
 * whose rows are split per source into train/validate/test/discard slices. */
typedef struct mm_suite mm_suite;

MM_API mm_status mm_suite_open(const char* config_path, mm_suite** out);
MM_API void mm_suite_close(mm_suite* suite);

MM_API int mm_suite_num_sources(const mm_suite* suite);
MM_API int mm_suite_model_dim(const mm_suite* suite);

/* One-row CSV of the suite constants:
 * mu,beta,L,gcal,sigma,nu1,nu2,rho,rho2 */
MM_API mm_status mm_suite_write_manifest(const mm_suite* suite,
                                         const char* csv_path);

/* ----------------------------------------------------------------- search */

typedef struct mm_search_result mm_search_result;

/* Optimistic tree search over the mixture simplex under a total SGD-step
 * budget. Every expansion splits a cell and trains one model per child,
 * warm-started from the parent. strategy is "bisect" (longest-edge
 * bisection) or "coordhalf"; schedule is "theoretical", "theoretical:<E>",
 * or "practical:<eta>". Pass nu2 <= 0 or rho2 <= 0 to use the suite's
 * certified constants. widen_final_pool != 0 selects the answer among all
 * leaves instead of only the deepest level. */
MM_API mm_status mm_search_run(const mm_suite* suite, uint64_t budget,
                               uint64_t node_steps, const char* strategy,
                               uint64_t strategy_seed, const char* schedule,
                               double nu2, double rho2, uint64_t seed,
                               int widen_final_pool, mm_search_result** out);

MM_API int mm_search_result_num_sources(const mm_search_result* result);
/* Copies the chosen mixture into buf (cap >= num_sources). */
MM_API mm_status mm_search_result_alpha(const mm_search_result* result,
                                        double* buf, int cap);
MM_API int mm_search_result_height(const mm_search_result* result);
MM_API uint64_t mm_search_result_total_steps(const mm_search_result* result);
MM_API uint64_t mm_search_result_node_count(const mm_search_result* result);

/* Writes search.csv (the audit trail: one row per trained node, in training
 * order) and result.csv (the returned mixture; the regret column is filled
 * only for suites with a closed-form optimum) under out_dir. */
MM_API mm_status mm_search_write_outputs(const mm_suite* suite,
                                         const mm_search_result* result,
                                         const char* out_dir);
MM_API void mm_search_result_close(mm_search_result* result);

/* -------------------------------------------------------------- baselines */

/* kind: "genie" (train on the suite's known best mixture), "uniform",
 * "validation" (SGD on validation rows only), or "only:<i>" (1-based source
 * index). Spends exactly `budget` steps from the zero model, writes
 * result.csv under out_dir. regret_out (nullable) receives the model's
 * regret when the suite has a closed-form optimum, NaN otherwise. */
MM_API mm_status mm_baseline_run(const mm_suite* suite, const char* kind,
                                 uint64_t budget, const char* schedule,
                                 uint64_t seed, const char* out_dir,
                                 double* regret_out);

/* ------------------------------------------------------------ validations */

/* Draws random mixture pairs and checks the optimal-model and value
 * smoothness inequalities. Returns MM_ERR_CHECK_FAILED when any pair
 * violates either bound. Out-params are nullable. */
MM_API mm_status mm_verify_smoothness(const mm_suite* suite, int pairs,
                                      uint64_t seed, const char* csv_path,
                                      int* violations_model,
                                      int* violations_value);

/* Replicated traced SGD runs checked against the high-probability
 * squared-distance bound on a geometric time grid. schedule_E <= 0 uses the
 * bound's own offset for the runs; diameter <= 0 uses the derived envelope.
 * Returns MM_ERR_CHECK_FAILED when the observed violation rate at any grid
 * point exceeds the allowance. bad_points (nullable) receives the number of
 * failing grid points. */
MM_API mm_status mm_verify_sgd(const mm_suite* suite, uint64_t t_max,
                               double lambda_budget, int replicas, int k,
                               uint64_t seed, double schedule_E,
                               double diameter, const char* csv_path,
                               uint64_t* bad_points);

/* Expands the partition tree over the (k-1)-simplex to the given height and
 * writes one row per cell: height,index,diameter_l1,bound,vertex_json. The
 * bound column is "nan" for strategies without a diameter guarantee. */
MM_API mm_status mm_partition_demo(int k, int height, const char* strategy,
                                   uint64_t strategy_seed,
                                   const char* csv_path);

/* Loads a kind=ingest config, performs the full split, and (optionally)
 * writes per-source counts: source,total,train,validate,test,discard. */
MM_API mm_status mm_ingest_check(const char* config_path,
                                 const char* counts_csv);

/* ------------------------------------------------------------- experiment */

/* Runs an (algorithm x budget x replica) grid described by config_path and
 * writes regret_curve.csv, summary.csv, and errors.csv under out_dir.
 * Individual cell failures are recorded in errors.csv, not fatal. */
MM_API mm_status mm_experiment_run(const char* config_path,
                                   const char* out_dir);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MIXMATCH_H */
