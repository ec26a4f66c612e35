/* ctrl.h — C API of the ctrl shared library.
 *
 * Clustered transfer residual learning for prediction over many unevenly
 * sized data sources: pooled base models with per-source or per-cluster
 * residual fine-tuning, data-driven cluster discovery, baseline methods,
 * evaluation metrics, a synthetic data generator, and a Monte Carlo verifier
 * of the random-distribution-shift excess-risk formula.
 *
 * Conventions:
 *   - Every fallible function returns ctrl_status; CTRL_OK is 0.
 *   - On failure, ctrl_last_error() returns a thread-local message that stays
 *     valid until the next API call on the same thread.
 *   - Objects returned through out-parameters are owned by the caller and
 *     released with the matching _free function.
 *   - Strings returned through char** out-parameters are released with
 *     ctrl_string_free.
 *   - Structured inputs and outputs are JSON documents.
 */
#ifndef CTRL_H
#define CTRL_H

#include <stdint.h>

#if defined(_WIN32)
#define CTRL_API __declspec(dllexport)
#else
#define CTRL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ctrl_status {
  CTRL_OK = 0,
  CTRL_ERROR_INVALID_ARGUMENT = 1,
  CTRL_ERROR_IO = 2,
  CTRL_ERROR_PARSE = 3,
  CTRL_ERROR_DOMAIN = 4,
  CTRL_ERROR_INTERNAL = 5,
} ctrl_status;

typedef struct ctrl_dataset ctrl_dataset;
typedef struct ctrl_predictor ctrl_predictor;

CTRL_API const char* ctrl_version(void);
CTRL_API const char* ctrl_last_error(void);
CTRL_API void ctrl_string_free(char* s);

/* Worker threads used by parallel stages; 0 restores the hardware default. */
CTRL_API ctrl_status ctrl_set_workers(int32_t workers);

/* --- datasets ------------------------------------------------------------ */

/* CSV with a header row: one string source column, one real outcome column,
 * every other column a real feature. */
CTRL_API ctrl_status ctrl_dataset_load_csv(const char* path, const char* source_column,
                                           const char* outcome_column, ctrl_dataset** out);

/* config_json holds the synthetic-generator settings. truth_json (optional)
 * receives the latent ground-truth sidecar document. */
CTRL_API ctrl_status ctrl_dataset_generate(const char* config_json, uint64_t seed,
                                           ctrl_dataset** out, char** truth_json);

CTRL_API ctrl_status ctrl_dataset_write_csv(const ctrl_dataset* ds, const char* path);
CTRL_API void ctrl_dataset_free(ctrl_dataset* ds);

CTRL_API int64_t ctrl_dataset_rows(const ctrl_dataset* ds);
CTRL_API int64_t ctrl_dataset_feature_dim(const ctrl_dataset* ds);
CTRL_API int64_t ctrl_dataset_source_count(const ctrl_dataset* ds);
CTRL_API ctrl_status ctrl_dataset_source_name(const ctrl_dataset* ds, int64_t index, char** out);

/* Deterministic per-source split keeping at least one row on each side. */
CTRL_API ctrl_status ctrl_dataset_split(const ctrl_dataset* ds, double train_fraction,
                                        uint64_t seed, ctrl_dataset** train,
                                        ctrl_dataset** validation);

/* JSON array of the bottom third of sources by row count. */
CTRL_API ctrl_status ctrl_dataset_small_sources(const ctrl_dataset* ds, char** json_array);

/* --- predictors ----------------------------------------------------------- */

/* family: "global", "local", "trl", "ctrl", "rwg" or "jtt".
 * options_json:
 *   {
 *     "seed": 0,
 *     "learner": { "kind": "ridge|tree|forest", ... },
 *     "residual_learner": { ... },          // optional; defaults to "learner"
 *     "jtt": { "error_fraction": 0.2, "upweight": 5.0 },
 *     "clusters": { "<source>": ["<source>", ...], ... },  // optional for ctrl
 *     "ctrl": { "iters": 250, "candidate_count": 6, "k_max": 10 }
 *   }
 * For family "ctrl" without explicit clusters, cluster discovery runs first. */
CTRL_API ctrl_status ctrl_predictor_train(const ctrl_dataset* ds, const char* family,
                                          const char* options_json, ctrl_predictor** out);

/* features is row-major n_rows x dim; out receives n_rows predictions. */
CTRL_API ctrl_status ctrl_predictor_predict(const ctrl_predictor* p, const double* features,
                                            int64_t n_rows, int64_t dim, const char* source,
                                            double* out);

CTRL_API ctrl_status ctrl_predictor_to_json(const ctrl_predictor* p, char** out);
CTRL_API ctrl_status ctrl_predictor_from_json(const char* json, ctrl_predictor** out);
CTRL_API void ctrl_predictor_free(ctrl_predictor* p);

/* --- cluster discovery ----------------------------------------------------- */

/* options_json: { "seed", "learner", "residual_learner", "ctrl": {...} }.
 * out_json: { "target", "weights": {...}, "counts": {...} }. */
CTRL_API ctrl_status ctrl_stability_weights(const ctrl_dataset* ds, const char* target,
                                            const char* options_json, char** out_json);

/* weights_json is ctrl_stability_weights output. out_json: the cluster report
 * with the ranking, per-k curve, k*, and the selected cluster. */
CTRL_API ctrl_status ctrl_select_cluster(const ctrl_dataset* ds, const char* target,
                                         const char* weights_json, const char* options_json,
                                         char** out_json);

/* instance_json:
 *   { "target_residuals": [...], "residual_predictions": [[...], ...],
 *     "sizes": [...], "candidates": [...], "target": "<id>" }
 * out_json: { "selected": [...], "z": [...], "objective": <real> }. */
CTRL_API ctrl_status ctrl_solve_subset(const char* instance_json, char** out_json);

/* One-standard-error rule over a per-k mean/SE curve (1-based outputs). */
CTRL_API ctrl_status ctrl_one_se_rule(const double* means, const double* ses, int64_t count,
                                      int64_t* k_min, double* cutoff, int64_t* k_star);

/* --- metrics --------------------------------------------------------------- */

CTRL_API ctrl_status ctrl_metric_mse(const double* pred, const double* actual, int64_t count,
                                     double* out);

/* --- random distribution shift --------------------------------------------- */

/* config_json: { "cell_count", "leaf_count", "sample_sizes", "shift_variance",
 *                "leaf_means", "leaf_variances", "cluster", "replicates" }. */
CTRL_API ctrl_status ctrl_shift_theoretical_mean(const char* config_json, double* out);
CTRL_API ctrl_status ctrl_shift_simulate(const char* config_json, uint64_t seed, char** out_json);

/* --- experiment runners ----------------------------------------------------- */

/* Each runner reads a JSON config string, writes its outputs under out_dir,
 * and removes everything it wrote if it fails. Outputs are deterministic in
 * (config, seed) and independent of the worker count. */
CTRL_API ctrl_status ctrl_run_synth(const char* config_json, const char* out_dir);
CTRL_API ctrl_status ctrl_run_benchmark(const char* config_json, const char* out_dir);
CTRL_API ctrl_status ctrl_run_cluster(const char* config_json, const char* out_dir,
                                      const char* target /* NULL for all targets */);
CTRL_API ctrl_status ctrl_run_theory(const char* config_json, const char* out_dir);
CTRL_API ctrl_status ctrl_run_evaluate(const char* run_dir, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* CTRL_H */
