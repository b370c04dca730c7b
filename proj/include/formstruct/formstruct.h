/* formstruct C API: form hierarchy extraction behind opaque handles.
 *
 * Every function returns FORMSTRUCT_OK (0) on success. On failure the
 * return value classifies the error and formstruct_last_error() holds a
 * thread-local human-readable message. Strings returned through char**
 * outputs are heap-allocated; release them with formstruct_string_free.
 */
#ifndef FORMSTRUCT_H
#define FORMSTRUCT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FORMSTRUCT_API __declspec(dllexport)
#else
#define FORMSTRUCT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum formstruct_status {
    FORMSTRUCT_OK = 0,
    FORMSTRUCT_ERR_INVALID_ARGUMENT = 1,
    FORMSTRUCT_ERR_CONFIG = 2,
    FORMSTRUCT_ERR_PARSE = 3,
    FORMSTRUCT_ERR_IO = 4,
    FORMSTRUCT_ERR_RUNTIME = 5
} formstruct_status;

typedef struct formstruct_dataset formstruct_dataset;
typedef struct formstruct_model formstruct_model;
typedef struct formstruct_report formstruct_report;

FORMSTRUCT_API const char* formstruct_version(void);
/* Message for the most recent failure on this thread; never NULL. */
FORMSTRUCT_API const char* formstruct_last_error(void);
FORMSTRUCT_API void formstruct_string_free(char* s);

/* ---- datasets ---- */

/* split is "train" or "test"; with_images = 0 skips crops (text/layout only). */
FORMSTRUCT_API formstruct_status formstruct_dataset_load_funsd(const char* root_dir,
                                                               const char* split, int with_images,
                                                               formstruct_dataset** out);
FORMSTRUCT_API formstruct_status formstruct_dataset_load_dump(const char* path,
                                                              formstruct_dataset** out);
/* config_json follows the synthetic section schema (pages, keys_per_page, ...). */
FORMSTRUCT_API formstruct_status formstruct_dataset_synthesize(const char* config_json,
                                                               uint64_t seed,
                                                               formstruct_dataset** out);
/* with_crops != 0 also writes the sibling crop cache directory. */
FORMSTRUCT_API formstruct_status formstruct_dataset_save_dump(const formstruct_dataset* ds,
                                                              const char* path, int with_crops);
/* JSON: {"split","pages","fragments","pairs","notes":[...]} */
FORMSTRUCT_API formstruct_status formstruct_dataset_stats_json(const formstruct_dataset* ds,
                                                               char** out_json);
/* JSON array of page ids, in dataset order. */
FORMSTRUCT_API formstruct_status formstruct_dataset_page_ids_json(const formstruct_dataset* ds,
                                                                  char** out_json);
FORMSTRUCT_API void formstruct_dataset_free(formstruct_dataset* ds);

/* ---- models & checkpoints ---- */

FORMSTRUCT_API formstruct_status formstruct_model_create(const char* model_config_json,
                                                         uint64_t seed, formstruct_model** out);
FORMSTRUCT_API formstruct_status formstruct_model_load(const char* checkpoint_path,
                                                       formstruct_model** out);
FORMSTRUCT_API formstruct_status formstruct_model_save(formstruct_model* model,
                                                       const char* checkpoint_path);
/* Loads parameters from a checkpoint into an existing model (resume). */
FORMSTRUCT_API formstruct_status formstruct_model_resume(formstruct_model* model,
                                                         const char* checkpoint_path);
/* JSON: config, seed, epochs_completed, parameter counts per module, fingerprint. */
FORMSTRUCT_API formstruct_status formstruct_model_summary_json(const formstruct_model* model,
                                                               char** out_json);
FORMSTRUCT_API void formstruct_model_free(formstruct_model* model);

/* ---- training / evaluation / prediction ---- */

/* Trains in place. valid may be NULL. log_path, when given, receives one JSON
 * record per epoch (epoch, split, loss, hit1, wall seconds). */
FORMSTRUCT_API formstruct_status formstruct_train(formstruct_model* model,
                                                  const formstruct_dataset* train,
                                                  const formstruct_dataset* valid,
                                                  const char* train_config_json,
                                                  const char* log_path);

/* eval options JSON (optional): {"hit_ks":[1,2,5],"collect_predictions":bool,
 * "collect_gate_alphas":bool,"threads":int} */
FORMSTRUCT_API formstruct_status formstruct_evaluate(formstruct_model* model,
                                                     const formstruct_dataset* ds,
                                                     const char* eval_options_json,
                                                     formstruct_report** out);
FORMSTRUCT_API formstruct_status formstruct_report_json(const formstruct_report* report,
                                                        char** out_json);
/* Plain table in the mAP / mRank / Hit@k column layout. */
FORMSTRUCT_API formstruct_status formstruct_report_table(const formstruct_report* report,
                                                         const char* row_label, char** out_text);
/* Line-delimited per-query ranked lists (requires collect_predictions). */
FORMSTRUCT_API formstruct_status formstruct_report_dump_predictions(const formstruct_report* report,
                                                                    const char* path);
FORMSTRUCT_API void formstruct_report_free(formstruct_report* report);

/* Indented-text hierarchy for one page; threshold_json is either "null" /
 * NULL (no threshold) or a number. */
FORMSTRUCT_API formstruct_status formstruct_predict_page(formstruct_model* model,
                                                         const formstruct_dataset* ds,
                                                         const char* page_id,
                                                         const char* threshold_json,
                                                         char** out_text);

#ifdef __cplusplus
}
#endif

#endif /* FORMSTRUCT_H */
