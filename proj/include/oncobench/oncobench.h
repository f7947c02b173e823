#ifndef ONCOBENCH_ONCOBENCH_H_
#define ONCOBENCH_ONCOBENCH_H_

#include <stddef.h>

#if defined(OB_BUILDING_LIBRARY)
#define OB_API __attribute__((visibility("default")))
#else
#define OB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Non-zero values are also the CLI exit codes. */
typedef enum ob_status {
  OB_OK = 0,
  OB_ERR_VALIDATION = 1,
  OB_ERR_IO = 2,
  OB_ERR_BACKEND = 3,
  OB_ERR_INTERNAL = 4
} ob_status;

typedef struct ob_session ob_session;
typedef struct ob_dataset ob_dataset;

OB_API const char* ob_version(void);

/* Message for the last failed call on this thread; "" when none. */
OB_API const char* ob_last_error(void);

/* Strings returned through char** out-parameters are malloc()ed; release
   them with ob_string_free. */
OB_API void ob_string_free(char* s);

/* Session: a resolved pipeline configuration. config_path may be NULL or ""
   for defaults; overrides_json (may be NULL) is merged on top and wins. */
OB_API ob_status ob_session_create(const char* config_path, const char* overrides_json,
                                   ob_session** out);
OB_API void ob_session_destroy(ob_session* session);
/* Effective configuration as JSON. */
OB_API ob_status ob_session_config(const ob_session* session, char** config_json);

/* Pipeline commands. summary_json (may be NULL) receives a JSON summary. */
OB_API ob_status ob_build_dataset(ob_session* session, char** summary_json);
/* input/output may be NULL for the defaults (train split, derived name). */
OB_API ob_status ob_perturb(ob_session* session, const char* input_path,
                            const char* output_path, char** summary_json);
OB_API ob_status ob_embed(ob_session* session, char** summary_json);
OB_API ob_status ob_run(ob_session* session, char** summary_json);
/* kind: main | robustness | retriever | timing; format: csv | markdown.
   output_path may be NULL (written under the runs directory). */
OB_API ob_status ob_report(ob_session* session, const char* kind, const char* format,
                           const char* output_path, char** summary_json);

/* Instance files (JSON-lines). */
OB_API ob_status ob_dataset_read(const char* path, ob_dataset** out);
OB_API void ob_dataset_free(ob_dataset* dataset);
OB_API size_t ob_dataset_size(const ob_dataset* dataset);
/* One instance as a JSON line (fixed key order). */
OB_API ob_status ob_dataset_instance_json(const ob_dataset* dataset, size_t index,
                                          char** instance_json);
OB_API ob_status ob_dataset_write(const ob_dataset* dataset, const char* path);

/* Metrics on raw strings. set_mode != 0 compares comma-separated items as
   sets (multi-entity answers). */
OB_API ob_status ob_exact_match(const char* candidate, const char* reference, int set_mode,
                                int* out);
OB_API ob_status ob_bleu2(const char* candidate, const char* reference, double* out);
OB_API ob_status ob_rouge_l(const char* candidate, const char* reference, double* precision,
                            double* recall, double* f1);
OB_API ob_status ob_average_f1(double em_f1, double bleu_f1, double rouge_f1, double* out);

#ifdef __cplusplus
}
#endif

#endif  // ONCOBENCH_ONCOBENCH_H_
