#ifndef ADAPTERLAB_ADAPTERLAB_H
#define ADAPTERLAB_ADAPTERLAB_H

/* C interface to libadapterlab. Every call that can fail returns an
 * adapterlab_status; the message for the most recent failure on a session is
 * available from adapterlab_last_error. Strings returned by the library stay
 * valid until the next call on the same handle. Handles are not thread-safe. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ADAPTERLAB_API __declspec(dllexport)
#else
#define ADAPTERLAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as the command-line tool's exit codes. */
typedef enum adapterlab_status {
  ADAPTERLAB_OK = 0,
  ADAPTERLAB_ERR_INTERNAL = 1,
  ADAPTERLAB_ERR_CONFIG = 2,
  ADAPTERLAB_ERR_DATA = 3,
  ADAPTERLAB_ERR_CHECKPOINT = 4
} adapterlab_status;

typedef enum adapterlab_track {
  ADAPTERLAB_TRACK_A = 0, /* in-language */
  ADAPTERLAB_TRACK_C = 1  /* held-out target languages */
} adapterlab_track;

typedef struct adapterlab_session adapterlab_session;
typedef struct adapterlab_adapter adapterlab_adapter;
typedef struct adapterlab_model adapterlab_model;

ADAPTERLAB_API const char* adapterlab_version(void);
ADAPTERLAB_API const char* adapterlab_status_name(int status);

/* Returns NULL only when out of memory. */
ADAPTERLAB_API adapterlab_session* adapterlab_session_new(void);
ADAPTERLAB_API void adapterlab_session_free(adapterlab_session* session);
/* "" when the last call succeeded. */
ADAPTERLAB_API const char* adapterlab_last_error(const adapterlab_session* session);
/* Report directory after adapterlab_eval, table text after adapterlab_report,
 * canonical JSON after adapterlab_check_config. */
ADAPTERLAB_API const char* adapterlab_last_output(const adapterlab_session* session);

/* Options applied to every later command on the session. */
ADAPTERLAB_API int adapterlab_set_seed(adapterlab_session* session, uint64_t seed);
ADAPTERLAB_API int adapterlab_clear_seed(adapterlab_session* session);
ADAPTERLAB_API int adapterlab_set_jobs(adapterlab_session* session, size_t jobs);
ADAPTERLAB_API int adapterlab_set_allow_source(adapterlab_session* session, int allow);
/* "dotted.key=value" applied to scalar config fields. */
ADAPTERLAB_API int adapterlab_add_override(adapterlab_session* session, const char* assignment);
ADAPTERLAB_API int adapterlab_clear_overrides(adapterlab_session* session);
/* Nonzero: one progress line per trained or scored unit on stderr. */
ADAPTERLAB_API int adapterlab_set_progress(adapterlab_session* session, int enabled);

/* spec_path may be NULL for the default two-family spec. */
ADAPTERLAB_API int adapterlab_synth(adapterlab_session* session, const char* spec_path, const char* out_dir);
ADAPTERLAB_API int adapterlab_check_config(adapterlab_session* session, const char* config_path);
ADAPTERLAB_API int adapterlab_train_la(adapterlab_session* session, const char* config_path);
ADAPTERLAB_API int adapterlab_train_ta(adapterlab_session* session, const char* config_path);
ADAPTERLAB_API int adapterlab_eval(adapterlab_session* session, const char* config_path, adapterlab_track track);
ADAPTERLAB_API int adapterlab_report(adapterlab_session* session, const char* report_dir);

/* Adapter checkpoints. */
ADAPTERLAB_API int adapterlab_adapter_load(adapterlab_session* session, const char* dir, adapterlab_adapter** out);
ADAPTERLAB_API int adapterlab_adapter_save(adapterlab_session* session, const adapterlab_adapter* adapter,
                                           const char* dir);
ADAPTERLAB_API void adapterlab_adapter_free(adapterlab_adapter* adapter);
ADAPTERLAB_API const char* adapterlab_adapter_tag(const adapterlab_adapter* adapter);
/* "language" or "task". */
ADAPTERLAB_API const char* adapterlab_adapter_role(const adapterlab_adapter* adapter);
ADAPTERLAB_API size_t adapterlab_adapter_bottleneck(const adapterlab_adapter* adapter);
ADAPTERLAB_API size_t adapterlab_adapter_param_count(const adapterlab_adapter* adapter);

/* Encoder checkpoints. */
ADAPTERLAB_API int adapterlab_model_load(adapterlab_session* session, const char* dir, adapterlab_model** out);
ADAPTERLAB_API void adapterlab_model_free(adapterlab_model* model);
ADAPTERLAB_API size_t adapterlab_model_base_params(const adapterlab_model* model);
ADAPTERLAB_API size_t adapterlab_model_d_model(const adapterlab_model* model);
/* ADAPTERLAB_ERR_CHECKPOINT unless the adapter was built for this model. */
ADAPTERLAB_API int adapterlab_model_check_adapter(adapterlab_session* session, const adapterlab_model* model,
                                                  const adapterlab_adapter* adapter);

#ifdef __cplusplus
}
#endif

#endif
