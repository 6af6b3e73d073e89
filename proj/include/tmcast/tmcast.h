/* Copyright 2026 The tmcast Authors */
/* SPDX-License-Identifier: Apache-2.0 */

/* Stable C interface to the tmcast library. All handles are opaque. Every
 * fallible call returns a tmcast_status; on failure tmcast_last_error()
 * describes the problem for the calling thread. Strings returned through
 * char** out-parameters are owned by the caller and released with
 * tmcast_string_free(). */

#ifndef TMCAST_TMCAST_H
#define TMCAST_TMCAST_H

#include <stddef.h>
#include <stdint.h>

#if defined(TMCAST_BUILDING_LIBRARY)
#define TMCAST_API __attribute__((visibility("default")))
#else
#define TMCAST_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as CLI exit codes. */
typedef enum tmcast_status {
  TMCAST_OK = 0,
  TMCAST_E_USAGE = 1,   /* invalid argument or configuration */
  TMCAST_E_DATA = 2,    /* missing, malformed or invalid input files */
  TMCAST_E_RUNTIME = 3  /* failure while running, including output I/O */
} tmcast_status;

typedef struct tmcast_series tmcast_series;
typedef struct tmcast_config tmcast_config;

typedef struct tmcast_eval_request {
  const char* checkpoint;  /* required */
  const char* data_path;   /* NULL: dataset recorded in the checkpoint */
  const char* split;       /* NULL: configured split */
  const int* horizons;     /* NULL or empty: configured horizons */
  size_t horizon_count;
  int num_samples;         /* 0: configured value */
  int dump_attention;      /* nonzero: include pooling weights */
  const char* out_dir;     /* NULL: directory of the checkpoint */
  int plots;               /* nonzero: write PNG and SVG plots */
} tmcast_eval_request;

TMCAST_API const char* tmcast_version(void);
/* Message for the last failed call on this thread, "" if none. */
TMCAST_API const char* tmcast_last_error(void);
TMCAST_API void tmcast_string_free(char* s);

/* Traffic-matrix series. */
TMCAST_API tmcast_status tmcast_series_generate(int nodes, int length, uint64_t seed,
                                                double burst_rate, tmcast_series** out);
/* format: "canonical" or "csv_rowmajor" (needs nodes > 0). */
TMCAST_API tmcast_status tmcast_series_load(const char* path, const char* format, int nodes,
                                            int interval_seconds, tmcast_series** out);
TMCAST_API tmcast_status tmcast_series_save(const tmcast_series* series, const char* path);
TMCAST_API tmcast_status tmcast_series_shape(const tmcast_series* series, int* nodes,
                                             size_t* length);
/* Copies the N*N row-major matrix at index t into buffer. */
TMCAST_API tmcast_status tmcast_series_matrix(const tmcast_series* series, size_t t,
                                              double* buffer, size_t capacity);
TMCAST_API void tmcast_series_free(tmcast_series* series);

/* Generates a synthetic series straight to a canonical file. */
TMCAST_API tmcast_status tmcast_synth(int nodes, int length, uint64_t seed, double burst_rate,
                                      const char* path);

/* Experiment configuration. */
TMCAST_API tmcast_status tmcast_config_preset(const char* name, tmcast_config** out);
TMCAST_API tmcast_status tmcast_config_load(const char* path, tmcast_config** out);
TMCAST_API tmcast_status tmcast_config_from_json(const char* json, tmcast_config** out);
/* Dotted key; value is parsed as JSON unless the key holds a string. */
TMCAST_API tmcast_status tmcast_config_set(tmcast_config* config, const char* key,
                                           const char* value);
/* Applies `count` overrides, then validates once; all or nothing. */
TMCAST_API tmcast_status tmcast_config_set_many(tmcast_config* config, const char* const* keys,
                                                const char* const* values, size_t count);
TMCAST_API tmcast_status tmcast_config_to_json(const tmcast_config* config, char** out);
TMCAST_API void tmcast_config_free(tmcast_config* config);

/* Runs. Each optional char** receives a JSON summary. */
TMCAST_API tmcast_status tmcast_train(const tmcast_config* config, char** summary_json);
TMCAST_API tmcast_status tmcast_eval(const tmcast_eval_request* request, char** report_json);
/* Returns TMCAST_E_RUNTIME when any variant failed; the report is still
 * produced and lists every variant. */
TMCAST_API tmcast_status tmcast_ablate(const tmcast_config* config, char** report_json);
TMCAST_API tmcast_status tmcast_inspect_checkpoint(const char* path, char** info_json);

#ifdef __cplusplus
}
#endif

#endif /* TMCAST_TMCAST_H */
