#ifndef SSGAN_SSGAN_H
#define SSGAN_SSGAN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(SSGAN_BUILDING)
#    define SSGAN_API __declspec(dllexport)
#  else
#    define SSGAN_API __declspec(dllimport)
#  endif
#else
#  define SSGAN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ssgan_status {
    SSGAN_OK = 0,
    SSGAN_ERR_INVALID_ARGUMENT = 1,
    SSGAN_ERR_FORMAT = 2,
    SSGAN_ERR_CONSISTENCY = 3,
    SSGAN_ERR_INFEASIBLE_SPLIT = 4,
    SSGAN_ERR_EMPTY_INPUT = 5,
    SSGAN_ERR_DIVERGED = 6,
    SSGAN_ERR_INVALID_DISTRIBUTION = 7,
    SSGAN_ERR_NO_ALTERNATIVE = 8,
    SSGAN_ERR_VALIDATION = 9,
    SSGAN_ERR_IO = 10,
    SSGAN_ERR_INTERNAL = 11
} ssgan_status;

typedef struct ssgan_config ssgan_config;
typedef struct ssgan_run ssgan_run;

typedef void (*ssgan_log_fn)(const char* line, void* user);

typedef struct ssgan_run_options {
    int resume;         /* nonzero continues an existing run directory */
    int workers;        /* 0 keeps the config's value */
    int64_t max_cells;  /* < 0 runs every pending cell */
    ssgan_log_fn log;   /* may be NULL */
    void* log_user;
} ssgan_run_options;

SSGAN_API const char* ssgan_version(void);
SSGAN_API const char* ssgan_status_name(ssgan_status status);

/* Message of the last failure on the calling thread; never NULL. */
SSGAN_API const char* ssgan_last_error(void);

/* Strings handed out by the library are released with this. */
SSGAN_API void ssgan_string_free(char* s);

/* preset may be NULL. On a validation failure *out stays NULL and the
   message lists every problem. */
SSGAN_API ssgan_status ssgan_config_load(const char* path, const char* preset, ssgan_config** out);

/* Checks a config file without keeping it. *report receives one problem per
   line (empty when valid) and must be freed with ssgan_string_free. */
SSGAN_API ssgan_status ssgan_config_check(const char* path, const char* preset, char** report);

/* "key = value" lines for every resolved key. */
SSGAN_API ssgan_status ssgan_config_dump(const ssgan_config* config, char** text);
SSGAN_API ssgan_status ssgan_config_run_dir(const ssgan_config* config, char** path);
SSGAN_API size_t ssgan_config_cell_count(const ssgan_config* config);
SSGAN_API void ssgan_config_free(ssgan_config* config);

SSGAN_API void ssgan_run_options_init(ssgan_run_options* options);

/* Runs the grid. Cell failures do not make this fail; inspect the handle. */
SSGAN_API ssgan_status ssgan_run_start(const ssgan_config* config, const ssgan_run_options* options, ssgan_run** out);
SSGAN_API int ssgan_run_complete(const ssgan_run* run);
SSGAN_API size_t ssgan_run_cells(const ssgan_run* run);
SSGAN_API size_t ssgan_run_cells_done(const ssgan_run* run);
SSGAN_API size_t ssgan_run_cells_failed(const ssgan_run* run);
SSGAN_API const char* ssgan_run_dir(const ssgan_run* run);
SSGAN_API void ssgan_run_free(ssgan_run* run);

/* Rewrites metrics.csv, notes.txt and the SVG plot of a run directory.
   plot_path may be NULL for <run_dir>/error_vs_round.svg; csv may be NULL. */
SSGAN_API ssgan_status ssgan_report(const char* run_dir, const char* plot_path, char** csv);

#ifdef __cplusplus
}
#endif

#endif
