/* C API for the fuzzybz solver library.
 *
 * All functions return a status code: 0 on success, otherwise one of the
 * codes below. fbz_last_error() returns a thread-local message describing
 * the most recent failure. Handles are opaque and must be released with
 * their destroy function.
 */
#ifndef FUZZYBZ_H
#define FUZZYBZ_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

enum {
    FBZ_OK = 0,
    FBZ_E_INTERNAL = 1,
    FBZ_E_CONFIG = 2,
    FBZ_E_IO = 3
    /* codes >= 10 are scenario assertion failures; see the README table */
};

typedef struct fbz_config fbz_config;

const char* fbz_version(void);
const char* fbz_last_error(void);

/* configuration */
int fbz_config_default(fbz_config** out);
int fbz_config_load(const char* path, fbz_config** out);
int fbz_config_override(fbz_config* cfg, const char* dotted_key, const char* value);
/* "section.key=value" convenience form */
int fbz_config_override_kv(fbz_config* cfg, const char* keyval);
int fbz_config_dump(const fbz_config* cfg, const char* path);
void fbz_config_destroy(fbz_config* cfg);

/* scenarios; artifacts land in the configured output directory */
int fbz_scenario_run(const fbz_config* cfg);

/* diagnostics post-processing */
int fbz_plot_data(const char* diagnostics_path, const char* out_dir);

/* DVM table build/cache */
int fbz_dvm_table_build(const fbz_config* cfg, const char* out_path);

#ifdef __cplusplus
}
#endif

#endif
