#ifndef ERGOLAB_H
#define ERGOLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Zero is success; codes from 100 up mirror library errors.
typedef enum ErgolabStatus {
  ERGOLAB_STATUS_OK = 0,
  ERGOLAB_STATUS_NULL_POINTER = 1,
  ERGOLAB_STATUS_INVALID_UTF8 = 2,
  ERGOLAB_STATUS_BUFFER_TOO_SMALL = 3,
  ERGOLAB_STATUS_INDEX_OUT_OF_BOUNDS = 4,
  ERGOLAB_STATUS_PANIC = 5,
  ERGOLAB_STATUS_PARTITION_BOUNDARY = 100,
  ERGOLAB_STATUS_OUTSIDE_DOMAIN = 101,
  ERGOLAB_STATUS_OUTSIDE_IMAGE = 102,
  ERGOLAB_STATUS_NO_CONVERGENCE = 103,
  ERGOLAB_STATUS_INVALID_GAMMA = 104,
  ERGOLAB_STATUS_RETURN_CAP_EXCEEDED = 105,
  ERGOLAB_STATUS_REDUCIBLE = 106,
  ERGOLAB_STATUS_ACCURACY_LOSS = 107,
  ERGOLAB_STATUS_INSUFFICIENT_DATA = 108,
  ERGOLAB_STATUS_OUT_OF_RANGE = 109,
  ERGOLAB_STATUS_DEGENERATE_WINDOW = 110,
  ERGOLAB_STATUS_TRUNCATION_TOO_COARSE = 111,
  ERGOLAB_STATUS_EMPTY_CYLINDER = 112,
  ERGOLAB_STATUS_PRECISION_FLOOR = 113,
  ERGOLAB_STATUS_INVALID_ARGUMENT = 114,
  ERGOLAB_STATUS_CONFIG = 115,
  ERGOLAB_STATUS_IO = 116,
} ErgolabStatus;

// Verdict outcome of a result row.
typedef enum ErgolabOutcome {
  ERGOLAB_OUTCOME_PASS = 0,
  ERGOLAB_OUTCOME_FAIL = 1,
  ERGOLAB_OUTCOME_INFO = 2,
  ERGOLAB_OUTCOME_INSUFFICIENT = 3,
} ErgolabOutcome;

// Experiment configuration handle.
typedef struct ErgolabConfig ErgolabConfig;

// Interval map handle.
typedef struct ErgolabMap ErgolabMap;

// Result table of one experiment run.
typedef struct ErgolabTable ErgolabTable;

// Real function callback used by the transfer operator.
typedef double (*ErgolabRealFn)(double x, void *user_data);

// Numeric part of a result row.
typedef struct ErgolabRow {
  uint64_t n;
  double value;
  double se;
  enum ErgolabOutcome outcome;
} ErgolabRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ergolab_version(void);

// Message of the last failed call on this thread (empty after a success).
//
// # Safety
// `buf` must point to `len` writable bytes or be null; `needed` may be null.
enum ErgolabStatus ergolab_last_error(char *buf, uintptr_t len, uintptr_t *needed);

// Build a map by family name: `boole_like`, `thaler` (uses `gamma` and the
// midpoint partition rule), `doubling` or `identity`.
//
// # Safety
// `family` must be a NUL-terminated string; `map` must be writable.
enum ErgolabStatus ergolab_map_new(const char *family, double gamma, struct ErgolabMap **map);

// # Safety
// `map` must come from [`ergolab_map_new`] and not be used afterwards.
void ergolab_map_free(struct ErgolabMap *map);

// `T(x)` and the index of the branch containing `x`.
//
// # Safety
// `map` must be a live handle and `y`, `branch` writable.
enum ErgolabStatus ergolab_map_evaluate(const struct ErgolabMap *map,
                                        double x,
                                        double *y,
                                        uintptr_t *branch);

// Reference density `h(x)` of the map.
//
// # Safety
// `map` must be a live handle and `value` writable.
enum ErgolabStatus ergolab_map_density(const struct ErgolabMap *map, double x, double *value);

// Orbit `x_1, ..., x_len` of `x0` written into `orbit`.
//
// # Safety
// `map` must be a live handle; `orbit` must hold `len` doubles.
enum ErgolabStatus ergolab_map_orbit(const struct ErgolabMap *map,
                                     double x0,
                                     double *orbit,
                                     uintptr_t len);

// Number of times `t < n` with `T^t x0` in `(lo, hi)`.
//
// # Safety
// `map` must be a live handle and `count` writable.
enum ErgolabStatus ergolab_map_occupation(const struct ErgolabMap *map,
                                          double x0,
                                          double lo,
                                          double hi,
                                          uint64_t n,
                                          uint64_t *count);

// Transfer operator applied to `f` at `len` points.
//
// # Safety
// `map` must be a live handle; `points` and `values` must hold `len`
// doubles; `f` is called with `user_data` on the calling thread.
enum ErgolabStatus ergolab_transfer_apply(const struct ErgolabMap *map,
                                          ErgolabRealFn f,
                                          void *user_data,
                                          const double *points,
                                          double *values,
                                          uintptr_t len);

// `E Y^p` for the unit-mean Mittag-Leffler law of order `gamma`.
//
// # Safety
// `value` must be writable.
enum ErgolabStatus ergolab_ml_moment(double gamma, uint32_t p, double *value);

// Mittag-Leffler distribution function.
//
// # Safety
// `value` must be writable.
enum ErgolabStatus ergolab_ml_cdf(double gamma, double y, double *value);

// Positive stable distribution function.
//
// # Safety
// `value` must be writable.
enum ErgolabStatus ergolab_stable_cdf(double gamma, double z, double *value);

// `E exp(-t Z)` for the positive stable law.
//
// # Safety
// `value` must be writable.
enum ErgolabStatus ergolab_stable_laplace(double gamma, double t, double *value);

// Constants `K` and `C = K^(-1/gamma)` of the one-sided LIL.
//
// # Safety
// `k` and `c` must be writable.
enum ErgolabStatus ergolab_lil_constants(double gamma, double *k, double *c);

// Parse and validate a TOML experiment config.
//
// # Safety
// `toml` must be a NUL-terminated string; `config` must be writable.
enum ErgolabStatus ergolab_config_from_toml(const char *toml, struct ErgolabConfig **config);

// Load a TOML experiment config from a file.
//
// # Safety
// `path` must be a NUL-terminated string; `config` must be writable.
enum ErgolabStatus ergolab_config_load(const char *path, struct ErgolabConfig **config);

// Override the master seed.
//
// # Safety
// `config` must be a live handle.
enum ErgolabStatus ergolab_config_set_seed(struct ErgolabConfig *config, uint64_t seed);

// Hex digest identifying the config.
//
// # Safety
// `config` must be a live handle; `buf` must hold `len` bytes or be null.
enum ErgolabStatus ergolab_config_digest(const struct ErgolabConfig *config,
                                         char *buf,
                                         uintptr_t len,
                                         uintptr_t *needed);

// # Safety
// `config` must come from this library and not be used afterwards.
void ergolab_config_free(struct ErgolabConfig *config);

// Run the named experiment (`dk`, `stable`, ...). `threads = 0` uses the
// global worker pool.
//
// # Safety
// `config` must be a live handle, `experiment` a NUL-terminated string and
// `table` writable.
enum ErgolabStatus ergolab_run(const struct ErgolabConfig *config,
                               const char *experiment,
                               uintptr_t threads,
                               struct ErgolabTable **table);

// Number of rows.
//
// # Safety
// `table` must be a live handle and `len` writable.
enum ErgolabStatus ergolab_table_len(const struct ErgolabTable *table, uintptr_t *len);

// Numeric fields of row `index`.
//
// # Safety
// `table` must be a live handle and `row` writable.
enum ErgolabStatus ergolab_table_row(const struct ErgolabTable *table,
                                     uintptr_t index,
                                     struct ErgolabRow *row);

// Statistic name of row `index`.
//
// # Safety
// `table` must be a live handle; `buf` must hold `len` bytes or be null.
enum ErgolabStatus ergolab_table_statistic(const struct ErgolabTable *table,
                                           uintptr_t index,
                                           char *buf,
                                           uintptr_t len,
                                           uintptr_t *needed);

// Verdict of row `index` rendered as `outcome:RULE`.
//
// # Safety
// `table` must be a live handle; `buf` must hold `len` bytes or be null.
enum ErgolabStatus ergolab_table_verdict(const struct ErgolabTable *table,
                                         uintptr_t index,
                                         char *buf,
                                         uintptr_t len,
                                         uintptr_t *needed);

// True iff no row failed or lacked data.
//
// # Safety
// `table` must be a live handle and `all_pass` writable.
enum ErgolabStatus ergolab_table_all_pass(const struct ErgolabTable *table, bool *all_pass);

// Write one CSV per statistic and `run_metadata.toml` into `dir`.
//
// # Safety
// `table` must be a live handle and `dir` a NUL-terminated string.
enum ErgolabStatus ergolab_table_write(const struct ErgolabTable *table, const char *dir);

// # Safety
// `table` must come from [`ergolab_run`] and not be used afterwards.
void ergolab_table_free(struct ErgolabTable *table);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ERGOLAB_H */
