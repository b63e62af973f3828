#ifndef COOPDRIVE_H
#define COOPDRIVE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum CoopStatus {
  COOP_STATUS_OK = 0,
  COOP_STATUS_NULL_ARGUMENT = 1,
  COOP_STATUS_INVALID_UTF8 = 2,
  COOP_STATUS_IO = 3,
  COOP_STATUS_PARSE = 4,
  COOP_STATUS_INVALID_SCENARIO = 5,
  COOP_STATUS_INVALID_ARGUMENT = 6,
  COOP_STATUS_NOT_FOUND = 7,
  COOP_STATUS_NOT_NUMERIC = 8,
  COOP_STATUS_BUFFER_TOO_SMALL = 9,
  COOP_STATUS_PANIC = 10,
} CoopStatus;

typedef enum CoopMode {
  COOP_MODE_VEHICLE_ONLY = 0,
  COOP_MODE_IAAD = 1,
  COOP_MODE_IGAD = 2,
  COOP_MODE_IPAD = 3,
} CoopMode;

/**
 * Metrics of one run.
 */
typedef struct CoopReport CoopReport;

/**
 * A scenario file, editable before it is run.
 */
typedef struct CoopScenario CoopScenario;

/**
 * Inputs of the testing cost model. Fill from `coop_cost_defaults`.
 */
typedef struct CoopCostParams {
  double n_v;
  double c_p;
  double s;
  double n_s;
  double c_s;
  uint32_t cap;
  double h_p;
  double h_s;
  double rtf;
} CoopCostParams;

typedef struct CoopCostReport {
  double physical_cost_per_day;
  double sim_cost_per_day;
  double physical_km_per_day;
  double sim_km_per_day;
  double physical_cost_per_km;
  double sim_cost_per_km;
  double cost_per_km_ratio;
  double efficiency_ratio;
  double rtf_for_250x;
} CoopCostReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *coop_last_error(void);

/**
 * Load a scenario file. The scenario is validated here and again by
 * `coop_run` after any edits.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CoopStatus coop_scenario_load(const char *path, struct CoopScenario **out);

/**
 * Parse a scenario from TOML text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum CoopStatus coop_scenario_parse(const char *text, struct CoopScenario **out);

/**
 * # Safety
 * `scenario` must come from `coop_scenario_load` or `coop_scenario_parse`.
 */
enum CoopStatus coop_scenario_set_mode(struct CoopScenario *scenario, enum CoopMode mode);

/**
 * # Safety
 * `scenario` must come from `coop_scenario_load` or `coop_scenario_parse`.
 */
enum CoopStatus coop_scenario_set_seed(struct CoopScenario *scenario, uint64_t seed);

/**
 * Override one numeric parameter by dotted path, e.g.
 * `channels.cv2x.jitter_max_ms`. The edit is rejected, and the scenario
 * left unchanged, if the result does not validate.
 *
 * # Safety
 * `scenario` must be a live handle; `path` a NUL-terminated string.
 */
enum CoopStatus coop_scenario_set_param(struct CoopScenario *scenario,
                                        const char *path,
                                        double value);

/**
 * # Safety
 * `scenario` must be null or a live handle; it is invalid afterwards.
 */
void coop_scenario_free(struct CoopScenario *scenario);

/**
 * Simulate the scenario to completion.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum CoopStatus coop_run(const struct CoopScenario *scenario, struct CoopReport **out);

/**
 * Numeric value of one metric. `NotFound` if absent, `NotNumeric` for
 * string metrics or undefined values.
 *
 * # Safety
 * `report` must be a live handle, `name` a NUL-terminated string and
 * `out` writable.
 */
enum CoopStatus coop_report_metric(const struct CoopReport *report, const char *name, double *out);

/**
 * All records as JSON lines. Release with `coop_string_free`.
 *
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum CoopStatus coop_report_to_json(const struct CoopReport *report, char **out);

/**
 * # Safety
 * `report` must be null or a live handle; it is invalid afterwards.
 */
void coop_report_free(struct CoopReport *report);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void coop_string_free(char *s);

/**
 * Default cost-model inputs.
 */
struct CoopCostParams coop_cost_defaults(void);

/**
 * # Safety
 * `params` must be readable and `out` writable.
 */
enum CoopStatus coop_cost_report(const struct CoopCostParams *params, struct CoopCostReport *out);

/**
 * Roadside unit positions along a corridor. `*count` always receives the
 * number of units; positions are written only when `capacity` suffices,
 * otherwise `BufferTooSmall` is returned. `positions` may be null when
 * `capacity` is zero.
 *
 * # Safety
 * `positions` must have room for `capacity` values; `count` writable.
 */
enum CoopStatus coop_plan_placement(double length_m,
                                    double coverage_each_direction_m,
                                    double *positions,
                                    size_t capacity,
                                    size_t *count);

/**
 * Total draw in watts of `sor_count` units at `power_w` each.
 */
double coop_deployment_power(size_t sor_count, double power_w);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COOPDRIVE_H */
