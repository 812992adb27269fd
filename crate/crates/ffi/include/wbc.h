#ifndef WBC_H
#define WBC_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WbcStatus {
  WBC_STATUS_OK = 0,
  WBC_STATUS_NULL_POINTER = 1,
  WBC_STATUS_INVALID_ARGUMENT = 2,
  WBC_STATUS_PARSE = 3,
  WBC_STATUS_MODEL = 4,
  WBC_STATUS_INFEASIBLE = 5,
  WBC_STATUS_DEGENERATE = 6,
  WBC_STATUS_IO = 7,
  WBC_STATUS_VIOLATION = 8,
  WBC_STATUS_PANIC = 9,
} WbcStatus;

/**
 * A warm-started whole-body IK loop bound to one model and profile.
 */
typedef struct WbcController WbcController;

/**
 * A validated kinematic model.
 */
typedef struct WbcModel WbcModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *wbc_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated and
 * always NUL-terminated when `len > 0`). Returns the length the full message
 * needs, including the terminator.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t wbc_last_error(char *buf, size_t len);

/**
 * The bundled 25-coordinate reference model.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum WbcStatus wbc_model_reference(struct WbcModel **out);

/**
 * Parses and validates a model document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid handle slot.
 */
enum WbcStatus wbc_model_from_json(const char *json, struct WbcModel **out);

/**
 * # Safety
 * `model` must be null or a handle from this library, not yet freed.
 */
void wbc_model_free(struct WbcModel *model);

/**
 * Number of generalized coordinates.
 *
 * # Safety
 * `model` must be a live handle; `out` must be valid.
 */
enum WbcStatus wbc_model_dof(const struct WbcModel *model, size_t *out);

/**
 * Writes the nominal posture into `q_out`, which must hold exactly `len`
 * values with `len` equal to the model's coordinate count.
 *
 * # Safety
 * `model` must be a live handle; `q_out` must point to `len` doubles.
 */
enum WbcStatus wbc_model_nominal_posture(const struct WbcModel *model, double *q_out, size_t len);

/**
 * World pose of a named frame or link at configuration `q`.
 *
 * # Safety
 * `model` must be a live handle, `q` must point to `len` doubles, `frame`
 * must be NUL-terminated and `pose_out` must hold 7 doubles.
 */
enum WbcStatus wbc_model_frame_pose(const struct WbcModel *model,
                                    const double *q,
                                    size_t len,
                                    const char *frame,
                                    double *pose_out);

/**
 * Creates a controller. `profile` is a bundled profile name (`laundry`,
 * `delivery`, `tablescape`) or a profile JSON document.
 *
 * # Safety
 * `model` must be a live handle, `profile` NUL-terminated, `out` valid.
 */
enum WbcStatus wbc_controller_new(const struct WbcModel *model,
                                  const char *profile,
                                  struct WbcController **out);

/**
 * # Safety
 * `ctrl` must be null or a handle from this library, not yet freed.
 */
void wbc_controller_free(struct WbcController *ctrl);

/**
 * Runs one IK tick toward the gripper targets. `head_rotation` may be null;
 * otherwise it is a 9-double row-major rotation tracked by the head cost.
 * On `WBC_STATUS_INFEASIBLE` the outputs hold a zero step and `q`.
 *
 * # Safety
 * `ctrl` must be a live handle; `q`, `dq_out` and `q_next_out` must point to
 * `len` doubles; `left` and `right` to 7 doubles.
 */
enum WbcStatus wbc_controller_step(struct WbcController *ctrl,
                                   const double *q,
                                   size_t len,
                                   const double *left,
                                   const double *right,
                                   const double *head_rotation,
                                   double dt,
                                   double *dq_out,
                                   double *q_next_out);

/**
 * Head rotation whose z axis points from `head` to `target` while keeping
 * the current roll where possible. Returns `WBC_STATUS_DEGENERATE` when the
 * target coincides with the head.
 *
 * # Safety
 * `head` and `target` must point to 3 doubles, `current` and `out` to 9.
 */
enum WbcStatus wbc_look_at_rotation(const double *head,
                                    const double *current,
                                    const double *target,
                                    double *out);

/**
 * Runs a bundled scenario (by name) or a scenario JSON document and writes
 * the trajectory CSV and metrics JSON to the given paths (either may be
 * null). `violations_out`, when non-null, receives the violation count.
 * Returns `WBC_STATUS_VIOLATION` when constraints were violated.
 *
 * # Safety
 * String arguments must be null (paths only) or NUL-terminated.
 */
enum WbcStatus wbc_run_scenario(const char *scenario,
                                const char *csv_path,
                                const char *metrics_path,
                                size_t *violations_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WBC_H */
