#include <math.h>
#include <stdio.h>
#include "wbc.h"

#define CHECK(expr)                                                   \
  do {                                                                \
    if (!(expr)) {                                                    \
      fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__, __LINE__, #expr); \
      return 1;                                                       \
    }                                                                 \
  } while (0)

int main(void) {
  WbcModel *model = NULL;
  CHECK(wbc_model_reference(&model) == WBC_STATUS_OK);
  size_t n = 0;
  CHECK(wbc_model_dof(model, &n) == WBC_STATUS_OK);
  CHECK(n == 25);

  double q[25], dq[25], q_next[25], left[7], right[7];
  CHECK(wbc_model_nominal_posture(model, q, n) == WBC_STATUS_OK);
  CHECK(wbc_model_frame_pose(model, q, n, "left_gripper", left) == WBC_STATUS_OK);
  CHECK(wbc_model_frame_pose(model, q, n, "right_gripper", right) == WBC_STATUS_OK);

  WbcController *ctrl = NULL;
  CHECK(wbc_controller_new(model, "laundry", &ctrl) == WBC_STATUS_OK);
  CHECK(wbc_controller_step(ctrl, q, n, left, right, NULL, 0.01, dq, q_next) == WBC_STATUS_OK);
  for (size_t i = 0; i < n; i++) CHECK(fabs(dq[i]) < 1e-9);

  char msg[128];
  CHECK(wbc_model_frame_pose(model, q, n, "nope", left) == WBC_STATUS_INVALID_ARGUMENT);
  CHECK(wbc_last_error(msg, sizeof msg) > 1);

  wbc_controller_free(ctrl);
  wbc_model_free(model);
  printf("ok %s\n", wbc_version());
  return 0;
}
