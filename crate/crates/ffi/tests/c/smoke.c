#include <math.h>
#include <stdio.h>
#include <string.h>

#include "otfs_outage.h"

#define CHECK(cond)                                                   \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__, __LINE__, #cond); \
      return 1;                                                       \
    }                                                                 \
  } while (0)

int main(void) {
  OtfsGrid grid = {16, 16, 15e3, 1};
  OtfsChannel *ch = NULL;
  CHECK(otfs_channel_sample(5, 8, 8, 42, &ch) == OTFS_STATUS_OK);

  size_t count = 0;
  CHECK(otfs_channel_path_count(ch, &count) == OTFS_STATUS_OK && count == 5);

  double cap = 0.0;
  CHECK(otfs_capacity(&grid, ch, 10.0, &cap) == OTFS_STATUS_OK);
  CHECK(cap > 0.0 && cap < 10.0);

  OtfsPropositionResult r;
  CHECK(otfs_verify_propositions(&grid, ch, 10.0, &r) == OTFS_STATUS_OK);
  CHECK(r.prop1_holds == 1 && r.prop2_holds == 1 && r.chain_holds == 1);
  otfs_channel_free(ch);

  double h = 0.0;
  CHECK(otfs_binary_entropy(0.11, &h) == OTFS_STATUS_OK);
  CHECK(fabs(h - 0.49992) < 1e-4);

  CHECK(otfs_binary_entropy(2.0, &h) == OTFS_STATUS_INVALID_ARGUMENT);
  CHECK(strlen(otfs_last_error_message()) > 0);

  OtfsOutageParams params = {grid, 5, 8, 8, 1.0, 0.05, 200, 1};
  OtfsOutageEstimate est;
  CHECK(otfs_monte_carlo_outage(&params, &est) == OTFS_STATUS_OK);
  CHECK(est.trials == 200 && est.ci_low <= est.p_hat && est.p_hat <= est.ci_high);

  printf("smoke ok: capacity %.6f, p_hat %.4f, bound %.4f\n", cap, est.p_hat, est.lower_bound);
  return 0;
}
