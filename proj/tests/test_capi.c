/* Exercises the C interface from a C translation unit. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "kinkcoh/kinkcoh.h"

static int failures = 0;

#define EXPECT(cond)                                                 \
  do {                                                               \
    if (!(cond)) {                                                   \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                    \
    }                                                                \
  } while (0)

#define N 24

int main(void) {
  kc_model* model = NULL;
  kc_equilibrium* eq = NULL;
  kc_modes* modes = NULL;
  kc_couplings* cpl = NULL;
  kc_couplings* loaded = NULL;
  double x[N], grad[N], freqs[N];
  double energy = 0, gnorm = 0, min_eig = 0, a = 0, b = 0;
  int iters = 0, high = -1, low = -1, flags[N];
  size_t n3 = 0, n4 = 0, n3b = 0, n4b = 0;
  char path[256];
  char* text = NULL;

  EXPECT(strlen(kc_version()) > 0);

  EXPECT(kc_model_phi4(0, 0.6, -0.28, 1, &model) == KC_ERR_VALIDATION);
  EXPECT(strlen(kc_last_error()) > 0);
  EXPECT(kc_model_from_json("{\"kind\": \"phi4\", \"n\": 24, \"g\": 0.6, \"k\": -0.28, \"bogus\": 1}", &model) == KC_ERR_VALIDATION);
  EXPECT(strstr(kc_last_error(), "bogus") != NULL);

  EXPECT(kc_model_phi4(N, 0.6, -0.28, 1, &model) == KC_OK);
  EXPECT(kc_model_size(model) == N);
  EXPECT(kc_gradient(model, x, N - 1, grad) == KC_ERR_VALIDATION);

  EXPECT(kc_relax(model, NULL, 0, 1e-10, &eq) == KC_OK);
  EXPECT(kc_equilibrium_positions(eq, x, N) == KC_OK);
  EXPECT(kc_equilibrium_info(eq, &energy, &gnorm, &min_eig, &iters) == KC_OK);
  EXPECT(gnorm <= 1e-10);
  EXPECT(min_eig > 0);
  EXPECT(kc_gradient(model, x, N, grad) == KC_OK);
  for (int i = 0; i < N; ++i) EXPECT(fabs(grad[i]) <= 1e-9);
  EXPECT(kc_potential_energy(model, x, N, &a) == KC_OK);
  EXPECT(fabs(a - energy) <= 1e-12 * fabs(energy));
  /* Antisymmetric kink about the chain centre. */
  EXPECT(fabs(x[0] + x[N - 1]) <= 1e-8);

  EXPECT(kc_modes_compute(model, eq, 3.0, &modes) == KC_OK);
  EXPECT(kc_modes_count(modes) == N);
  EXPECT(kc_modes_frequencies(modes, freqs, N) == KC_OK);
  for (int i = 1; i < N; ++i) EXPECT(freqs[i] <= freqs[i - 1]);
  EXPECT(kc_modes_roles(modes, &high, &low) == KC_OK);
  EXPECT(high >= 0 && low >= 0 && high != low);
  EXPECT(freqs[high] > freqs[low]);
  EXPECT(kc_modes_localized(modes, flags, N) == KC_OK);
  EXPECT(kc_modes_vector(modes, N, x, N) == KC_ERR_VALIDATION);

  EXPECT(kc_couplings_compute(model, eq, modes, -1.0, &cpl) == KC_OK);
  EXPECT(kc_couplings_counts(cpl, &n3, &n4) == KC_OK);
  EXPECT(n3 > 0 && n4 > 0);
  snprintf(path, sizeof path, "capi_couplings_%d.bin", rand());
  EXPECT(kc_couplings_save(cpl, path) == KC_OK);
  EXPECT(kc_couplings_load(path, &loaded) == KC_OK);
  EXPECT(kc_couplings_counts(loaded, &n3b, &n4b) == KC_OK);
  EXPECT(n3 == n3b && n4 == n4b);
  EXPECT(kc_couplings_cubic(cpl, high, high, low, &a) == KC_OK);
  EXPECT(kc_couplings_cubic(loaded, low, high, high, &b) == KC_OK);
  EXPECT(a == b);
  EXPECT(kc_couplings_quartic(cpl, high, high, high, high, &a) == KC_OK);
  EXPECT(a != 0.0);
  remove(path);
  EXPECT(kc_couplings_load("no/such/file.bin", &loaded) == KC_ERR_IO);

  {
    double re[4] = {1, 0, 0, 0}, im[4] = {0, 0, 0, 0}, f = 0;
    double half_re[4] = {0.5, 0.5, 0.5, 0.5};
    EXPECT(kc_fidelity(re, im, re, im, 2, &f) == KC_OK);
    EXPECT(fabs(f - 1.0) <= 1e-14);
    EXPECT(kc_fidelity(re, im, half_re, im, 2, &f) == KC_OK);
    EXPECT(fabs(f - sqrt(0.5)) <= 1e-14);
  }

  EXPECT(kc_check_config("no/such/config.json") != KC_OK);
  EXPECT(kc_report("no/such/dir", &text) == KC_ERR_IO);
  EXPECT(text == NULL);

  kc_couplings_free(loaded);
  kc_couplings_free(cpl);
  kc_modes_free(modes);
  kc_equilibrium_free(eq);
  kc_model_free(model);
  kc_model_free(NULL);

  if (failures) fprintf(stderr, "%d failure(s)\n", failures);
  else printf("C API checks passed\n");
  return failures ? 1 : 0;
}
