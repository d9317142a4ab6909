/* C interface to the kink coherence simulator.
 *
 * Objects are opaque handles returned through an `out` parameter and
 * released with the matching kc_*_free. Every fallible call returns a
 * kc_status; on failure kc_last_error() describes the problem until the
 * next failing call on the same thread. Mode indices are 0-based here.
 * Strings handed out by the library are released with kc_string_free. */
#ifndef KINKCOH_H
#define KINKCOH_H

#include <stddef.h>
#include <stdint.h>

#if defined(KINKCOH_BUILDING_LIBRARY)
#define KC_API __attribute__((visibility("default")))
#else
#define KC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum kc_status {
  KC_OK = 0,
  KC_ERR_INTERNAL = 1,
  KC_ERR_VALIDATION = 2,
  KC_ERR_NUMERICAL = 3,
  KC_ERR_IO = 4
} kc_status;

typedef struct kc_model kc_model;
typedef struct kc_equilibrium kc_equilibrium;
typedef struct kc_modes kc_modes;
typedef struct kc_couplings kc_couplings;

KC_API const char* kc_version(void);
KC_API const char* kc_last_error(void);
KC_API void kc_string_free(char* s);

/* ---- models ---- */

/* `json` is a "model" section: kind, n, g or g_profile, a0, k, g0, s,
 * boundary. */
KC_API kc_status kc_model_from_json(const char* json, kc_model** out);
KC_API kc_status kc_model_phi4(size_t n, double g, double k, int sector, kc_model** out);
KC_API kc_status kc_model_sine_gordon(size_t n, double g, int winding, kc_model** out);
KC_API void kc_model_free(kc_model* model);
KC_API size_t kc_model_size(const kc_model* model);

KC_API kc_status kc_potential_energy(const kc_model* model, const double* x, size_t n, double* energy);
KC_API kc_status kc_gradient(const kc_model* model, const double* x, size_t n, double* grad);
/* center <= 0 selects the chain centre. */
KC_API kc_status kc_continuum_seed(const kc_model* model, double center, double* x, size_t n);

/* ---- equilibrium ---- */

/* seed == NULL relaxes from the continuum seed at the chain centre. */
KC_API kc_status kc_relax(const kc_model* model, const double* seed, size_t n, double tol, kc_equilibrium** out);
KC_API void kc_equilibrium_free(kc_equilibrium* eq);
KC_API kc_status kc_equilibrium_positions(const kc_equilibrium* eq, double* x, size_t n);
KC_API kc_status kc_equilibrium_info(const kc_equilibrium* eq, double* energy, double* grad_norm,
                                     double* min_hessian_eig, int* iterations);

/* ---- normal modes ---- */

KC_API kc_status kc_modes_compute(const kc_model* model, const kc_equilibrium* eq, double gap_factor,
                                  kc_modes** out);
KC_API void kc_modes_free(kc_modes* modes);
KC_API size_t kc_modes_count(const kc_modes* modes);
/* Descending frequencies. */
KC_API kc_status kc_modes_frequencies(const kc_modes* modes, double* freqs, size_t n);
KC_API kc_status kc_modes_vector(const kc_modes* modes, int mode, double* v, size_t n);
/* flags[j] = 1 for gap-separated modes. */
KC_API kc_status kc_modes_localized(const kc_modes* modes, int* flags, size_t n);
KC_API kc_status kc_modes_roles(const kc_modes* modes, int* high, int* low);

/* ---- couplings ---- */

/* threshold < 0 selects the default relative threshold. */
KC_API kc_status kc_couplings_compute(const kc_model* model, const kc_equilibrium* eq, const kc_modes* modes,
                                      double threshold, kc_couplings** out);
KC_API kc_status kc_couplings_load(const char* path, kc_couplings** out);
KC_API kc_status kc_couplings_save(const kc_couplings* c, const char* path);
KC_API void kc_couplings_free(kc_couplings* c);
KC_API kc_status kc_couplings_counts(const kc_couplings* c, size_t* n_cubic, size_t* n_quartic);
KC_API kc_status kc_couplings_cubic(const kc_couplings* c, int i, int j, int k, double* value);
KC_API kc_status kc_couplings_quartic(const kc_couplings* c, int i, int j, int k, int l, double* value);

/* ---- quantum ---- */

/* Uhlmann fidelity of two dim x dim density matrices given as row-major
 * real and imaginary parts. */
KC_API kc_status kc_fidelity(const double* rho_re, const double* rho_im, const double* chi_re,
                             const double* chi_im, size_t dim, double* out);

/* ---- pipeline ---- */

typedef void (*kc_log_fn)(const char* line, void* user);

typedef struct kc_run_options {
  int force;
  /* Comma-separated stage names, NULL or "" for the configured list. */
  const char* stages;
  /* Replaces output_dir from the config when non-NULL. */
  const char* output_dir;
  int has_seed_override;
  uint64_t seed_override;
  /* Receives one progress line at a time; may be NULL. */
  kc_log_fn log;
  void* log_user;
} kc_run_options;

KC_API void kc_run_options_init(kc_run_options* opts);
/* Parses and validates a config file without running anything. */
KC_API kc_status kc_check_config(const char* config_path);
KC_API kc_status kc_run_config(const char* config_path, const kc_run_options* opts);
/* *text receives the report; free it with kc_string_free. */
KC_API kc_status kc_report(const char* artifact_dir, char** text);

#ifdef __cplusplus
}
#endif

#endif /* KINKCOH_H */
