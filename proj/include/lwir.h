/* C interface to the LWIR atmospheric-compensation library.
 *
 * Every function returns an lwir_status; on failure the message is available
 * from lwir_last_error() on the same thread until the next call. Handles are
 * opaque and must be released with their _free function (NULL is accepted).
 * Spectra are arrays of lwir_band_count() doubles on the standard grid.
 */
#ifndef LWIR_H
#define LWIR_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define LWIR_API __declspec(dllexport)
#else
#define LWIR_API __attribute__((visibility("default")))
#endif

typedef enum lwir_status {
  LWIR_OK = 0,
  LWIR_ERR_CONFIG = 2,
  LWIR_ERR_DATA = 3,
  LWIR_ERR_NUMERICAL = 4,
  LWIR_ERR_DOMAIN = 5,
  LWIR_ERR_IO = 6,
  LWIR_ERR_INVALID_ARGUMENT = 7,
  LWIR_ERR_INTERNAL = 8
} lwir_status;

/* Matches the on-disk component order. */
typedef enum lwir_component {
  LWIR_TAU = 0,
  LWIR_DOWN = 1,
  LWIR_UP = 2,
  LWIR_EMIT = 3,
  LWIR_TOTAL = 4
} lwir_component;

typedef struct lwir_dataset lwir_dataset;
typedef struct lwir_model lwir_model;
typedef struct lwir_options lwir_options;

typedef struct lwir_record_info {
  double range_m;
  double angle_deg;
  int32_t material_id; /* -1 when unlabelled */
  double temperature;  /* NaN when unlabelled */
  int32_t labeled;
  int32_t field_like;
  int32_t has_component[5];
} lwir_record_info;

LWIR_API const char* lwir_version(void);
LWIR_API const char* lwir_last_error(void);
LWIR_API const char* lwir_status_string(lwir_status s);

/* ---- spectral core ---------------------------------------------------- */
LWIR_API size_t lwir_band_count(void);
LWIR_API lwir_status lwir_wavelengths(double* out_um);
LWIR_API lwir_status lwir_planck(double wavelength_um, double temperature_k, double* out);
LWIR_API lwir_status lwir_inverse_planck(double wavelength_um, double radiance, double* out_k);

/* ((L - L_up) / tau - L_down) / (B(T) - L_down) per band. valid[i] is 0 for
 * flagged bands (tau < 1e-6 or a vanishing denominator), whose value is NaN. */
LWIR_API lwir_status lwir_invert_emissivity(const double* total, const double* down, const double* up,
                                            const double* tau, double temperature_k, double* eps_out,
                                            uint8_t* valid_out);

/* Grid search over t_min:t_max:step. criterion is "mae" or "mae+norm";
 * window 0 scores every band, 1 only 8.5-12.5 um. eps_out may be NULL. */
LWIR_API lwir_status lwir_grid_search_temperature(const double* total, const double* down, const double* up,
                                                  const double* tau, double eps_bar, double t_min, double t_max,
                                                  double t_step, const char* criterion, int window, double* t_hat,
                                                  double* eps_out);

/* ---- datasets --------------------------------------------------------- */
LWIR_API lwir_status lwir_dataset_read(const char* path, lwir_dataset** out);
LWIR_API lwir_status lwir_dataset_write(const lwir_dataset* ds, const char* path);
LWIR_API void lwir_dataset_free(lwir_dataset* ds);
LWIR_API lwir_status lwir_dataset_size(const lwir_dataset* ds, size_t* out);
LWIR_API lwir_status lwir_dataset_record(const lwir_dataset* ds, size_t index, lwir_record_info* out);
/* LWIR_ERR_DATA when the record does not carry the component. */
LWIR_API lwir_status lwir_dataset_spectrum(const lwir_dataset* ds, size_t index, lwir_component c, double* out);
LWIR_API lwir_status lwir_dataset_emissivity(const lwir_dataset* ds, int32_t material_id, double* out);

/* ---- trained models --------------------------------------------------- */
LWIR_API lwir_status lwir_model_load(const char* path, lwir_model** out);
LWIR_API void lwir_model_free(lwir_model* m);
LWIR_API lwir_status lwir_model_parameter_count(const lwir_model* m, size_t* out);
/* Physical-unit predictions for n geometries; each output holds
 * n * lwir_band_count() doubles, row per geometry. */
LWIR_API lwir_status lwir_model_predict(const lwir_model* m, const double* range_m, const double* angle_deg, size_t n,
                                        int workers, double* down, double* up, double* tau);

/* ---- pipeline commands ------------------------------------------------ */
/* Keys: seed, force, workers, mode, epochs, from_checkpoint, criterion,
 * t_grid, eps_bar. Unknown keys are LWIR_ERR_CONFIG. */
LWIR_API lwir_status lwir_options_new(lwir_options** out);
LWIR_API void lwir_options_free(lwir_options* o);
LWIR_API lwir_status lwir_options_set(lwir_options* o, const char* key, const char* value);

/* Progress lines from the commands. Process-wide; NULL disables. */
typedef void (*lwir_log_fn)(const char* line, void* user);
LWIR_API void lwir_set_log_callback(lwir_log_fn fn, void* user);

/* config_path may be NULL or "" for the built-in defaults. opts may be NULL. */
LWIR_API lwir_status lwir_cmd_simulate(const char* config_path, const char* out_dir, const lwir_options* opts);
LWIR_API lwir_status lwir_cmd_train(const char* config_path, const char* data_dir, const char* out_dir,
                                    const lwir_options* opts);
LWIR_API lwir_status lwir_cmd_retrieve(const char* checkpoint, const char* data, const char* out_dir,
                                       const lwir_options* opts);
LWIR_API lwir_status lwir_cmd_evaluate(const char* checkpoint, const char* data_dir, const char* out_dir,
                                       const lwir_options* opts);

#ifdef __cplusplus
}
#endif

#endif /* LWIR_H */
