/*
 * freqtrim C API.
 *
 * Every call returns an ft_status. On failure ft_last_error() returns a
 * thread-local, human-readable message that stays valid until the next call
 * on the same thread. Handles are opaque and released with their *_free
 * function; passing NULL to a *_free function is a no-op.
 *
 * Units: resistance in ohm, frequency in MHz, time in hours unless a name
 * says otherwise.
 */
#ifndef FREQTRIM_H
#define FREQTRIM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(FREQTRIM_BUILDING_LIBRARY)
#    define FREQTRIM_API __declspec(dllexport)
#  else
#    define FREQTRIM_API __declspec(dllimport)
#  endif
#else
#  define FREQTRIM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ft_status {
    FT_OK = 0,
    FT_ERR_INVALID_ARGUMENT = 1, /* NULL pointer, bad size, bad enum */
    FT_ERR_INVALID_MODEL = 2,
    FT_ERR_DOMAIN = 3,
    FT_ERR_FIT = 4,
    FT_ERR_CONTROLLER = 5,       /* pulse limit reached */
    FT_ERR_CONFIG = 6,
    FT_ERR_INFEASIBLE = 7,
    FT_ERR_SEARCH = 8,           /* unit-cell search failed */
    FT_ERR_PARSE = 9,
    FT_ERR_IO = 10,
    FT_ERR_INTERNAL = 99
} ft_status;

FREQTRIM_API const char* ft_version(void);
FREQTRIM_API const char* ft_last_error(void);
FREQTRIM_API const char* ft_status_name(ft_status status);

/* ---- frequency model --------------------------------------------------- */

typedef struct ft_power_law {
    double beta;               /* MHz * ohm^alpha */
    double alpha;
    double residual_sigma_mhz;
    double r_min;
    double r_max;
} ft_power_law;

typedef struct ft_target_assignment {
    double target_resistance;
    double design_resistance;
    int within_domain;
} ft_target_assignment;

FREQTRIM_API ft_status ft_power_law_fit(const double* resistance, const double* frequency,
                                        size_t count, ft_power_law* out);
/* CSV with header resistance_ohm,f01max_mhz. */
FREQTRIM_API ft_status ft_power_law_fit_file(const char* csv_path, ft_power_law* out,
                                             size_t* point_count);
FREQTRIM_API ft_status ft_calibration_load(const char* json_path, ft_power_law* out);
FREQTRIM_API ft_status ft_calibration_save(const char* json_path, const ft_power_law* model);

FREQTRIM_API ft_status ft_predict_f(const ft_power_law* model, double resistance, double* out);
FREQTRIM_API ft_status ft_invert_r(const ft_power_law* model, double frequency, double* out);
FREQTRIM_API ft_status ft_assign_target(const ft_power_law* model, double f_design,
                                        double aging_budget, ft_target_assignment* out);
FREQTRIM_API ft_status ft_freq_equiv_sigma(const ft_power_law* model, double f_pred,
                                           double sigma_r_rel, double* out);
FREQTRIM_API ft_status ft_compose_sigma(const double* components, size_t count, double* out);
FREQTRIM_API ft_status ft_loss_tangent(double t1_us, double f_ghz, double* out);
FREQTRIM_API ft_status ft_tunability(double f_max, double f_min, double* out);

#define FT_MAX_SEGMENTS 8

typedef struct ft_segmented_fit {
    size_t segments;
    double breakpoints[FT_MAX_SEGMENTS - 1];
    double exponents[FT_MAX_SEGMENTS];
    double amplitudes[FT_MAX_SEGMENTS];
    size_t counts[FT_MAX_SEGMENTS];
    double sse;
    double continuity_residual;
} ft_segmented_fit;

/* breakpoint_count == 0 selects automatic changepoint search with
 * auto_changepoints breakpoints. */
FREQTRIM_API ft_status ft_fit_relaxation(const double* t_hr, const double* delta_ohm, size_t count,
                                         const double* breakpoints, size_t breakpoint_count,
                                         size_t auto_changepoints, ft_segmented_fit* out);
/* Pools every probe-after-pulse reading of a resistance log
 * (qubit_id,t_hr,resistance_ohm,phase) and fits it. */
FREQTRIM_API ft_status ft_fit_relaxation_log(const char* log_path, const double* breakpoints,
                                             size_t breakpoint_count, size_t auto_changepoints,
                                             ft_segmented_fit* out, size_t* point_count);

/* ---- tuning campaigns -------------------------------------------------- */

typedef enum ft_step_kind {
    FT_STEP_EXPONENTIAL = 0,
    FT_STEP_UNIFORM = 1,
    FT_STEP_CONSTANT = 2
} ft_step_kind;

typedef struct ft_tuning_options {
    uint64_t seed;
    /* fabrication spread relative to the design resistance */
    double mean_offset_frac;
    double sigma_frac;
    /* per-qubit relaxation fraction law */
    double relax_mean;
    double relax_sigma;
    /* targeting: R_T = design * (1 - aging_budget), threshold = R_T / (1 + reserve) */
    double aging_budget;
    double reserve;
    /* > 0: use this stop threshold for every qubit (R_T = threshold * (1 + reserve)) */
    double fixed_threshold;
    /* controller */
    ft_step_kind step_kind;
    double mean_step;
    double noise_sigma;
    double probe_delay_hr;
    int64_t max_pulses;
    int parallel;
    unsigned threads;
} ft_tuning_options;

FREQTRIM_API void ft_tuning_options_default(ft_tuning_options* options);

typedef struct ft_campaign ft_campaign;

typedef struct ft_tune_record {
    const char* qubit_id; /* owned by the campaign */
    double r_untuned;
    double r_target;
    double threshold;
    double r_before_last_pulse;
    double r_last_pulse;
    double r_tuned;
    int64_t pulses;
    int already_above;
} ft_tune_record;

/* Statistics fields that need pulsed qubits are NaN when there are none. */
typedef struct ft_campaign_report {
    size_t count;
    size_t already_above;
    double precision_mean_frac;
    double precision_sigma_frac;
    double precision_min_frac;
    double precision_max_frac;
    double untuned_mean_frac;
    double untuned_sigma_frac;
    double overshoot_mean;
    double overshoot_sigma;
    double relax_shift_mean;
    double relax_shift_sigma;
    double reserve_mean;
    double reserve_sigma;
    double pulses_mean;
    double max_tuning_distance;
} ft_campaign_report;

/* Fabricates one junction per qubit around its design resistance and tunes
 * them in order. */
FREQTRIM_API ft_status ft_campaign_simulate(const ft_tuning_options* options,
                                            const char* const* qubit_ids,
                                            const double* design_resistance, size_t count,
                                            ft_campaign** out);
/* Same, reading qubit_id,design_resistance_ohm from a CSV file. */
FREQTRIM_API ft_status ft_campaign_simulate_file(const ft_tuning_options* options,
                                                 const char* design_csv, ft_campaign** out);
FREQTRIM_API ft_status ft_campaign_load(const char* csv_path, ft_campaign** out);
FREQTRIM_API ft_status ft_campaign_save(const ft_campaign* campaign, const char* csv_path);
/* Only for simulated campaigns: writes the resistance log with extra
 * noiseless readings at monitor_hours after each qubit's last pulse. */
FREQTRIM_API ft_status ft_campaign_write_log(const ft_campaign* campaign, const char* csv_path,
                                             const double* monitor_hours, size_t monitor_count);
FREQTRIM_API size_t ft_campaign_size(const ft_campaign* campaign);
FREQTRIM_API ft_status ft_campaign_record(const ft_campaign* campaign, size_t index,
                                          ft_tune_record* out);
FREQTRIM_API ft_status ft_campaign_report_stats(const ft_campaign* campaign,
                                                ft_campaign_report* out);
FREQTRIM_API void ft_campaign_free(ft_campaign* campaign);

FREQTRIM_API ft_status ft_compute_threshold(double target_resistance, double reserve, double* out);

/* ---- lattices ---------------------------------------------------------- */

typedef struct ft_lattice ft_lattice;

/* measured may be NULL; NaN entries mark missing measurements. */
FREQTRIM_API ft_status ft_lattice_create(size_t rows, size_t cols, const double* design_f,
                                         const double* measured_f, ft_lattice** out);
/* Design JSON: {rows, cols, base_frequency_mhz, offsets_mhz, design_window_mhz
 * [, measured_offsets_mhz]}. */
FREQTRIM_API ft_status ft_lattice_load(const char* json_path, ft_lattice** out);
FREQTRIM_API ft_status ft_lattice_save(const ft_lattice* lattice, const char* json_path);
FREQTRIM_API void ft_lattice_free(ft_lattice* lattice);
FREQTRIM_API size_t ft_lattice_rows(const ft_lattice* lattice);
FREQTRIM_API size_t ft_lattice_cols(const ft_lattice* lattice);
FREQTRIM_API size_t ft_lattice_qubits(const ft_lattice* lattice);
FREQTRIM_API int ft_lattice_has_measurements(const ft_lattice* lattice);
/* measured is NaN when missing. */
FREQTRIM_API ft_status ft_lattice_frequency(const ft_lattice* lattice, size_t qubit,
                                            double* design, double* measured);
FREQTRIM_API ft_status ft_lattice_design_window(const ft_lattice* lattice, double* lo, double* hi);

typedef struct ft_detuning_report ft_detuning_report;

typedef struct ft_edge_detuning {
    size_t a;
    size_t b;
    size_t modulated;
    double signed_mhz; /* f(b) - f(a) */
    double abs_mhz;
    int tie;
    int in_window;
} ft_edge_detuning;

typedef struct ft_detuning_summary {
    size_t edges;
    double median_abs;
    double min_abs;
    double max_abs;
    size_t out_of_window;
    size_t ties;
} ft_detuning_summary;

/* use_measured != 0 uses measured frequencies (all must be present). */
FREQTRIM_API ft_status ft_lattice_detunings(const ft_lattice* lattice, int use_measured,
                                            double window_lo, double window_hi,
                                            ft_detuning_report** out);
FREQTRIM_API ft_status ft_detunings_from(const ft_lattice* lattice, const double* frequencies,
                                         double window_lo, double window_hi,
                                         ft_detuning_report** out);
FREQTRIM_API ft_status ft_report_summary(const ft_detuning_report* report,
                                         ft_detuning_summary* out);
FREQTRIM_API ft_status ft_report_edge(const ft_detuning_report* report, size_t index,
                                      ft_edge_detuning* out);
/* counts must hold one int per qubit. */
FREQTRIM_API ft_status ft_report_modulation(const ft_detuning_report* report, int limit,
                                            int* counts, size_t count_capacity, int* max_count,
                                            int* valid);
FREQTRIM_API ft_status ft_report_deviation(const ft_detuning_report* measured,
                                           const ft_detuning_report* design, double* mean,
                                           double* sigma);
FREQTRIM_API void ft_report_free(ft_detuning_report* report);

typedef struct ft_gaussian_fit {
    double mu;
    double sigma;
    size_t sample_count;
} ft_gaussian_fit;

FREQTRIM_API ft_status ft_fit_gaussian(const double* samples, size_t count, ft_gaussian_fit* out);
/* chips[i] points at chip_sizes[i] deviations (measured - design). */
FREQTRIM_API ft_status ft_spread_after_centering(const double* const* chips,
                                                 const size_t* chip_sizes, size_t chip_count,
                                                 double mean_design_frequency,
                                                 ft_gaussian_fit* fit, double* sigma_percent);
FREQTRIM_API ft_status ft_detuning_error_sigma(double sigma_f, double* out);

typedef struct ft_parking_options {
    double window_lo;
    double window_hi;
    double max_park;
    double step;
    int allow_upward;
} ft_parking_options;

typedef struct ft_parking_plan {
    int feasible;
    size_t parked;
    double max_abs_offset;
    double sum_abs_offset;
    size_t violating_edges; /* out of window before parking */
} ft_parking_plan;

/* Parks the measured frequencies, or the design frequencies when the lattice
 * carries no measurements at all. offsets (one per qubit, may be NULL)
 * receive the plan. violating_a/b (may be NULL) receive up to
 * violating_capacity edges. An infeasible search is not an error: check
 * plan->feasible. */
FREQTRIM_API ft_status ft_lattice_park(const ft_lattice* lattice, const ft_parking_options* options,
                                       double* offsets, ft_parking_plan* plan, size_t* violating_a,
                                       size_t* violating_b, size_t violating_capacity);

/* ---- yield ------------------------------------------------------------- */

typedef struct ft_unit_cell {
    double offsets[9]; /* row-major 3x3, MHz */
    double base_frequency;
    double window_lo;
    double window_hi;
} ft_unit_cell;

FREQTRIM_API ft_status ft_unit_cell_generate(double window_lo, double window_hi, uint64_t seed,
                                             ft_unit_cell* out);
FREQTRIM_API ft_status ft_unit_cell_violations(const ft_unit_cell* cell, double window_lo,
                                               double window_hi, size_t* violations);
/* 3x3 lattice (design frequencies) to unit cell. */
FREQTRIM_API ft_status ft_unit_cell_from_lattice(const ft_lattice* lattice, ft_unit_cell* out);
FREQTRIM_API ft_status ft_tile(const ft_unit_cell* cell, size_t m, size_t n, ft_lattice** out);

typedef struct ft_yield_config {
    double sigma_mhz;
    double window_lo;
    double window_hi;
    size_t trials;
    uint64_t seed;
    unsigned threads; /* 0 = hardware concurrency */
} ft_yield_config;

typedef struct ft_yield_result {
    double yield;
    double ci_lo;
    double ci_hi;
    size_t passes;
    size_t trials;
    size_t qubits;
} ft_yield_result;

FREQTRIM_API ft_status ft_yield(const ft_lattice* lattice, const ft_yield_config* config,
                                ft_yield_result* out);
FREQTRIM_API ft_status ft_wafer_projection(const ft_yield_result* result, long dice, long* chips,
                                           long* qubits);
/* Writes qubits,sigma_mhz,yield,ci_lo,ci_hi rows; sigmas[i] pairs with results[i]. */
FREQTRIM_API ft_status ft_yield_table_save(const char* csv_path, const ft_yield_result* results,
                                           const double* sigmas, size_t count);

/* ---- run bookkeeping --------------------------------------------------- */

FREQTRIM_API ft_status ft_format_fixed(double value, int decimals, char* buffer, size_t capacity);
FREQTRIM_API ft_status ft_file_digest(const char* path, char* buffer, size_t capacity);
/* config_json must be a JSON object (or NULL). Inputs are digested. */
FREQTRIM_API ft_status ft_manifest_write(const char* json_path, const char* command,
                                         const char* config_json, int has_seed, uint64_t seed,
                                         const char* const* input_paths, size_t input_count);

#ifdef __cplusplus
}
#endif

#endif /* FREQTRIM_H */
