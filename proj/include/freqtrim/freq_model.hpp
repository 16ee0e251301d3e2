#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

// Resistance -> f01max calibration and the small frequency-domain utilities
// built on it.
namespace freqtrim {

struct FrequencyPoint {
    double resistance = 0.0;  // ohm
    double frequency = 0.0;   // MHz
};

/// f = beta * R^-alpha.
struct PowerLawModel {
    double beta = 0.0;            // MHz * ohm^alpha
    double alpha = 0.0;
    double residual_sigma = 0.0;  // MHz, linear residuals
    double r_min = 0.0;           // fit domain, ohm
    double r_max = 0.0;

    void validate() const;
};

/// Least squares on (log R, log f). Two points give the exact interpolating
/// law; residual_sigma is the population sigma of f - predict_f(R).
PowerLawModel fit_power_law(std::span<const FrequencyPoint> points);

double predict_f(const PowerLawModel& model, double resistance);
double invert_R(const PowerLawModel& model, double frequency);

struct TargetAssignment {
    double target_resistance = 0.0;
    double design_resistance = 0.0;  // invert_R(f_design)
    bool within_domain = true;       // design_resistance inside [r_min, r_max]
};

/// R_T = invert_R(f_design) * (1 - aging_budget).
TargetAssignment assign_target_R(const PowerLawModel& model, double f_design,
                                 double aging_budget = 0.02);

/// alpha * f * sigma_R_rel: first-order propagation of a relative resistance
/// spread through the power law.
double freq_equiv_sigma(const PowerLawModel& model, double f_pred, double sigma_r_rel);

/// Independently fitted power law per time segment.
struct SegmentedPowerLaw {
    std::vector<double> breakpoints;  // hr, strictly increasing
    std::vector<double> exponents;
    std::vector<double> amplitudes;
    std::vector<std::size_t> segment_counts;
    double sse = 0.0;                   // total squared log residual
    double continuity_residual = 0.0;   // max |log jump| at the breakpoints

    std::size_t segment_of(double t) const;
    double evaluate(double t) const;
};

struct SegmentedFitOptions {
    std::size_t changepoints = 2;    // used in auto mode
    std::size_t grid_size = 50;      // log-spaced candidates per breakpoint
    std::size_t min_points = 3;      // per segment
};

/// Given breakpoints: per-segment log-log fit. Without: breakpoints are the
/// log-spaced grid tuple whose continuous broken-line fit has the least total
/// squared log residual, then each segment is fitted on its own.
SegmentedPowerLaw fit_segmented_power_law(std::span<const double> t_hr,
                                          std::span<const double> delta_r,
                                          std::optional<std::vector<double>> breakpoints,
                                          const SegmentedFitOptions& options = {});

struct GaussianFit {
    double mu = 0.0;
    double sigma = 0.0;
    std::size_t sample_count = 0;
};

/// Maximum-likelihood (population) estimate. Needs at least two samples.
GaussianFit fit_gaussian(std::span<const double> samples);

/// Root-sum-square of independent spreads.
double compose_sigma(std::span<const double> components);

/// Extra pre-cooldown spread that closes the empirical budget.
inline constexpr double kDefaultPreCooldownSigmaMhz = 10.5;

/// 1 / (T1 * 2 pi f) with T1 in microseconds and f in GHz.
double loss_tangent(double t1_us, double f_ghz);

double tunability(double f_max_mhz, double f_min_mhz);

}  // namespace freqtrim
