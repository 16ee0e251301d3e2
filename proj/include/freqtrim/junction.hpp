#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "freqtrim/random.hpp"

// Room-temperature resistance model of a tunable transmon's junction pair,
// lumped at qubit level: fabrication spread, pulse increments, post-pulse
// relaxation and day-scale aging.
namespace freqtrim {

/// As-fabricated resistance distribution. `mean_offset_frac` is relative to
/// the design resistance (not to the tuning target).
struct FabricationModel {
    double design_resistance = 0.0;  // ohm
    double mean_offset_frac = -0.1047;
    double sigma_frac = 0.035;
    // Per-qubit relaxation fraction drawn at fabrication time.
    double relax_mean = 0.0289;
    double relax_sigma = 0.0030;

    void validate() const;
    double mean_resistance() const { return design_resistance * (1.0 + mean_offset_frac); }
};

/// Normalized relaxation shape s(t): continuous piecewise power law in hours,
/// glued at the breakpoints by amplitude matching, with s(0) = 0 and
/// s(probe_delay) = 1.
class RelaxationProfile {
public:
    RelaxationProfile();
    RelaxationProfile(std::vector<double> breakpoints_hr, std::vector<double> exponents,
                      double probe_delay_hr);

    double shape(double t_hr) const;
    /// Un-normalized branch value A_k * t^alpha_k for regime k.
    double regime_value(std::size_t regime, double t_hr) const;
    std::size_t regime_of(double t_hr) const;

    const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
    const std::vector<double>& exponents() const noexcept { return exponents_; }
    double probe_delay() const noexcept { return probe_delay_; }

private:
    std::vector<double> breakpoints_;
    std::vector<double> exponents_;
    std::vector<double> amplitudes_;
    double probe_delay_;
    double norm_;
};

struct JunctionState {
    double resistance = 0.0;                // true value, ohm
    double relax_fraction = 0.0;            // rho_i
    double resistance_at_last_pulse = 0.0;  // ohm
    double hours_since_last_pulse = 0.0;
    std::int64_t pulse_count = 0;
};

enum class StepDistribution { exponential, uniform, constant };

/// Per-pulse resistance increment. Bounds truncate the exponential law and
/// set the support of the uniform law (default [0, 2*mean]).
struct StepModel {
    StepDistribution kind = StepDistribution::exponential;
    double mean_step = 1.9;  // ohm
    std::optional<double> min_step;
    std::optional<double> max_step;

    void validate() const;
    double sample(Engine& engine) const;
};

struct MeasurementModel {
    double noise_sigma = 0.0;  // ohm

    void validate() const;
};

JunctionState sample_fabricated(const FabricationModel& fab, std::uint64_t seed);

JunctionState apply_pulse(const JunctionState& state, const StepModel& step, Engine& engine);
JunctionState apply_pulse(const JunctionState& state, const StepModel& step, std::uint64_t seed);

/// rho * r_stop * s(t). Throws Error(domain) for negative t, negative rho or
/// non-positive r_stop.
double relaxation_delta(const RelaxationProfile& profile, double rho, double r_stop, double t_hr);

/// Moves the clock forward. Junctions that were never pulsed do not drift.
JunctionState advance_time(const JunctionState& state, const RelaxationProfile& profile,
                           double dt_hr);

double measure_resistance(const JunctionState& state, const MeasurementModel& meas,
                          Engine& engine);
double measure_resistance(const JunctionState& state, const MeasurementModel& meas,
                          std::uint64_t seed);

}  // namespace freqtrim
