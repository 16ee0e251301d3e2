#include "freqtrim/junction.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "freqtrim/error.hpp"

namespace freqtrim {

namespace {

constexpr int kMaxRejections = 100'000;

bool finite(double v) { return std::isfinite(v); }

}  // namespace

void FabricationModel::validate() const {
    if (!finite(design_resistance) || design_resistance <= 0.0)
        throw Error(ErrorCode::invalid_model, "fabrication: design resistance must be positive");
    if (!finite(mean_offset_frac) || mean_offset_frac <= -1.0)
        throw Error(ErrorCode::invalid_model, "fabrication: mean offset must exceed -1");
    if (!finite(sigma_frac) || sigma_frac < 0.0)
        throw Error(ErrorCode::invalid_model, "fabrication: sigma_frac must be >= 0");
    if (!finite(relax_mean) || relax_mean < 0.0 || !finite(relax_sigma) || relax_sigma < 0.0)
        throw Error(ErrorCode::invalid_model, "fabrication: relaxation fraction law must be >= 0");
}

RelaxationProfile::RelaxationProfile()
    : RelaxationProfile({0.2, 2.0, 24.0}, {0.30, 0.24, 0.16, 0.11}, 5.0) {}

RelaxationProfile::RelaxationProfile(std::vector<double> breakpoints_hr,
                                     std::vector<double> exponents, double probe_delay_hr)
    : breakpoints_(std::move(breakpoints_hr)),
      exponents_(std::move(exponents)),
      probe_delay_(probe_delay_hr),
      norm_(1.0) {
    if (exponents_.size() != breakpoints_.size() + 1)
        throw Error(ErrorCode::invalid_model,
                    "relaxation profile: need exactly one more exponent than breakpoints");
    for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
        if (!finite(breakpoints_[i]) || breakpoints_[i] <= 0.0)
            throw Error(ErrorCode::invalid_model, "relaxation profile: breakpoints must be positive");
        if (i > 0 && breakpoints_[i] <= breakpoints_[i - 1])
            throw Error(ErrorCode::invalid_model,
                        "relaxation profile: breakpoints must be strictly increasing");
    }
    for (double a : exponents_) {
        if (!(a > 0.0 && a < 1.0))
            throw Error(ErrorCode::invalid_model, "relaxation profile: exponents must lie in (0, 1)");
    }
    if (!finite(probe_delay_) || probe_delay_ <= 0.0)
        throw Error(ErrorCode::invalid_model, "relaxation profile: probe delay must be positive");

    // A_{k+1} b_k^{a_{k+1}} = A_k b_k^{a_k}
    amplitudes_.assign(exponents_.size(), 1.0);
    for (std::size_t k = 0; k < breakpoints_.size(); ++k) {
        const double b = breakpoints_[k];
        amplitudes_[k + 1] = amplitudes_[k] * std::pow(b, exponents_[k] - exponents_[k + 1]);
    }
    norm_ = regime_value(regime_of(probe_delay_), probe_delay_);
}

std::size_t RelaxationProfile::regime_of(double t_hr) const {
    return static_cast<std::size_t>(
        std::lower_bound(breakpoints_.begin(), breakpoints_.end(), t_hr) - breakpoints_.begin());
}

double RelaxationProfile::regime_value(std::size_t regime, double t_hr) const {
    return amplitudes_.at(regime) * std::pow(t_hr, exponents_.at(regime));
}

double RelaxationProfile::shape(double t_hr) const {
    if (t_hr < 0.0 || !finite(t_hr)) throw Error(ErrorCode::domain, "relaxation: time must be >= 0");
    if (t_hr == 0.0) return 0.0;
    if (t_hr == probe_delay_) return 1.0;
    return regime_value(regime_of(t_hr), t_hr) / norm_;
}

void StepModel::validate() const {
    if (!finite(mean_step) || mean_step <= 0.0)
        throw Error(ErrorCode::invalid_model, "step model: mean step must be positive");
    if (min_step && (*min_step < 0.0 || !finite(*min_step)))
        throw Error(ErrorCode::invalid_model, "step model: lower bound must be >= 0");
    if (max_step && (!finite(*max_step) || *max_step <= min_step.value_or(0.0)))
        throw Error(ErrorCode::invalid_model, "step model: upper bound must exceed lower bound");
}

double StepModel::sample(Engine& engine) const {
    switch (kind) {
        case StepDistribution::constant:
            return mean_step;
        case StepDistribution::exponential: {
            std::exponential_distribution<double> dist(1.0 / mean_step);
            const double lo = min_step.value_or(0.0);
            const double hi = max_step.value_or(HUGE_VAL);
            for (int i = 0; i < kMaxRejections; ++i) {
                const double x = dist(engine);
                if (x > 0.0 && x >= lo && x <= hi) return x;
            }
            break;
        }
        case StepDistribution::uniform: {
            const double lo = min_step.value_or(0.0);
            const double hi = max_step.value_or(2.0 * mean_step);
            std::uniform_real_distribution<double> dist(lo, hi);
            for (int i = 0; i < kMaxRejections; ++i) {
                const double x = dist(engine);
                if (x > 0.0) return x;
            }
            break;
        }
    }
    throw Error(ErrorCode::invalid_model, "step model: bounds leave no positive support");
}

void MeasurementModel::validate() const {
    if (!finite(noise_sigma) || noise_sigma < 0.0)
        throw Error(ErrorCode::invalid_model, "measurement: noise sigma must be >= 0");
}

JunctionState sample_fabricated(const FabricationModel& fab, std::uint64_t seed) {
    fab.validate();
    JunctionState state;

    const double mu = fab.mean_resistance();
    const double sd = fab.design_resistance * fab.sigma_frac;
    if (sd == 0.0) {
        state.resistance = mu;
    } else {
        Engine engine(derive_seed(seed, stream::fabrication));
        std::normal_distribution<double> dist(mu, sd);
        double r = 0.0;
        for (int i = 0; i < kMaxRejections && r <= 0.0; ++i) r = dist(engine);
        if (r <= 0.0) throw Error(ErrorCode::invalid_model, "fabrication: no positive draw");
        state.resistance = r;
    }

    if (fab.relax_sigma == 0.0) {
        state.relax_fraction = fab.relax_mean;
    } else {
        Engine engine(derive_seed(seed, stream::relaxation));
        std::normal_distribution<double> dist(fab.relax_mean, fab.relax_sigma);
        double rho = -1.0;
        for (int i = 0; i < kMaxRejections && rho < 0.0; ++i) rho = dist(engine);
        state.relax_fraction = std::max(rho, 0.0);
    }

    state.resistance_at_last_pulse = state.resistance;
    return state;
}

JunctionState apply_pulse(const JunctionState& state, const StepModel& step, Engine& engine) {
    JunctionState next = state;
    next.resistance = state.resistance + step.sample(engine);
    next.resistance_at_last_pulse = next.resistance;
    next.hours_since_last_pulse = 0.0;
    ++next.pulse_count;
    return next;
}

JunctionState apply_pulse(const JunctionState& state, const StepModel& step, std::uint64_t seed) {
    Engine engine(derive_seed(seed, stream::steps));
    return apply_pulse(state, step, engine);
}

double relaxation_delta(const RelaxationProfile& profile, double rho, double r_stop, double t_hr) {
    if (!(t_hr >= 0.0)) throw Error(ErrorCode::domain, "relaxation: time must be >= 0");
    if (!(rho >= 0.0)) throw Error(ErrorCode::domain, "relaxation: rho must be >= 0");
    if (!(r_stop > 0.0)) throw Error(ErrorCode::domain, "relaxation: stop resistance must be > 0");
    return rho * r_stop * profile.shape(t_hr);
}

JunctionState advance_time(const JunctionState& state, const RelaxationProfile& profile,
                           double dt_hr) {
    if (!(dt_hr >= 0.0)) throw Error(ErrorCode::domain, "advance_time: dt must be >= 0");
    if (dt_hr == 0.0) return state;
    JunctionState next = state;
    next.hours_since_last_pulse += dt_hr;
    if (state.pulse_count > 0) {
        next.resistance = state.resistance_at_last_pulse +
                          relaxation_delta(profile, state.relax_fraction,
                                           state.resistance_at_last_pulse,
                                           next.hours_since_last_pulse);
    }
    return next;
}

double measure_resistance(const JunctionState& state, const MeasurementModel& meas,
                          Engine& engine) {
    if (meas.noise_sigma == 0.0) return state.resistance;
    std::normal_distribution<double> dist(0.0, meas.noise_sigma);
    return state.resistance + dist(engine);
}

double measure_resistance(const JunctionState& state, const MeasurementModel& meas,
                          std::uint64_t seed) {
    Engine engine(derive_seed(seed, stream::measurement));
    return measure_resistance(state, meas, engine);
}

}  // namespace freqtrim
