#include "freqtrim/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>
#include <unordered_map>

namespace freqtrim {

void TuningTarget::validate() const {
    if (!std::isfinite(target_resistance) || target_resistance <= 0.0)
        throw Error(ErrorCode::config, "target '" + qubit_id + "': resistance must be positive");
    if (!std::isfinite(relaxation_reserve) || relaxation_reserve <= -1.0)
        throw Error(ErrorCode::config, "target '" + qubit_id + "': reserve must exceed -1");
}

double compute_threshold(const TuningTarget& target) {
    target.validate();
    return target.target_resistance / (1.0 + target.relaxation_reserve);
}

void CampaignConfig::validate() const {
    step.validate();
    measurement.validate();
    if (!std::isfinite(probe_delay_hr) || probe_delay_hr < 0.0)
        throw Error(ErrorCode::config, "campaign: probe delay must be >= 0");
    if (max_pulses <= 0) throw Error(ErrorCode::config, "campaign: max_pulses must be > 0");
}

std::uint64_t qubit_seed(std::uint64_t campaign_seed, const std::string& qubit_id) {
    return derive_seed(campaign_seed, qubit_id);
}

QubitTuneRecord tune_qubit(const JunctionState& state, const TuningTarget& target,
                           const CampaignConfig& config) {
    return trace_qubit(state, target, config).record;
}

TuneTrace trace_qubit(const JunctionState& state, const TuningTarget& target,
                      const CampaignConfig& config) {
    config.validate();
    const double threshold = compute_threshold(target);

    const std::uint64_t seed = qubit_seed(config.seed, target.qubit_id);
    Engine step_engine(derive_seed(seed, stream::steps));
    Engine meas_engine(derive_seed(seed, stream::measurement));

    QubitTuneRecord rec;
    rec.qubit_id = target.qubit_id;
    rec.r_target = target.target_resistance;
    rec.threshold = threshold;

    JunctionState s = state;
    double reading = measure_resistance(s, config.measurement, meas_engine);
    rec.r_untuned = reading;
    rec.r_before_last_pulse = reading;

    if (reading >= threshold) {
        // Trimming only raises resistance; leave the qubit as fabricated.
        rec.already_above = true;
    }
    while (reading < threshold) {
        if (rec.pulses >= config.max_pulses) {
            rec.r_last_pulse = reading;
            rec.r_tuned = reading;
            throw TuningLimitError("qubit '" + rec.qubit_id + "': threshold not reached after " +
                                       std::to_string(rec.pulses) + " pulses",
                                   rec);
        }
        rec.r_before_last_pulse = reading;
        s = apply_pulse(s, config.step, step_engine);
        ++rec.pulses;
        reading = measure_resistance(s, config.measurement, meas_engine);
    }
    rec.r_last_pulse = reading;

    TuneTrace trace{rec, s};
    s = advance_time(s, config.relaxation, config.probe_delay_hr);
    trace.record.r_tuned = measure_resistance(s, config.measurement, meas_engine);
    return trace;
}

CampaignSummary summarize_campaign(std::span<const QubitTuneRecord> records) {
    CampaignSummary summary;
    summary.count = records.size();
    if (records.empty()) return summary;

    std::vector<double> untuned, tuned, overshoot, shift, pulses;
    for (const auto& r : records) {
        untuned.push_back((r.r_untuned - r.r_target) / r.r_target);
        tuned.push_back(r.tuned_error_frac());
        pulses.push_back(static_cast<double>(r.pulses));
        summary.max_tuning_distance = std::max(summary.max_tuning_distance, r.tuning_distance_frac());
        if (r.already_above) {
            ++summary.already_above;
            continue;
        }
        overshoot.push_back(r.overshoot());
        shift.push_back(r.r_tuned - r.r_last_pulse);
    }
    summary.untuned_frac = summarize(untuned);
    summary.tuned_frac = summarize(tuned);
    summary.pulses = summarize(pulses);
    if (!overshoot.empty()) {
        summary.overshoot = summarize(overshoot);
        summary.relax_shift = summarize(shift);
    }
    return summary;
}

CampaignResult run_campaign(std::span<const Qubit> qubits, std::span<const TuningTarget> targets,
                            const CampaignConfig& config, ExecutionMode mode, unsigned threads) {
    if (qubits.size() != targets.size())
        throw Error(ErrorCode::config, "campaign: " + std::to_string(qubits.size()) +
                                           " qubits but " + std::to_string(targets.size()) +
                                           " targets");
    for (std::size_t i = 0; i < qubits.size(); ++i) {
        if (qubits[i].id != targets[i].qubit_id)
            throw Error(ErrorCode::config, "campaign: position " + std::to_string(i) +
                                               " pairs qubit '" + qubits[i].id +
                                               "' with target '" + targets[i].qubit_id + "'");
    }
    config.validate();

    CampaignResult result;
    result.records.resize(qubits.size());
    result.stopped_states.resize(qubits.size());
    auto tune_one = [&](std::size_t i) {
        TuneTrace t = trace_qubit(qubits[i].state, targets[i], config);
        result.records[i] = std::move(t.record);
        result.stopped_states[i] = t.after_last_pulse;
    };

    if (mode == ExecutionMode::sequential || qubits.size() < 2) {
        for (std::size_t i = 0; i < qubits.size(); ++i)
            tune_one(i);
    } else {
        unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
        workers = static_cast<unsigned>(std::min<std::size_t>(workers, qubits.size()));
        std::vector<std::exception_ptr> errors(qubits.size());
        {
            std::vector<std::jthread> pool;
            for (unsigned w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    for (std::size_t i = w; i < qubits.size(); i += workers) {
                        try {
                            tune_one(i);
                        } catch (...) {
                            errors[i] = std::current_exception();
                        }
                    }
                });
            }
        }
        // Report the failure sequential mode would have hit first.
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    result.summary = summarize_campaign(result.records);
    return result;
}

namespace {

std::vector<const QubitTuneRecord*> pulsed(std::span<const QubitTuneRecord> records) {
    std::vector<const QubitTuneRecord*> out;
    for (const auto& r : records)
        if (!r.already_above) out.push_back(&r);
    return out;
}

}  // namespace

ReserveCalibration calibrate_reserve(std::span<const QubitTuneRecord> records) {
    const auto usable = pulsed(records);
    if (usable.empty())
        throw Error(ErrorCode::config, "calibrate_reserve: no pulsed records");
    std::vector<double> fractions;
    for (const auto* r : usable) {
        if (!(r->r_last_pulse > 0.0))
            throw Error(ErrorCode::config,
                        "calibrate_reserve: '" + r->qubit_id + "' has non-positive R_a");
        fractions.push_back(r->relaxation_fraction());
    }
    const Summary s = summarize(fractions);
    return {s.mean, s.sigma, s.count};
}

namespace {

PrecisionStats precision_from(std::span<const double> fractions) {
    const Summary s = summarize(fractions);
    return {s.mean, s.sigma, s.min, s.max};
}

}  // namespace

PrecisionStats precision_stats(std::span<const QubitTuneRecord> records,
                               std::span<const TuningTarget> targets) {
    const auto usable = pulsed(records);
    if (usable.empty()) throw Error(ErrorCode::config, "precision_stats: no pulsed records");
    std::unordered_map<std::string, double> by_id;
    for (const auto& t : targets) by_id.emplace(t.qubit_id, t.target_resistance);
    std::vector<double> fractions;
    for (const auto* r : usable) {
        const auto it = by_id.find(r->qubit_id);
        if (it == by_id.end())
            throw Error(ErrorCode::config, "precision_stats: no target for qubit '" + r->qubit_id + "'");
        fractions.push_back((r->r_tuned - it->second) / it->second);
    }
    return precision_from(fractions);
}

PrecisionStats precision_stats(std::span<const QubitTuneRecord> records) {
    const auto usable = pulsed(records);
    if (usable.empty()) throw Error(ErrorCode::config, "precision_stats: no pulsed records");
    std::vector<double> fractions;
    for (const auto* r : usable) fractions.push_back(r->tuned_error_frac());
    return precision_from(fractions);
}

OvershootStats overshoot_stats(std::span<const QubitTuneRecord> records) {
    const auto usable = pulsed(records);
    if (usable.empty()) throw Error(ErrorCode::config, "overshoot_stats: no pulsed records");
    std::vector<double> over;
    for (const auto* r : usable) over.push_back(r->overshoot());
    const Summary s = summarize(over);
    return {s.mean, s.sigma};
}

}  // namespace freqtrim
