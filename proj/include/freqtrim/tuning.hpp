#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "freqtrim/error.hpp"
#include "freqtrim/junction.hpp"
#include "freqtrim/stats.hpp"

// Closed-loop trimming controller: measure, pulse until the stop threshold is
// crossed, wait, probe.
namespace freqtrim {

struct TuningTarget {
    std::string qubit_id;
    double target_resistance = 0.0;   // R_T, ohm
    double relaxation_reserve = 0.0289;

    void validate() const;
};

/// R_T / (1 + reserve).
double compute_threshold(const TuningTarget& target);

struct CampaignConfig {
    StepModel step;
    MeasurementModel measurement;
    RelaxationProfile relaxation;
    double probe_delay_hr = 5.0;
    std::uint64_t seed = 0;
    std::int64_t max_pulses = 1'000'000;

    void validate() const;
};

struct QubitTuneRecord {
    std::string qubit_id;
    double r_untuned = 0.0;
    double r_target = 0.0;
    double threshold = 0.0;
    // Measurement taken right before the final pulse; equals r_untuned when
    // no pulse was applied.
    double r_before_last_pulse = 0.0;
    double r_last_pulse = 0.0;  // R_a
    double r_tuned = 0.0;
    std::int64_t pulses = 0;
    bool already_above = false;

    double relaxation_fraction() const { return (r_tuned - r_last_pulse) / r_last_pulse; }
    double overshoot() const { return r_last_pulse - threshold; }
    double tuned_error_frac() const { return (r_tuned - r_target) / r_target; }
    double tuning_distance_frac() const { return (r_tuned - r_untuned) / r_untuned; }
};

/// Raised when max_pulses is hit; carries what was recorded so far.
class TuningLimitError : public Error {
public:
    TuningLimitError(const std::string& message, QubitTuneRecord partial)
        : Error(ErrorCode::controller, message), partial_(std::move(partial)) {}

    const QubitTuneRecord& partial() const noexcept { return partial_; }

private:
    QubitTuneRecord partial_;
};

/// Per-qubit seed: stable hash of (campaign seed, qubit id).
std::uint64_t qubit_seed(std::uint64_t campaign_seed, const std::string& qubit_id);

QubitTuneRecord tune_qubit(const JunctionState& state, const TuningTarget& target,
                           const CampaignConfig& config);

struct TuneTrace {
    QubitTuneRecord record;
    JunctionState after_last_pulse;  // junction state when pulsing stopped
};

TuneTrace trace_qubit(const JunctionState& state, const TuningTarget& target,
                      const CampaignConfig& config);

struct Qubit {
    std::string id;
    JunctionState state;
};

struct CampaignSummary {
    std::size_t count = 0;
    std::size_t already_above = 0;
    Summary untuned_frac;   // (r_untuned - R_T) / R_T
    Summary tuned_frac;     // (r_tuned - R_T) / R_T
    Summary overshoot;      // ohm, pulsed qubits only
    Summary relax_shift;    // r_tuned - R_a, ohm, pulsed qubits only
    Summary pulses;
    double max_tuning_distance = 0.0;
};

struct CampaignResult {
    std::vector<QubitTuneRecord> records;
    std::vector<JunctionState> stopped_states;  // per record, right after the last pulse
    CampaignSummary summary;
};

enum class ExecutionMode { sequential, parallel };

CampaignSummary summarize_campaign(std::span<const QubitTuneRecord> records);

/// Tunes qubit-by-qubit. Parallel mode partitions qubits across threads and
/// produces the same records as sequential mode.
CampaignResult run_campaign(std::span<const Qubit> qubits, std::span<const TuningTarget> targets,
                            const CampaignConfig& config,
                            ExecutionMode mode = ExecutionMode::sequential,
                            unsigned threads = 0);

struct ReserveCalibration {
    double mean = 0.0;
    double sigma = 0.0;
    std::size_t count = 0;
};

/// Statistics of (r_tuned - R_a) / R_a over pulsed records.
ReserveCalibration calibrate_reserve(std::span<const QubitTuneRecord> records);

struct PrecisionStats {
    double mean_frac = 0.0;
    double sigma_frac = 0.0;
    double min_frac = 0.0;
    double max_frac = 0.0;
};

/// Statistics of (r_tuned - R_T) / R_T over pulsed records, with R_T taken
/// from `targets` by id. Qubits fabricated above threshold are left out.
PrecisionStats precision_stats(std::span<const QubitTuneRecord> records,
                               std::span<const TuningTarget> targets);
/// Same, using the target stored on each record.
PrecisionStats precision_stats(std::span<const QubitTuneRecord> records);

struct OvershootStats {
    double mean = 0.0;
    double sigma = 0.0;
};

OvershootStats overshoot_stats(std::span<const QubitTuneRecord> records);

}  // namespace freqtrim
