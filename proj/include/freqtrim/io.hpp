#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "freqtrim/freq_model.hpp"
#include "freqtrim/lattice.hpp"
#include "freqtrim/tuning.hpp"
#include "freqtrim/yield.hpp"

// File formats. CSV files carry a mandatory header row, '.' decimals and a
// fixed number of decimals per column; JSON is used for designs,
// calibrations and run manifests. Parse failures throw Error(parse) with
// "<source>:<line>: <field>: <reason>".
namespace freqtrim::io {

/// Fixed-point formatting independent of the C locale.
std::string format_fixed(double value, int decimals);

enum class LogPhase { untuned, pulse, probe };

const char* to_string(LogPhase phase) noexcept;

struct ResistanceLogRow {
    std::string qubit_id;
    double t_hr = 0.0;
    double resistance_ohm = 0.0;
    LogPhase phase = LogPhase::probe;

    friend bool operator==(const ResistanceLogRow&, const ResistanceLogRow&) = default;
};

// qubit_id,t_hr,resistance_ohm,phase  (t_hr: 6 decimals, resistance: 6)
inline constexpr std::string_view kResistanceLogHeader = "qubit_id,t_hr,resistance_ohm,phase";

std::vector<ResistanceLogRow> parse_resistance_log(std::istream& in,
                                                   std::string_view source = "<stream>");
std::vector<ResistanceLogRow> parse_resistance_log(const std::filesystem::path& path);
void write_resistance_log(std::ostream& out, std::span<const ResistanceLogRow> rows);

/// Per-qubit log on a qubit-local clock: untuned and last-pulse readings at
/// t = 0, noiseless monitor readings at `monitor_hours`, and the probe
/// reading at the probe delay.
std::vector<ResistanceLogRow> campaign_log(const CampaignResult& campaign,
                                           const RelaxationProfile& profile,
                                           double probe_delay_hr,
                                           std::span<const double> monitor_hours);

/// Pools (hours since last pulse, R - R_last_pulse) over every probe row that
/// follows a pulse row of the same qubit. Non-positive shifts are dropped.
struct RelaxationSeries {
    std::vector<double> t_hr;
    std::vector<double> delta_ohm;
};
RelaxationSeries relaxation_series(std::span<const ResistanceLogRow> rows);

// Campaign records.
inline constexpr std::string_view kCampaignHeader =
    "qubit_id,r_untuned_ohm,r_target_ohm,threshold_ohm,r_before_last_pulse_ohm,"
    "r_last_pulse_ohm,r_tuned_ohm,pulses,already_above";

void save_campaign(std::ostream& out, std::span<const QubitTuneRecord> records);
void save_campaign(const std::filesystem::path& path, std::span<const QubitTuneRecord> records);
std::vector<QubitTuneRecord> load_campaign(std::istream& in, std::string_view source = "<stream>");
std::vector<QubitTuneRecord> load_campaign(const std::filesystem::path& path);

/// Tuning inputs: qubit_id,design_resistance_ohm
struct DesignResistance {
    std::string qubit_id;
    double design_resistance = 0.0;
};
std::vector<DesignResistance> load_design_resistances(const std::filesystem::path& path);
std::vector<DesignResistance> parse_design_resistances(std::istream& in, std::string_view source);
void save_design_resistances(std::ostream& out, std::span<const DesignResistance> rows);

/// Calibration points: resistance_ohm,f01max_mhz
std::vector<FrequencyPoint> parse_frequency_points(std::istream& in, std::string_view source);
std::vector<FrequencyPoint> load_frequency_points(const std::filesystem::path& path);

/// {beta, alpha, residual_sigma_mhz, r_min, r_max}
std::string calibration_to_json(const PowerLawModel& model);
PowerLawModel calibration_from_json(std::string_view text, std::string_view source = "<json>");
PowerLawModel load_calibration(const std::filesystem::path& path);
void save_calibration(const std::filesystem::path& path, const PowerLawModel& model);

/// {rows, cols, base_frequency_mhz, offsets_mhz: [[...]], design_window_mhz:
/// [lo, hi]} plus an optional measured_offsets_mhz grid (null = missing).
struct DesignFile {
    QubitLattice lattice;
    double base_frequency = 0.0;
    Window design_window{40.0, 110.0};
};
DesignFile design_from_json(std::string_view text, std::string_view source = "<json>");
DesignFile load_design(const std::filesystem::path& path);
std::string design_to_json(const DesignFile& design);
DesignFile design_from_cell(const UnitCellDesign& cell);

// qubits,sigma_mhz,yield,ci_lo,ci_hi  (sigma: 3 decimals, probabilities: 6)
inline constexpr std::string_view kYieldHeader = "qubits,sigma_mhz,yield,ci_lo,ci_hi";
void write_yield_table(std::ostream& out, std::span<const YieldPoint> points);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// "fnv1a64:<16 hex digits>" over the file bytes.
std::string file_digest(const std::filesystem::path& path);

struct RunManifest {
    std::string command;
    std::string config_json;  // serialized object
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
    std::string tool_version;
};
std::string manifest_to_json(const RunManifest& manifest);

}  // namespace freqtrim::io
