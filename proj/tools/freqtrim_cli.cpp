// freqtrim command-line tool. Every subcommand writes its outputs plus a
// manifest.json into --out.
//
// Exit codes: 0 success, 2 validation error, 3 infeasible (parking,
// unit-cell search, pulse limit), 1 internal failure.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "freqtrim/freqtrim.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;

class CommandError : public std::runtime_error {
public:
    CommandError(const std::string& message, int exit_code)
        : std::runtime_error(message), exit_code_(exit_code) {}
    int exit_code() const { return exit_code_; }

private:
    int exit_code_;
};

[[noreturn]] void invalid(const std::string& message) {
    throw CommandError(message, kExitValidation);
}

int exit_code_for(ft_status status) {
    switch (status) {
        case FT_ERR_INFEASIBLE:
        case FT_ERR_SEARCH:
        case FT_ERR_CONTROLLER:
            return kExitInfeasible;
        case FT_ERR_INTERNAL:
            return kExitInternal;
        default:
            return kExitValidation;
    }
}

void check(ft_status status, const std::string& what) {
    if (status == FT_OK) return;
    throw CommandError(what + ": " + ft_last_error(), exit_code_for(status));
}

struct CampaignDeleter {
    void operator()(ft_campaign* c) const { ft_campaign_free(c); }
};
struct ReportDeleter {
    void operator()(ft_detuning_report* r) const { ft_report_free(r); }
};
struct LatticeDeleter {
    void operator()(ft_lattice* l) const { ft_lattice_free(l); }
};
using CampaignPtr = std::unique_ptr<ft_campaign, CampaignDeleter>;
using ReportPtr = std::unique_ptr<ft_detuning_report, ReportDeleter>;
using LatticePtr = std::unique_ptr<ft_lattice, LatticeDeleter>;

std::string fixed(double value, int decimals) {
    char buffer[64];
    check(ft_format_fixed(value, decimals, buffer, sizeof buffer), "format");
    return buffer;
}

std::pair<double, double> parse_window(const std::vector<double>& v, const char* flag,
                                       bool allow_point = false) {
    if (v.size() != 2) invalid(std::string(flag) + " expects lo,hi");
    if (allow_point && v[0] >= 0.0 && v[0] == v[1]) return {v[0], v[1]};
    if (!(v[0] >= 0.0 && v[0] < v[1])) invalid(std::string(flag) + " needs 0 <= lo < hi");
    return {v[0], v[1]};
}

std::pair<std::size_t, std::size_t> parse_cells(const std::string& text) {
    const auto x = text.find('x');
    std::size_t m = 0, n = 0;
    auto number = [&](std::string_view part, std::size_t& out) {
        const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
        return ec == std::errc() && ptr == part.data() + part.size() && out > 0;
    };
    const std::string_view s(text);
    if (x == std::string::npos || !number(s.substr(0, x), m) || !number(s.substr(x + 1), n))
        invalid("--cells: '" + text + "' is not of the form MxN with M, N >= 1");
    return {m, n};
}

std::string qubit_label(std::size_t index, std::size_t cols) {
    return "q" + std::to_string(index) + " (" + std::to_string(index / cols) + "," +
           std::to_string(index % cols) + ")";
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CommandError("cannot open '" + path.string() + "' for writing", kExitValidation);
    out << text;
    if (!out) throw CommandError("failed writing '" + path.string() + "'", kExitInternal);
}

// Collects what a run needs for its manifest.
class Run {
public:
    Run(std::string command, const std::string& out_dir) : command_(std::move(command)), out_(out_dir) {
        std::error_code ec;
        fs::create_directories(out_, ec);
        if (ec) invalid("--out: cannot create '" + out_dir + "': " + ec.message());
    }

    fs::path file(const std::string& name) const { return out_ / name; }
    std::string path(const std::string& name) const { return file(name).string(); }

    void input(const std::string& path) { inputs_.push_back(path); }
    void seed(std::uint64_t value) { seed_ = value; }
    json& config() { return config_; }

    void finish() const {
        std::vector<const char*> inputs;
        for (const auto& p : inputs_) inputs.push_back(p.c_str());
        const std::string config = config_.dump();
        check(ft_manifest_write(path("manifest.json").c_str(), command_.c_str(), config.c_str(),
                                seed_.has_value(), seed_.value_or(0), inputs.data(), inputs.size()),
              "manifest");
    }

private:
    std::string command_;
    fs::path out_;
    std::vector<std::string> inputs_;
    std::optional<std::uint64_t> seed_;
    json config_ = json::object();
};

LatticePtr load_lattice(const std::string& path) {
    ft_lattice* raw = nullptr;
    check(ft_lattice_load(path.c_str(), &raw), "design '" + path + "'");
    return LatticePtr(raw);
}

// ---- campaign reporting ----------------------------------------------------

void emit_campaign_report(const ft_campaign* campaign, const Run& run) {
    ft_campaign_report r{};
    check(ft_campaign_report_stats(campaign, &r), "report");
    const std::vector<std::pair<const char*, double>> rows = {
        {"precision_mean_frac", r.precision_mean_frac},
        {"precision_sigma_frac", r.precision_sigma_frac},
        {"precision_min_frac", r.precision_min_frac},
        {"precision_max_frac", r.precision_max_frac},
        {"untuned_mean_frac", r.untuned_mean_frac},
        {"untuned_sigma_frac", r.untuned_sigma_frac},
        {"overshoot_mean_ohm", r.overshoot_mean},
        {"overshoot_sigma_ohm", r.overshoot_sigma},
        {"relax_shift_mean_ohm", r.relax_shift_mean},
        {"relax_shift_sigma_ohm", r.relax_shift_sigma},
        {"reserve_mean", r.reserve_mean},
        {"reserve_sigma", r.reserve_sigma},
        {"pulses_mean", r.pulses_mean},
        {"max_tuning_distance_frac", r.max_tuning_distance},
    };
    std::string csv = "metric,value\n";
    csv += "qubits," + std::to_string(r.count) + "\n";
    csv += "already_above," + std::to_string(r.already_above) + "\n";
    for (const auto& [name, value] : rows) csv += std::string(name) + "," + fixed(value, 9) + "\n";
    write_text(run.file("report.csv"), csv);

    std::cout << "qubits            " << r.count << " (" << r.already_above
              << " already above threshold, not in precision/overshoot/reserve)\n"
              << "precision         mean " << fixed(100.0 * r.precision_mean_frac, 3)
              << " %  sigma " << fixed(100.0 * r.precision_sigma_frac, 3) << " %  range ["
              << fixed(100.0 * r.precision_min_frac, 3) << ", "
              << fixed(100.0 * r.precision_max_frac, 3) << "] %\n"
              << "untuned offset    mean " << fixed(100.0 * r.untuned_mean_frac, 3)
              << " %  sigma " << fixed(100.0 * r.untuned_sigma_frac, 3) << " %\n"
              << "overshoot         mean " << fixed(r.overshoot_mean, 3) << " ohm  sigma "
              << fixed(r.overshoot_sigma, 3) << " ohm\n"
              << "relaxation shift  mean " << fixed(r.relax_shift_mean, 3) << " ohm  sigma "
              << fixed(r.relax_shift_sigma, 3) << " ohm\n"
              << "reserve           mean " << fixed(100.0 * r.reserve_mean, 3) << " %  sigma "
              << fixed(100.0 * r.reserve_sigma, 3) << " %\n"
              << "pulses            mean " << fixed(r.pulses_mean, 1) << "\n"
              << "max tuning dist   " << fixed(100.0 * r.max_tuning_distance, 2) << " %\n";
}

// ---- simulate-tuning -------------------------------------------------------

struct TuneArgs {
    std::string input;
    std::size_t qubits = 0;
    double design_ohm = 0.0;
    std::uint64_t seed = 0;
    double aging_budget = 0.0;
    double reserve = 0.0;
    double threshold = 0.0;
    std::string step = "exponential";
    double mean_step = 0.0;
    double noise = 0.0;
    double probe_delay = 0.0;
    std::int64_t max_pulses = 0;
    double fab_offset = 0.0;
    double fab_sigma = 0.0;
    double relax_mean = 0.0;
    double relax_sigma = 0.0;
    std::vector<double> monitor_hours;
    unsigned threads = 1;
    std::string out = ".";
};

void add_tune_command(CLI::App& app, TuneArgs& a) {
    ft_tuning_options d;
    ft_tuning_options_default(&d);
    a.aging_budget = d.aging_budget;
    a.reserve = d.reserve;
    a.mean_step = d.mean_step;
    a.noise = d.noise_sigma;
    a.probe_delay = d.probe_delay_hr;
    a.max_pulses = d.max_pulses;
    a.fab_offset = d.mean_offset_frac;
    a.fab_sigma = d.sigma_frac;
    a.relax_mean = d.relax_mean;
    a.relax_sigma = d.relax_sigma;

    auto* cmd = app.add_subcommand("simulate-tuning", "Fabricate and trim a batch of junctions");
    cmd->add_option("--input", a.input, "CSV qubit_id,design_resistance_ohm")->check(CLI::ExistingFile);
    cmd->add_option("--qubits", a.qubits, "Number of identical qubits (instead of --input)");
    cmd->add_option("--design-ohm", a.design_ohm, "Design resistance for --qubits");
    cmd->add_option("--seed", a.seed, "Master seed")->required();
    cmd->add_option("--aging-budget", a.aging_budget, "Target = design * (1 - budget)")->capture_default_str();
    cmd->add_option("--reserve", a.reserve, "Relaxation reserve; threshold = target / (1 + reserve)")->capture_default_str();
    cmd->add_option("--threshold", a.threshold, "Fixed stop threshold in ohm for every qubit");
    cmd->add_option("--step", a.step, "Step law: exponential, uniform or constant")->capture_default_str()
        ->check(CLI::IsMember({"exponential", "uniform", "constant"}));
    cmd->add_option("--mean-step", a.mean_step, "Mean pulse step in ohm")->capture_default_str();
    cmd->add_option("--noise", a.noise, "Measurement noise sigma in ohm")->capture_default_str();
    cmd->add_option("--probe-delay", a.probe_delay, "Hours between last pulse and probe")->capture_default_str();
    cmd->add_option("--max-pulses", a.max_pulses, "Pulse limit per qubit")->capture_default_str();
    cmd->add_option("--fab-offset", a.fab_offset, "Mean fabrication offset (fraction of design)")->capture_default_str();
    cmd->add_option("--fab-sigma", a.fab_sigma, "Fabrication spread (fraction of design)")->capture_default_str();
    cmd->add_option("--relax-mean", a.relax_mean, "Mean relaxation fraction")->capture_default_str();
    cmd->add_option("--relax-sigma", a.relax_sigma, "Relaxation fraction spread")->capture_default_str();
    cmd->add_option("--monitor-hours", a.monitor_hours,
                    "Extra readings after the last pulse, written to resistance_log.csv")
        ->delimiter(',');
    cmd->add_option("--threads", a.threads, "Worker threads (results do not depend on it)")->capture_default_str();
    cmd->add_option("--out", a.out, "Output directory")->capture_default_str();
}

int run_tune(const TuneArgs& a) {
    if (a.input.empty() == (a.qubits == 0)) invalid("give exactly one of --input or --qubits");
    if (a.qubits > 0 && !(a.design_ohm > 0.0)) invalid("--qubits needs a positive --design-ohm");

    Run run("simulate-tuning", a.out);
    ft_tuning_options o;
    ft_tuning_options_default(&o);
    o.seed = a.seed;
    o.mean_offset_frac = a.fab_offset;
    o.sigma_frac = a.fab_sigma;
    o.relax_mean = a.relax_mean;
    o.relax_sigma = a.relax_sigma;
    o.aging_budget = a.aging_budget;
    o.reserve = a.reserve;
    o.fixed_threshold = a.threshold;
    o.step_kind = a.step == "uniform"    ? FT_STEP_UNIFORM
                  : a.step == "constant" ? FT_STEP_CONSTANT
                                         : FT_STEP_EXPONENTIAL;
    o.mean_step = a.mean_step;
    o.noise_sigma = a.noise;
    o.probe_delay_hr = a.probe_delay;
    o.max_pulses = a.max_pulses;
    o.parallel = a.threads != 1;
    o.threads = a.threads;

    run.seed(a.seed);
    run.config() = {{"aging_budget", a.aging_budget}, {"reserve", a.reserve},
                    {"threshold_ohm", a.threshold},   {"step", a.step},
                    {"mean_step_ohm", a.mean_step},   {"noise_ohm", a.noise},
                    {"probe_delay_hr", a.probe_delay}, {"max_pulses", a.max_pulses},
                    {"fab_offset", a.fab_offset},     {"fab_sigma", a.fab_sigma},
                    {"relax_mean", a.relax_mean},     {"relax_sigma", a.relax_sigma},
                    {"monitor_hours", a.monitor_hours}};

    ft_campaign* raw = nullptr;
    if (!a.input.empty()) {
        run.input(a.input);
        check(ft_campaign_simulate_file(&o, a.input.c_str(), &raw), "simulate-tuning");
    } else {
        run.config()["qubits"] = a.qubits;
        run.config()["design_ohm"] = a.design_ohm;
        std::vector<std::string> ids;
        char name[32];
        for (std::size_t i = 0; i < a.qubits; ++i) {
            std::snprintf(name, sizeof name, "q%03zu", i + 1);
            ids.emplace_back(name);
        }
        std::vector<const char*> id_ptrs;
        for (const auto& id : ids) id_ptrs.push_back(id.c_str());
        const std::vector<double> design(a.qubits, a.design_ohm);
        check(ft_campaign_simulate(&o, id_ptrs.data(), design.data(), a.qubits, &raw),
              "simulate-tuning");
    }
    const CampaignPtr campaign(raw);

    check(ft_campaign_save(campaign.get(), run.path("campaign.csv").c_str()), "campaign.csv");
    if (!a.monitor_hours.empty())
        check(ft_campaign_write_log(campaign.get(), run.path("resistance_log.csv").c_str(),
                                    a.monitor_hours.data(), a.monitor_hours.size()),
              "resistance_log.csv");
    emit_campaign_report(campaign.get(), run);
    run.finish();
    return kExitOk;
}

// ---- report ----------------------------------------------------------------

struct ReportArgs {
    std::string campaign;
    std::string out = ".";
};

void add_report_command(CLI::App& app, ReportArgs& a) {
    auto* cmd = app.add_subcommand("report", "Precision and overshoot statistics of a saved campaign");
    cmd->add_option("--campaign", a.campaign, "campaign.csv from simulate-tuning")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", a.out, "Output directory")->capture_default_str();
}

int run_report(const ReportArgs& a) {
    Run run("report", a.out);
    run.input(a.campaign);
    ft_campaign* raw = nullptr;
    check(ft_campaign_load(a.campaign.c_str(), &raw), "campaign");
    const CampaignPtr campaign(raw);
    emit_campaign_report(campaign.get(), run);
    run.finish();
    return kExitOk;
}

// ---- calibrate-freq --------------------------------------------------------

struct CalibrateArgs {
    std::string input;
    double precision = 0.0;
    double at_frequency = 0.0;
    std::string out = ".";
};

void add_calibrate_command(CLI::App& app, CalibrateArgs& a) {
    auto* cmd = app.add_subcommand("calibrate-freq", "Fit f = beta * R^-alpha to measured pairs");
    cmd->add_option("--input", a.input, "CSV resistance_ohm,f01max_mhz")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--precision", a.precision,
                    "Relative resistance precision to convert into MHz (e.g. 0.0034)");
    cmd->add_option("--at-frequency", a.at_frequency, "Frequency for --precision in MHz");
    cmd->add_option("--out", a.out, "Output directory")->capture_default_str();
}

int run_calibrate(const CalibrateArgs& a) {
    if ((a.precision > 0.0) != (a.at_frequency > 0.0))
        invalid("--precision and --at-frequency go together");
    Run run("calibrate-freq", a.out);
    run.input(a.input);
    run.config() = {{"precision", a.precision}, {"at_frequency_mhz", a.at_frequency}};

    ft_power_law model{};
    std::size_t points = 0;
    check(ft_power_law_fit_file(a.input.c_str(), &model, &points), "calibrate-freq");
    check(ft_calibration_save(run.path("calibration.json").c_str(), &model), "calibration.json");

    std::cout << "points          " << points << "\n"
              << "alpha           " << fixed(model.alpha, 6) << "\n"
              << "beta            " << fixed(model.beta, 3) << " MHz*ohm^alpha\n"
              << "residual sigma  " << fixed(model.residual_sigma_mhz, 3) << " MHz\n"
              << "domain          [" << fixed(model.r_min, 1) << ", " << fixed(model.r_max, 1)
              << "] ohm\n";
    if (a.precision > 0.0) {
        double sigma = 0.0;
        check(ft_freq_equiv_sigma(&model, a.at_frequency, a.precision, &sigma), "precision");
        std::cout << "freq precision  " << fixed(sigma, 3) << " MHz at "
                  << fixed(a.at_frequency, 1) << " MHz\n";
    }
    run.finish();
    return kExitOk;
}

// ---- assign-targets --------------------------------------------------------

struct AssignArgs {
    std::string calibration;
    std::string design;
    double aging_budget = 0.02;
    double reserve = 0.0289;
    std::string out = ".";
};

void add_assign_command(CLI::App& app, AssignArgs& a) {
    auto* cmd = app.add_subcommand("assign-targets",
                                   "Turn design frequencies into resistance targets");
    cmd->add_option("--calibration", a.calibration, "calibration.json")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--design", a.design, "Design JSON lattice")->required()->check(CLI::ExistingFile);
    cmd->add_option("--aging-budget", a.aging_budget, "Target = design resistance * (1 - budget)")->capture_default_str();
    cmd->add_option("--reserve", a.reserve, "Relaxation reserve for the stop threshold")->capture_default_str();
    cmd->add_option("--out", a.out, "Output directory")->capture_default_str();
}

int run_assign(const AssignArgs& a) {
    Run run("assign-targets", a.out);
    run.input(a.calibration);
    run.input(a.design);
    run.config() = {{"aging_budget", a.aging_budget}, {"reserve", a.reserve}};

    ft_power_law model{};
    check(ft_calibration_load(a.calibration.c_str(), &model), "calibration");
    const LatticePtr lattice = load_lattice(a.design);
    const std::size_t cols = ft_lattice_cols(lattice.get());

    std::string targets =
        "qubit_id,row,col,f_design_mhz,design_resistance_ohm,target_resistance_ohm,threshold_ohm,"
        "within_domain\n";
    std::string resistances = "qubit_id,design_resistance_ohm\n";
    std::size_t outside = 0;
    for (std::size_t q = 0; q < ft_lattice_qubits(lattice.get()); ++q) {
        double f = 0.0;
        check(ft_lattice_frequency(lattice.get(), q, &f, nullptr), "design");
        ft_target_assignment t{};
        check(ft_assign_target(&model, f, a.aging_budget, &t), "qubit " + qubit_label(q, cols));
        double threshold = 0.0;
        check(ft_compute_threshold(t.target_resistance, a.reserve, &threshold), "threshold");
        const std::string id = "q" + std::to_string(q);
        targets += id + "," + std::to_string(q / cols) + "," + std::to_string(q % cols) + "," +
                   fixed(f, 3) + "," + fixed(t.design_resistance, 6) + "," +
                   fixed(t.target_resistance, 6) + "," + fixed(threshold, 6) + "," +
                   (t.within_domain ? "1" : "0") + "\n";
        resistances += id + "," + fixed(t.design_resistance, 6) + "\n";
        if (!t.within_domain) {
            ++outside;
            std::cerr << "warning: " << qubit_label(q, cols)
                      << " needs a resistance outside the calibrated range\n";
        }
    }
    write_text(run.file("targets.csv"), targets);
    write_text(run.file("design_resistances.csv"), resistances);
    std::cout << "qubits           " << ft_lattice_qubits(lattice.get()) << "\n"
              << "outside domain   " << outside << "\n";
    run.finish();
    return kExitOk;
}

// ---- fit-relaxation --------------------------------------------------------

struct RelaxArgs {
    std::string input;
    std::vector<double> breakpoints;
    std::size_t changepoints = 2;
    std::string out = ".";
};

void add_relax_command(CLI::App& app, RelaxArgs& a) {
    auto* cmd = app.add_subcommand("fit-relaxation",
                                   "Segmented power-law fit of post-pulse resistance drift");
    cmd->add_option("--input", a.input, "Resistance log qubit_id,t_hr,resistance_ohm,phase")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--breakpoints", a.breakpoints, "Fixed breakpoints in hours")->delimiter(',');
    cmd->add_option("--changepoints", a.changepoints,
                    "Number of breakpoints to search for when none are given")->capture_default_str();
    cmd->add_option("--out", a.out, "Output directory")->capture_default_str();
}

int run_relax(const RelaxArgs& a) {
    Run run("fit-relaxation", a.out);
    run.input(a.input);
    run.config() = {{"breakpoints_hr", a.breakpoints}, {"changepoints", a.changepoints}};

    ft_segmented_fit fit{};
    std::size_t points = 0;
    check(ft_fit_relaxation_log(a.input.c_str(), a.breakpoints.data(), a.breakpoints.size(),
                                a.changepoints, &fit, &points),
          "fit-relaxation");

    std::string csv = "segment,t_start_hr,t_end_hr,exponent,amplitude,points\n";
    std::cout << "points       " << points << "\n";
    for (std::size_t k = 0; k < fit.segments; ++k) {
        const std::string lo = k == 0 ? fixed(0.0, 6) : fixed(fit.breakpoints[k - 1], 6);
        const std::string hi = k + 1 == fit.segments ? "inf" : fixed(fit.breakpoints[k], 6);
        csv += std::to_string(k) + "," + lo + "," + hi + "," + fixed(fit.exponents[k], 6) + "," +
               fixed(fit.amplitudes[k], 6) + "," + std::to_string(fit.counts[k]) + "\n";
        std::cout << "segment " << k << "    [" << lo << ", " << hi << ") hr  exponent "
                  << fixed(fit.exponents[k], 4) << "  points " << fit.counts[k] << "\n";
    }
    write_text(run.file("relaxation_fit.csv"), csv);
    std::cout << "sse          " << fixed(fit.sse, 6) << "\n";
    run.finish();
    return kExitOk;
}

// ---- analyze-lattice -------------------------------------------------------

struct LatticeArgs {
    std::string design;
    bool measured = false;
    std::vector<double> window{20.0, 130.0};
    int limit = 2;
    std::string out = ".";
};

void add_lattice_command(CLI::App& app, LatticeArgs& a) {
    auto* cmd = app.add_subcommand("analyze-lattice",
                                   "Edge detunings, window violations and modulation load");
    cmd->add_option("--design", a.design, "Design JSON lattice")->required()->check(CLI::ExistingFile);
    cmd->add_flag("--measured", a.measured, "Analyze measured instead of design frequencies");
    cmd->add_option("--window", a.window, "Detuning window lo,hi in MHz")->capture_default_str()->delimiter(',');
    cmd->add_option("--limit", a.limit, "Maximum modulated edges per qubit")->capture_default_str();
    cmd->add_option("--out", a.out, "Output directory")->capture_default_str();
}

int run_lattice(const LatticeArgs& a) {
    const auto [lo, hi] = parse_window(a.window, "--window");
    Run run("analyze-lattice", a.out);
    run.input(a.design);
    run.config() = {{"measured", a.measured}, {"window_mhz", a.window}, {"limit", a.limit}};

    const LatticePtr lattice = load_lattice(a.design);
    const std::size_t cols = ft_lattice_cols(lattice.get());
    const std::size_t qubits = ft_lattice_qubits(lattice.get());
    ft_detuning_report* raw = nullptr;
    check(ft_lattice_detunings(lattice.get(), a.measured, lo, hi, &raw), "detunings");
    const ReportPtr report(raw);

    ft_detuning_summary s{};
    check(ft_report_summary(report.get(), &s), "summary");
    std::string csv = "a,b,signed_mhz,abs_mhz,modulated,tie,in_window\n";
    std::vector<std::string> violations;
    for (std::size_t i = 0; i < s.edges; ++i) {
        ft_edge_detuning e{};
        check(ft_report_edge(report.get(), i, &e), "edge");
        csv += std::to_string(e.a) + "," + std::to_string(e.b) + "," + fixed(e.signed_mhz, 3) +
               "," + fixed(e.abs_mhz, 3) + "," + std::to_string(e.modulated) + "," +
               std::to_string(e.tie) + "," + std::to_string(e.in_window) + "\n";
        if (!e.in_window)
            violations.push_back(qubit_label(e.a, cols) + " - " + qubit_label(e.b, cols) + ": " +
                                 fixed(e.abs_mhz, 3) + " MHz");
    }
    write_text(run.file("detunings.csv"), csv);

    std::vector<int> counts(qubits);
    int max_count = 0, valid = 0;
    check(ft_report_modulation(report.get(), a.limit, counts.data(), counts.size(), &max_count,
                               &valid),
          "modulation");
    std::string mod = "qubit,row,col,modulated_edges\n";
    for (std::size_t q = 0; q < qubits; ++q)
        mod += std::to_string(q) + "," + std::to_string(q / cols) + "," + std::to_string(q % cols) +
               "," + std::to_string(counts[q]) + "\n";
    write_text(run.file("modulation.csv"), mod);

    std::cout << "edges            " << s.edges << "\n"
              << "|detuning|       median " << fixed(s.median_abs, 3) << "  min "
              << fixed(s.min_abs, 3) << "  max " << fixed(s.max_abs, 3) << " MHz\n"
              << "out of window    " << s.out_of_window << "\n"
              << "ties             " << s.ties << "\n"
              << "modulation       max " << max_count << " per qubit ("
              << (valid ? "valid" : "over limit") << ")\n";
    for (const auto& v : violations) std::cout << "  outside window: " << v << "\n";

    if (a.measured) {
        ft_detuning_report* design_raw = nullptr;
        check(ft_lattice_detunings(lattice.get(), 0, lo, hi, &design_raw), "design detunings");
        const ReportPtr design(design_raw);
        double mean = 0.0, sigma = 0.0;
        check(ft_report_deviation(report.get(), design.get(), &mean, &sigma), "deviation");
        std::cout << "deviation        mean " << fixed(mean, 3) << "  sigma " << fixed(sigma, 3)
                  << " MHz\n";
    }
    run.finish();
    return kExitOk;
}

// ---- park ------------------------------------------------------------------

struct ParkArgs {
    std::string design;
    std::vector<double> window{20.0, 130.0};
    double max_park = 50.0;
    double step = 1.0;
    bool allow_upward = false;
    std::string out = ".";
};

void add_park_command(CLI::App& app, ParkArgs& a) {
    auto* cmd = app.add_subcommand("park", "Minimal static parking offsets that fix the window");
    cmd->add_option("--design", a.design, "Design JSON lattice (measured offsets used if present)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--window", a.window, "Detuning window lo,hi in MHz")->capture_default_str()->delimiter(',');
    cmd->add_option("--max-park", a.max_park, "Largest parking offset in MHz")->capture_default_str();
    cmd->add_option("--step", a.step, "Offset grid in MHz")->capture_default_str();
    cmd->add_flag("--allow-upward", a.allow_upward, "Also allow offsets above the sweet spot");
    cmd->add_option("--out", a.out, "Output directory")->capture_default_str();
}

int run_park(const ParkArgs& a) {
    const auto [lo, hi] = parse_window(a.window, "--window");
    Run run("park", a.out);
    run.input(a.design);
    run.config() = {{"window_mhz", a.window}, {"max_park_mhz", a.max_park},
                    {"step_mhz", a.step},     {"allow_upward", a.allow_upward}};

    const LatticePtr lattice = load_lattice(a.design);
    const std::size_t cols = ft_lattice_cols(lattice.get());
    const std::size_t qubits = ft_lattice_qubits(lattice.get());
    const bool measured = ft_lattice_has_measurements(lattice.get());

    const ft_parking_options opts{lo, hi, a.max_park, a.step, a.allow_upward ? 1 : 0};
    std::vector<double> offsets(qubits);
    std::vector<std::size_t> va(qubits * 2), vb(qubits * 2);
    ft_parking_plan plan{};
    check(ft_lattice_park(lattice.get(), &opts, offsets.data(), &plan, va.data(), vb.data(),
                          va.size()),
          "park");

    std::cout << "violating edges  " << plan.violating_edges << "\n";
    for (std::size_t i = 0; i < plan.violating_edges && i < va.size(); ++i)
        std::cout << "  " << qubit_label(va[i], cols) << " - " << qubit_label(vb[i], cols) << "\n";
    if (!plan.feasible) {
        run.finish();
        std::cerr << "error: no parking plan within " << fixed(a.max_park, 3)
                  << " MHz fixes every edge\n";
        return kExitInfeasible;
    }

    std::string csv = "qubit,row,col,frequency_mhz,offset_mhz,parked_mhz\n";
    for (std::size_t q = 0; q < qubits; ++q) {
        double design = 0.0, meas = 0.0;
        check(ft_lattice_frequency(lattice.get(), q, &design, &meas), "frequency");
        const double f = measured ? meas : design;
        csv += std::to_string(q) + "," + std::to_string(q / cols) + "," + std::to_string(q % cols) +
               "," + fixed(f, 3) + "," + fixed(offsets[q], 3) + "," + fixed(f + offsets[q], 3) + "\n";
    }
    write_text(run.file("parking.csv"), csv);
    std::cout << "parked qubits    " << plan.parked << "\n"
              << "max |offset|     " << fixed(plan.max_abs_offset, 3) << " MHz\n"
              << "sum |offset|     " << fixed(plan.sum_abs_offset, 3) << " MHz\n";
    for (std::size_t q = 0; q < qubits; ++q)
        if (offsets[q] != 0.0)
            std::cout << "  " << qubit_label(q, cols) << " " << fixed(offsets[q], 3) << " MHz\n";
    run.finish();
    return kExitOk;
}

// ---- yield -----------------------------------------------------------------

struct YieldArgs {
    std::vector<double> sigmas{7.7};
    std::vector<std::string> cells{"1x1"};
    std::size_t trials = 100000;
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> cell_seed;
    std::string design;
    std::vector<double> window{20.0, 130.0};
    std::vector<double> design_window{40.0, 110.0};
    unsigned threads = 1;
    long dice = 212;
    std::string out = ".";
};

void add_yield_command(CLI::App& app, YieldArgs& a) {
    auto* cmd = app.add_subcommand("yield", "Monte Carlo chip yield of a tiled unit cell");
    cmd->add_option("--sigma", a.sigmas, "Frequency spread(s) in MHz")->capture_default_str()->delimiter(',');
    cmd->add_option("--cells", a.cells, "Tilings MxN of the 3x3 cell")->capture_default_str()->delimiter(',');
    cmd->add_option("--trials", a.trials, "Trials per point")->capture_default_str();
    cmd->add_option("--seed", a.seed, "Master seed")->required();
    cmd->add_option("--cell-seed", a.cell_seed, "Seed for the unit-cell search (default --seed)");
    cmd->add_option("--design", a.design, "3x3 design JSON to use instead of searching")
        ->check(CLI::ExistingFile);
    cmd->add_option("--window", a.window, "Yield window lo,hi in MHz")->capture_default_str()->delimiter(',');
    cmd->add_option("--design-window", a.design_window, "Window for the unit-cell search")->capture_default_str()
        ->delimiter(',');
    cmd->add_option("--threads", a.threads, "Worker threads, 0 = all (results do not depend on it)")->capture_default_str();
    cmd->add_option("--dice", a.dice, "Dice per wafer")->capture_default_str();
    cmd->add_option("--out", a.out, "Output directory")->capture_default_str();
}

int run_yield(const YieldArgs& a) {
    const auto [lo, hi] = parse_window(a.window, "--window");
    const auto [dlo, dhi] = parse_window(a.design_window, "--design-window", true);
    if (a.sigmas.empty()) invalid("--sigma needs at least one value");
    for (double s : a.sigmas)
        if (!(s >= 0.0)) invalid("--sigma values must be >= 0");
    if (a.trials == 0) invalid("--trials must be >= 1");
    if (a.dice < 0) invalid("--dice must be >= 0");
    std::vector<std::pair<std::size_t, std::size_t>> sizes;
    for (const auto& c : a.cells) sizes.push_back(parse_cells(c));

    Run run("yield", a.out);
    run.seed(a.seed);
    const std::uint64_t cell_seed = a.cell_seed.value_or(a.seed);
    run.config() = {{"sigma_mhz", a.sigmas},    {"cells", a.cells},
                    {"trials", a.trials},       {"window_mhz", a.window},
                    {"dice", a.dice},           {"design_window_mhz", a.design_window},
                    {"cell_seed", cell_seed}};

    ft_unit_cell cell{};
    if (!a.design.empty()) {
        run.input(a.design);
        run.config()["cell_seed"] = nullptr;
        const LatticePtr lattice = load_lattice(a.design);
        check(ft_unit_cell_from_lattice(lattice.get(), &cell), "unit cell");
    } else {
        check(ft_unit_cell_generate(dlo, dhi, cell_seed, &cell), "unit cell");
        cell.base_frequency = 4628.0;
    }
    std::size_t violations = 0;
    check(ft_unit_cell_violations(&cell, cell.window_lo, cell.window_hi, &violations), "unit cell");
    if (violations > 0)
        std::cerr << "warning: unit cell breaks " << violations << " of its 18 design constraints\n";
    {
        ft_lattice* raw = nullptr;
        check(ft_tile(&cell, 1, 1, &raw), "tile");
        const LatticePtr one(raw);
        check(ft_lattice_save(one.get(), run.path("unit_cell.json").c_str()), "unit_cell.json");
    }

    std::cout << "unit cell offsets (MHz):";
    for (std::size_t i = 0; i < 9; ++i) std::cout << (i % 3 == 0 ? "\n  " : " ") << fixed(cell.offsets[i], 1);
    std::cout << "\nqubits  sigma_mhz  yield     ci_lo     ci_hi     chips/wafer\n";

    std::vector<ft_yield_result> results;
    std::vector<double> sigmas;
    std::string wafer = "qubits,sigma_mhz,yield,chips_per_wafer,qubits_per_wafer\n";
    for (const auto& [m, n] : sizes) {
        ft_lattice* raw = nullptr;
        check(ft_tile(&cell, m, n, &raw), "tile");
        const LatticePtr lattice(raw);
        for (double sigma : a.sigmas) {
            const ft_yield_config cfg{sigma, lo, hi, a.trials, a.seed, a.threads};
            ft_yield_result r{};
            check(ft_yield(lattice.get(), &cfg, &r), "yield");
            long chips = 0, qubits = 0;
            check(ft_wafer_projection(&r, a.dice, &chips, &qubits), "wafer");
            results.push_back(r);
            sigmas.push_back(sigma);
            wafer += std::to_string(r.qubits) + "," + fixed(sigma, 3) + "," + fixed(r.yield, 6) +
                     "," + std::to_string(chips) + "," + std::to_string(qubits) + "\n";
            std::printf("%-7zu %-10s %-9s %-9s %-9s %ld\n", r.qubits, fixed(sigma, 3).c_str(),
                        fixed(r.yield, 6).c_str(), fixed(r.ci_lo, 6).c_str(),
                        fixed(r.ci_hi, 6).c_str(), chips);
        }
    }
    std::fflush(stdout);
    check(ft_yield_table_save(run.path("yield.csv").c_str(), results.data(), sigmas.data(),
                              results.size()),
          "yield.csv");
    write_text(run.file("wafer.csv"), wafer);
    run.finish();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"freqtrim: junction trimming, frequency targeting and lattice yield tools"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("freqtrim ") + ft_version());

    TuneArgs tune;
    ReportArgs report;
    CalibrateArgs calibrate;
    AssignArgs assign;
    RelaxArgs relax;
    LatticeArgs lattice;
    ParkArgs park;
    YieldArgs yield;
    add_tune_command(app, tune);
    add_calibrate_command(app, calibrate);
    add_assign_command(app, assign);
    add_relax_command(app, relax);
    add_lattice_command(app, lattice);
    add_park_command(app, park);
    add_yield_command(app, yield);
    add_report_command(app, report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        const std::string name = app.get_subcommands().front()->get_name();
        if (name == "simulate-tuning") return run_tune(tune);
        if (name == "report") return run_report(report);
        if (name == "calibrate-freq") return run_calibrate(calibrate);
        if (name == "assign-targets") return run_assign(assign);
        if (name == "fit-relaxation") return run_relax(relax);
        if (name == "analyze-lattice") return run_lattice(lattice);
        if (name == "park") return run_park(park);
        if (name == "yield") return run_yield(yield);
    } catch (const CommandError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
