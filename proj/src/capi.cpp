#include "freqtrim/freqtrim.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <new>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "freqtrim/error.hpp"
#include "freqtrim/freq_model.hpp"
#include "freqtrim/io.hpp"
#include "freqtrim/junction.hpp"
#include "freqtrim/lattice.hpp"
#include "freqtrim/tuning.hpp"
#include "freqtrim/yield.hpp"
#include "json.hpp"

using namespace freqtrim;

struct ft_campaign {
    std::vector<QubitTuneRecord> records;
    std::optional<CampaignResult> simulated;
    RelaxationProfile profile;
    double probe_delay_hr = 5.0;
};

struct ft_lattice {
    io::DesignFile design;
};

struct ft_detuning_report {
    DetuningReport report;
};

namespace {

thread_local std::string g_last_error;

struct ArgumentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

ft_status to_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_model: return FT_ERR_INVALID_MODEL;
        case ErrorCode::domain: return FT_ERR_DOMAIN;
        case ErrorCode::fit: return FT_ERR_FIT;
        case ErrorCode::controller: return FT_ERR_CONTROLLER;
        case ErrorCode::config: return FT_ERR_CONFIG;
        case ErrorCode::infeasible: return FT_ERR_INFEASIBLE;
        case ErrorCode::search: return FT_ERR_SEARCH;
        case ErrorCode::parse: return FT_ERR_PARSE;
        case ErrorCode::io: return FT_ERR_IO;
    }
    return FT_ERR_INTERNAL;
}

template <class Fn>
ft_status guarded(Fn&& fn) noexcept {
    try {
        g_last_error.clear();
        fn();
        return FT_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const ArgumentError& e) {
        g_last_error = e.what();
        return FT_ERR_INVALID_ARGUMENT;
    } catch (const nlohmann::json::exception& e) {
        g_last_error = e.what();
        return FT_ERR_PARSE;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return FT_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return FT_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return FT_ERR_INTERNAL;
    }
}

template <class T>
T& need(T* p, const char* name) {
    if (!p) throw ArgumentError(std::string(name) + " must not be NULL");
    return *p;
}

template <class T>
const T& need(const T* p, const char* name) {
    if (!p) throw ArgumentError(std::string(name) + " must not be NULL");
    return *p;
}

void need_array(const void* p, std::size_t count, const char* name) {
    if (count > 0 && !p) throw ArgumentError(std::string(name) + " must not be NULL");
}

PowerLawModel to_model(const ft_power_law& m) {
    PowerLawModel out{m.beta, m.alpha, m.residual_sigma_mhz, m.r_min, m.r_max};
    out.validate();
    return out;
}

ft_power_law from_model(const PowerLawModel& m) {
    return {m.beta, m.alpha, m.residual_sigma, m.r_min, m.r_max};
}

void fill_segmented(const SegmentedPowerLaw& fit, ft_segmented_fit& out) {
    if (fit.exponents.size() > FT_MAX_SEGMENTS)
        throw ArgumentError("segmented fit has more than FT_MAX_SEGMENTS segments");
    out = ft_segmented_fit{};
    out.segments = fit.exponents.size();
    for (std::size_t k = 0; k < fit.breakpoints.size(); ++k) out.breakpoints[k] = fit.breakpoints[k];
    for (std::size_t k = 0; k < fit.exponents.size(); ++k) {
        out.exponents[k] = fit.exponents[k];
        out.amplitudes[k] = fit.amplitudes[k];
        out.counts[k] = fit.segment_counts[k];
    }
    out.sse = fit.sse;
    out.continuity_residual = fit.continuity_residual;
}

SegmentedPowerLaw fit_relaxation_impl(std::span<const double> t, std::span<const double> dr,
                                      const double* breakpoints, std::size_t breakpoint_count,
                                      std::size_t auto_changepoints) {
    need_array(breakpoints, breakpoint_count, "breakpoints");
    std::optional<std::vector<double>> bps;
    if (breakpoint_count > 0) bps.emplace(breakpoints, breakpoints + breakpoint_count);
    SegmentedFitOptions opt;
    opt.changepoints = auto_changepoints;
    if (!bps && auto_changepoints + 1 > FT_MAX_SEGMENTS)
        throw ArgumentError("auto_changepoints exceeds FT_MAX_SEGMENTS - 1");
    return fit_segmented_power_law(t, dr, bps, opt);
}

StepDistribution to_step(ft_step_kind kind) {
    switch (kind) {
        case FT_STEP_EXPONENTIAL: return StepDistribution::exponential;
        case FT_STEP_UNIFORM: return StepDistribution::uniform;
        case FT_STEP_CONSTANT: return StepDistribution::constant;
    }
    throw ArgumentError("unknown step kind");
}

ft_campaign* simulate(const ft_tuning_options& o, const std::vector<io::DesignResistance>& qubits) {
    if (!(o.aging_budget >= 0.0 && o.aging_budget < 1.0))
        throw Error(ErrorCode::config, "aging budget must lie in [0, 1)");
    CampaignConfig config;
    config.seed = o.seed;
    config.step.kind = to_step(o.step_kind);
    config.step.mean_step = o.mean_step;
    config.measurement.noise_sigma = o.noise_sigma;
    config.probe_delay_hr = o.probe_delay_hr;
    config.max_pulses = o.max_pulses;
    config.validate();

    std::vector<Qubit> fabricated;
    std::vector<TuningTarget> targets;
    std::unordered_set<std::string> seen;
    for (const auto& q : qubits) {
        if (!seen.insert(q.qubit_id).second)
            throw Error(ErrorCode::config, "duplicate qubit id '" + q.qubit_id + "'");
        FabricationModel fab;
        fab.design_resistance = q.design_resistance;
        fab.mean_offset_frac = o.mean_offset_frac;
        fab.sigma_frac = o.sigma_frac;
        fab.relax_mean = o.relax_mean;
        fab.relax_sigma = o.relax_sigma;
        fabricated.push_back({q.qubit_id, sample_fabricated(fab, qubit_seed(o.seed, q.qubit_id))});
        const double target = o.fixed_threshold > 0.0 ? o.fixed_threshold * (1.0 + o.reserve)
                                                      : q.design_resistance * (1.0 - o.aging_budget);
        targets.push_back({q.qubit_id, target, o.reserve});
    }

    auto campaign = std::make_unique<ft_campaign>();
    campaign->simulated = run_campaign(fabricated, targets, config,
                                       o.parallel ? ExecutionMode::parallel : ExecutionMode::sequential,
                                       o.threads);
    campaign->records = campaign->simulated->records;
    campaign->profile = config.relaxation;
    campaign->probe_delay_hr = config.probe_delay_hr;
    return campaign.release();
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

extern "C" {

const char* ft_version(void) { return FREQTRIM_VERSION; }

const char* ft_last_error(void) { return g_last_error.c_str(); }

const char* ft_status_name(ft_status status) {
    switch (status) {
        case FT_OK: return "ok";
        case FT_ERR_INVALID_ARGUMENT: return "invalid argument";
        case FT_ERR_INVALID_MODEL: return "invalid model";
        case FT_ERR_DOMAIN: return "domain error";
        case FT_ERR_FIT: return "fit error";
        case FT_ERR_CONTROLLER: return "controller error";
        case FT_ERR_CONFIG: return "configuration error";
        case FT_ERR_INFEASIBLE: return "infeasible";
        case FT_ERR_SEARCH: return "search failure";
        case FT_ERR_PARSE: return "parse error";
        case FT_ERR_IO: return "i/o error";
        case FT_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

// ---- frequency model -----------------------------------------------------

ft_status ft_power_law_fit(const double* resistance, const double* frequency, size_t count,
                           ft_power_law* out) {
    return guarded([&] {
        need_array(resistance, count, "resistance");
        need_array(frequency, count, "frequency");
        auto& o = need(out, "out");
        std::vector<FrequencyPoint> pts;
        for (size_t i = 0; i < count; ++i) pts.push_back({resistance[i], frequency[i]});
        o = from_model(fit_power_law(pts));
    });
}

ft_status ft_power_law_fit_file(const char* csv_path, ft_power_law* out, size_t* point_count) {
    return guarded([&] {
        const auto pts = io::load_frequency_points(need(csv_path, "csv_path") ? csv_path : "");
        need(out, "out") = from_model(fit_power_law(pts));
        if (point_count) *point_count = pts.size();
    });
}

ft_status ft_calibration_load(const char* json_path, ft_power_law* out) {
    return guarded([&] {
        need(json_path, "json_path");
        need(out, "out") = from_model(io::load_calibration(json_path));
    });
}

ft_status ft_calibration_save(const char* json_path, const ft_power_law* model) {
    return guarded([&] {
        need(json_path, "json_path");
        io::save_calibration(json_path, to_model(need(model, "model")));
    });
}

ft_status ft_predict_f(const ft_power_law* model, double resistance, double* out) {
    return guarded([&] { need(out, "out") = predict_f(to_model(need(model, "model")), resistance); });
}

ft_status ft_invert_r(const ft_power_law* model, double frequency, double* out) {
    return guarded([&] { need(out, "out") = invert_R(to_model(need(model, "model")), frequency); });
}

ft_status ft_assign_target(const ft_power_law* model, double f_design, double aging_budget,
                           ft_target_assignment* out) {
    return guarded([&] {
        const auto a = assign_target_R(to_model(need(model, "model")), f_design, aging_budget);
        need(out, "out") = {a.target_resistance, a.design_resistance, a.within_domain ? 1 : 0};
    });
}

ft_status ft_freq_equiv_sigma(const ft_power_law* model, double f_pred, double sigma_r_rel,
                              double* out) {
    return guarded([&] {
        need(out, "out") = freq_equiv_sigma(to_model(need(model, "model")), f_pred, sigma_r_rel);
    });
}

ft_status ft_compose_sigma(const double* components, size_t count, double* out) {
    return guarded([&] {
        need_array(components, count, "components");
        need(out, "out") = compose_sigma(std::span<const double>(components, count));
    });
}

ft_status ft_loss_tangent(double t1_us, double f_ghz, double* out) {
    return guarded([&] { need(out, "out") = loss_tangent(t1_us, f_ghz); });
}

ft_status ft_tunability(double f_max, double f_min, double* out) {
    return guarded([&] { need(out, "out") = tunability(f_max, f_min); });
}

ft_status ft_fit_relaxation(const double* t_hr, const double* delta_ohm, size_t count,
                            const double* breakpoints, size_t breakpoint_count,
                            size_t auto_changepoints, ft_segmented_fit* out) {
    return guarded([&] {
        need_array(t_hr, count, "t_hr");
        need_array(delta_ohm, count, "delta_ohm");
        auto& o = need(out, "out");
        fill_segmented(fit_relaxation_impl({t_hr, count}, {delta_ohm, count}, breakpoints,
                                           breakpoint_count, auto_changepoints),
                       o);
    });
}

ft_status ft_fit_relaxation_log(const char* log_path, const double* breakpoints,
                                size_t breakpoint_count, size_t auto_changepoints,
                                ft_segmented_fit* out, size_t* point_count) {
    return guarded([&] {
        need(log_path, "log_path");
        auto& o = need(out, "out");
        const auto rows = io::parse_resistance_log(std::filesystem::path(log_path));
        const auto series = io::relaxation_series(rows);
        fill_segmented(fit_relaxation_impl(series.t_hr, series.delta_ohm, breakpoints,
                                           breakpoint_count, auto_changepoints),
                       o);
        if (point_count) *point_count = series.t_hr.size();
    });
}

// ---- tuning --------------------------------------------------------------

void ft_tuning_options_default(ft_tuning_options* options) {
    if (!options) return;
    const FabricationModel fab;
    const CampaignConfig config;
    *options = ft_tuning_options{};
    options->seed = 0;
    options->mean_offset_frac = fab.mean_offset_frac;
    options->sigma_frac = fab.sigma_frac;
    options->relax_mean = fab.relax_mean;
    options->relax_sigma = fab.relax_sigma;
    options->aging_budget = 0.02;
    options->reserve = TuningTarget{}.relaxation_reserve;
    options->fixed_threshold = 0.0;
    options->step_kind = FT_STEP_EXPONENTIAL;
    options->mean_step = config.step.mean_step;
    options->noise_sigma = config.measurement.noise_sigma;
    options->probe_delay_hr = config.probe_delay_hr;
    options->max_pulses = config.max_pulses;
    options->parallel = 0;
    options->threads = 0;
}

ft_status ft_campaign_simulate(const ft_tuning_options* options, const char* const* qubit_ids,
                               const double* design_resistance, size_t count, ft_campaign** out) {
    return guarded([&] {
        const auto& o = need(options, "options");
        need_array(qubit_ids, count, "qubit_ids");
        need_array(design_resistance, count, "design_resistance");
        auto& result = need(out, "out");
        std::vector<io::DesignResistance> qubits;
        for (size_t i = 0; i < count; ++i) {
            if (!qubit_ids[i]) throw ArgumentError("qubit id " + std::to_string(i) + " is NULL");
            qubits.push_back({qubit_ids[i], design_resistance[i]});
        }
        result = simulate(o, qubits);
    });
}

ft_status ft_campaign_simulate_file(const ft_tuning_options* options, const char* design_csv,
                                    ft_campaign** out) {
    return guarded([&] {
        const auto& o = need(options, "options");
        need(design_csv, "design_csv");
        auto& result = need(out, "out");
        result = simulate(o, io::load_design_resistances(design_csv));
    });
}

ft_status ft_campaign_load(const char* csv_path, ft_campaign** out) {
    return guarded([&] {
        need(csv_path, "csv_path");
        auto& result = need(out, "out");
        auto campaign = std::make_unique<ft_campaign>();
        campaign->records = io::load_campaign(std::filesystem::path(csv_path));
        result = campaign.release();
    });
}

ft_status ft_campaign_save(const ft_campaign* campaign, const char* csv_path) {
    return guarded([&] {
        const auto& c = need(campaign, "campaign");
        need(csv_path, "csv_path");
        io::save_campaign(std::filesystem::path(csv_path), c.records);
    });
}

ft_status ft_campaign_write_log(const ft_campaign* campaign, const char* csv_path,
                                const double* monitor_hours, size_t monitor_count) {
    return guarded([&] {
        const auto& c = need(campaign, "campaign");
        need(csv_path, "csv_path");
        need_array(monitor_hours, monitor_count, "monitor_hours");
        if (!c.simulated)
            throw Error(ErrorCode::config, "resistance log needs a simulated campaign");
        const auto rows = io::campaign_log(*c.simulated, c.profile, c.probe_delay_hr,
                                           {monitor_hours, monitor_count});
        std::ostringstream os;
        io::write_resistance_log(os, rows);
        io::write_file(csv_path, os.str());
    });
}

size_t ft_campaign_size(const ft_campaign* campaign) {
    return campaign ? campaign->records.size() : 0;
}

ft_status ft_campaign_record(const ft_campaign* campaign, size_t index, ft_tune_record* out) {
    return guarded([&] {
        const auto& c = need(campaign, "campaign");
        auto& o = need(out, "out");
        if (index >= c.records.size()) throw ArgumentError("record index out of range");
        const auto& r = c.records[index];
        o = {r.qubit_id.c_str(), r.r_untuned,    r.r_target, r.threshold,
             r.r_before_last_pulse, r.r_last_pulse, r.r_tuned, r.pulses,
             r.already_above ? 1 : 0};
    });
}

ft_status ft_campaign_report_stats(const ft_campaign* campaign, ft_campaign_report* out) {
    return guarded([&] {
        const auto& c = need(campaign, "campaign");
        auto& o = need(out, "out");
        o = ft_campaign_report{};
        const CampaignSummary s = summarize_campaign(c.records);
        o.count = s.count;
        o.already_above = s.already_above;
        o.overshoot_mean = o.overshoot_sigma = o.relax_shift_mean = o.relax_shift_sigma = nan();
        o.reserve_mean = o.reserve_sigma = nan();
        o.precision_mean_frac = o.precision_sigma_frac = nan();
        o.precision_min_frac = o.precision_max_frac = nan();
        if (c.records.empty()) {
            o.untuned_mean_frac = o.untuned_sigma_frac = o.pulses_mean = nan();
            return;
        }
        o.untuned_mean_frac = s.untuned_frac.mean;
        o.untuned_sigma_frac = s.untuned_frac.sigma;
        o.pulses_mean = s.pulses.mean;
        o.max_tuning_distance = s.max_tuning_distance;
        if (s.already_above < s.count) {
            const PrecisionStats p = precision_stats(c.records);
            o.precision_mean_frac = p.mean_frac;
            o.precision_sigma_frac = p.sigma_frac;
            o.precision_min_frac = p.min_frac;
            o.precision_max_frac = p.max_frac;
            const OvershootStats ov = overshoot_stats(c.records);
            const ReserveCalibration rc = calibrate_reserve(c.records);
            o.overshoot_mean = ov.mean;
            o.overshoot_sigma = ov.sigma;
            o.relax_shift_mean = s.relax_shift.mean;
            o.relax_shift_sigma = s.relax_shift.sigma;
            o.reserve_mean = rc.mean;
            o.reserve_sigma = rc.sigma;
        }
    });
}

void ft_campaign_free(ft_campaign* campaign) { delete campaign; }

ft_status ft_compute_threshold(double target_resistance, double reserve, double* out) {
    return guarded([&] {
        need(out, "out") = compute_threshold(TuningTarget{"", target_resistance, reserve});
    });
}

// ---- lattices ------------------------------------------------------------

ft_status ft_lattice_create(size_t rows, size_t cols, const double* design_f,
                            const double* measured_f, ft_lattice** out) {
    return guarded([&] {
        need_array(design_f, rows * cols, "design_f");
        auto& result = need(out, "out");
        std::vector<LatticeNode> nodes(rows * cols);
        for (size_t i = 0; i < nodes.size(); ++i) {
            nodes[i].design_f = design_f[i];
            if (measured_f && !std::isnan(measured_f[i])) nodes[i].measured_f = measured_f[i];
        }
        auto l = std::make_unique<ft_lattice>();
        l->design.lattice = QubitLattice(rows, cols, std::move(nodes));
        l->design.base_frequency = 0.0;
        result = l.release();
    });
}

ft_status ft_lattice_load(const char* json_path, ft_lattice** out) {
    return guarded([&] {
        need(json_path, "json_path");
        auto& result = need(out, "out");
        auto l = std::make_unique<ft_lattice>();
        l->design = io::load_design(json_path);
        result = l.release();
    });
}

ft_status ft_lattice_save(const ft_lattice* lattice, const char* json_path) {
    return guarded([&] {
        const auto& l = need(lattice, "lattice");
        need(json_path, "json_path");
        io::write_file(json_path, io::design_to_json(l.design));
    });
}

void ft_lattice_free(ft_lattice* lattice) { delete lattice; }

size_t ft_lattice_rows(const ft_lattice* lattice) {
    return lattice ? lattice->design.lattice.rows() : 0;
}

size_t ft_lattice_cols(const ft_lattice* lattice) {
    return lattice ? lattice->design.lattice.cols() : 0;
}

size_t ft_lattice_qubits(const ft_lattice* lattice) {
    return lattice ? lattice->design.lattice.size() : 0;
}

int ft_lattice_has_measurements(const ft_lattice* lattice) {
    return lattice && lattice->design.lattice.has_measurements() ? 1 : 0;
}

ft_status ft_lattice_frequency(const ft_lattice* lattice, size_t qubit, double* design,
                               double* measured) {
    return guarded([&] {
        const auto& l = need(lattice, "lattice");
        if (qubit >= l.design.lattice.size()) throw ArgumentError("qubit index out of range");
        const auto& node = l.design.lattice.node(qubit);
        if (design) *design = node.design_f;
        if (measured) *measured = node.measured_f.value_or(nan());
    });
}

ft_status ft_lattice_design_window(const ft_lattice* lattice, double* lo, double* hi) {
    return guarded([&] {
        const auto& l = need(lattice, "lattice");
        need(lo, "lo") = l.design.design_window.lo;
        need(hi, "hi") = l.design.design_window.hi;
    });
}

ft_status ft_lattice_detunings(const ft_lattice* lattice, int use_measured, double window_lo,
                               double window_hi, ft_detuning_report** out) {
    return guarded([&] {
        const auto& l = need(lattice, "lattice");
        auto& result = need(out, "out");
        const auto& lat = l.design.lattice;
        const auto freqs = use_measured ? lat.measured_frequencies() : lat.design_frequencies();
        auto r = std::make_unique<ft_detuning_report>();
        r->report = edge_detunings(lat, std::span<const double>(freqs), Window{window_lo, window_hi});
        result = r.release();
    });
}

ft_status ft_detunings_from(const ft_lattice* lattice, const double* frequencies, double window_lo,
                            double window_hi, ft_detuning_report** out) {
    return guarded([&] {
        const auto& l = need(lattice, "lattice");
        const auto& lat = l.design.lattice;
        need_array(frequencies, lat.size(), "frequencies");
        auto& result = need(out, "out");
        auto r = std::make_unique<ft_detuning_report>();
        r->report = edge_detunings(lat, std::span<const double>(frequencies, lat.size()),
                                   Window{window_lo, window_hi});
        result = r.release();
    });
}

ft_status ft_report_summary(const ft_detuning_report* report, ft_detuning_summary* out) {
    return guarded([&] {
        const auto& r = need(report, "report").report;
        need(out, "out") = {r.edges.size(), r.median_abs, r.min_abs,
                            r.max_abs,      r.out_of_window, r.ties};
    });
}

ft_status ft_report_edge(const ft_detuning_report* report, size_t index, ft_edge_detuning* out) {
    return guarded([&] {
        const auto& r = need(report, "report").report;
        if (index >= r.edges.size()) throw ArgumentError("edge index out of range");
        const auto& e = r.edges[index];
        need(out, "out") = {e.edge.a,    e.edge.b,         e.modulated, e.signed_mhz,
                            e.abs_mhz,   e.tie ? 1 : 0,    e.in_window ? 1 : 0};
    });
}

ft_status ft_report_modulation(const ft_detuning_report* report, int limit, int* counts,
                               size_t count_capacity, int* max_count, int* valid) {
    return guarded([&] {
        const auto& r = need(report, "report").report;
        const ModulationAssignment m = modulation_assignment(r, limit);
        if (counts) {
            if (count_capacity < m.counts.size()) throw ArgumentError("counts buffer too small");
            std::copy(m.counts.begin(), m.counts.end(), counts);
        }
        if (max_count) *max_count = m.max_count;
        if (valid) *valid = m.valid ? 1 : 0;
    });
}

ft_status ft_report_deviation(const ft_detuning_report* measured, const ft_detuning_report* design,
                              double* mean, double* sigma) {
    return guarded([&] {
        const auto s = detuning_deviation_stats(need(measured, "measured").report,
                                                need(design, "design").report);
        need(mean, "mean") = s.mean;
        need(sigma, "sigma") = s.sigma;
    });
}

void ft_report_free(ft_detuning_report* report) { delete report; }

ft_status ft_fit_gaussian(const double* samples, size_t count, ft_gaussian_fit* out) {
    return guarded([&] {
        need_array(samples, count, "samples");
        const auto g = fit_gaussian(std::span<const double>(samples, count));
        need(out, "out") = {g.mu, g.sigma, g.sample_count};
    });
}

ft_status ft_spread_after_centering(const double* const* chips, const size_t* chip_sizes,
                                    size_t chip_count, double mean_design_frequency,
                                    ft_gaussian_fit* fit, double* sigma_percent) {
    return guarded([&] {
        need_array(chips, chip_count, "chips");
        need_array(chip_sizes, chip_count, "chip_sizes");
        std::vector<ChipDeviations> data;
        for (size_t i = 0; i < chip_count; ++i) {
            need_array(chips[i], chip_sizes[i], "chip");
            data.emplace_back(chips[i], chips[i] + chip_sizes[i]);
        }
        const ChipSpread s = spread_after_centering(data, mean_design_frequency);
        if (fit) *fit = {s.fit.mu, s.fit.sigma, s.fit.sample_count};
        if (sigma_percent) *sigma_percent = s.sigma_percent;
    });
}

ft_status ft_detuning_error_sigma(double sigma_f, double* out) {
    return guarded([&] { need(out, "out") = detuning_error_sigma(sigma_f); });
}

ft_status ft_lattice_park(const ft_lattice* lattice, const ft_parking_options* options,
                          double* offsets, ft_parking_plan* plan, size_t* violating_a,
                          size_t* violating_b, size_t violating_capacity) {
    return guarded([&] {
        const auto& l = need(lattice, "lattice");
        const auto& o = need(options, "options");
        auto& p = need(plan, "plan");
        ParkingOptions opt;
        opt.window = {o.window_lo, o.window_hi};
        opt.max_park = o.max_park;
        opt.step = o.step;
        opt.allow_upward = o.allow_upward != 0;
        const auto& lat = l.design.lattice;
        bool any_measured = false;
        for (size_t q = 0; q < lat.size(); ++q) any_measured |= lat.node(q).measured_f.has_value();
        const auto freqs = any_measured ? lat.measured_frequencies() : lat.design_frequencies();
        const ParkingPlan result = optimize_parking(lat, std::span<const double>(freqs), opt);
        p = {result.feasible ? 1 : 0, result.parked, result.max_abs_offset,
             result.sum_abs_offset, result.violating_edges.size()};
        if (offsets) std::copy(result.offsets.begin(), result.offsets.end(), offsets);
        for (size_t i = 0; i < result.violating_edges.size() && i < violating_capacity; ++i) {
            if (violating_a) violating_a[i] = result.violating_edges[i].a;
            if (violating_b) violating_b[i] = result.violating_edges[i].b;
        }
    });
}

// ---- yield ---------------------------------------------------------------

namespace {

UnitCellDesign to_cell(const ft_unit_cell& c) {
    UnitCellDesign cell;
    for (size_t i = 0; i < 9; ++i) cell.offsets[i / 3][i % 3] = c.offsets[i];
    cell.base_frequency = c.base_frequency;
    cell.design_window = {c.window_lo, c.window_hi};
    return cell;
}

ft_unit_cell from_cell(const UnitCellDesign& cell) {
    ft_unit_cell c{};
    for (size_t i = 0; i < 9; ++i) c.offsets[i] = cell.offsets[i / 3][i % 3];
    c.base_frequency = cell.base_frequency;
    c.window_lo = cell.design_window.lo;
    c.window_hi = cell.design_window.hi;
    return c;
}

}  // namespace

ft_status ft_unit_cell_generate(double window_lo, double window_hi, uint64_t seed,
                                ft_unit_cell* out) {
    return guarded([&] {
        auto& o = need(out, "out");
        o = from_cell(generate_unit_cell(Window{window_lo, window_hi}, seed));
    });
}

ft_status ft_unit_cell_violations(const ft_unit_cell* cell, double window_lo, double window_hi,
                                  size_t* violations) {
    return guarded([&] {
        const auto c = to_cell(need(cell, "cell"));
        const Window w{window_lo, window_hi};
        w.validate();
        need(violations, "violations") = check_unit_cell(c.offsets, w).size();
    });
}

ft_status ft_unit_cell_from_lattice(const ft_lattice* lattice, ft_unit_cell* out) {
    return guarded([&] {
        const auto& d = need(lattice, "lattice").design;
        if (d.lattice.rows() != kCellSize || d.lattice.cols() != kCellSize)
            throw Error(ErrorCode::config, "unit cell design must be a 3x3 lattice");
        UnitCellDesign cell;
        cell.base_frequency = d.base_frequency;
        cell.design_window = d.design_window;
        for (size_t r = 0; r < kCellSize; ++r)
            for (size_t c = 0; c < kCellSize; ++c)
                cell.offsets[r][c] = d.lattice.node(d.lattice.index(r, c)).design_f - d.base_frequency;
        need(out, "out") = from_cell(cell);
    });
}

ft_status ft_tile(const ft_unit_cell* cell, size_t m, size_t n, ft_lattice** out) {
    return guarded([&] {
        const auto c = to_cell(need(cell, "cell"));
        auto& result = need(out, "out");
        auto l = std::make_unique<ft_lattice>();
        l->design.lattice = tile(c, m, n);
        l->design.base_frequency = c.base_frequency;
        l->design.design_window = c.design_window;
        result = l.release();
    });
}

ft_status ft_yield(const ft_lattice* lattice, const ft_yield_config* config, ft_yield_result* out) {
    return guarded([&] {
        const auto& l = need(lattice, "lattice");
        const auto& c = need(config, "config");
        YieldConfig cfg;
        cfg.sigma_f = c.sigma_mhz;
        cfg.window = {c.window_lo, c.window_hi};
        cfg.trials = c.trials;
        cfg.seed = c.seed;
        cfg.threads = c.threads;
        const YieldResult r = mc_chip_yield(l.design.lattice, cfg);
        need(out, "out") = {r.yield, r.ci_lo, r.ci_hi, r.passes, r.trials, r.qubit_count};
    });
}

ft_status ft_wafer_projection(const ft_yield_result* result, long dice, long* chips, long* qubits) {
    return guarded([&] {
        const auto& r = need(result, "result");
        YieldResult y;
        y.yield = r.yield;
        y.qubit_count = r.qubits;
        const WaferProjection w = wafer_projection(y, dice);
        need(chips, "chips") = w.chips;
        need(qubits, "qubits") = w.qubits;
    });
}

ft_status ft_yield_table_save(const char* csv_path, const ft_yield_result* results,
                              const double* sigmas, size_t count) {
    return guarded([&] {
        need(csv_path, "csv_path");
        need_array(results, count, "results");
        need_array(sigmas, count, "sigmas");
        std::vector<YieldPoint> points;
        for (size_t i = 0; i < count; ++i) {
            YieldPoint p;
            p.sigma_f = sigmas[i];
            p.result = {results[i].yield,  results[i].ci_lo,  results[i].ci_hi,
                        results[i].passes, results[i].trials, results[i].qubits};
            points.push_back(p);
        }
        std::ostringstream os;
        io::write_yield_table(os, points);
        io::write_file(csv_path, os.str());
    });
}

// ---- bookkeeping ---------------------------------------------------------

namespace {

void copy_out(const std::string& text, char* buffer, size_t capacity) {
    need(buffer, "buffer");
    if (capacity < text.size() + 1) throw ArgumentError("buffer too small");
    std::memcpy(buffer, text.c_str(), text.size() + 1);
}

}  // namespace

ft_status ft_format_fixed(double value, int decimals, char* buffer, size_t capacity) {
    return guarded([&] {
        if (decimals < 0 || decimals > 17) throw ArgumentError("decimals must lie in [0, 17]");
        copy_out(io::format_fixed(value, decimals), buffer, capacity);
    });
}

ft_status ft_file_digest(const char* path, char* buffer, size_t capacity) {
    return guarded([&] {
        need(path, "path");
        copy_out(io::file_digest(path), buffer, capacity);
    });
}

ft_status ft_manifest_write(const char* json_path, const char* command, const char* config_json,
                            int has_seed, uint64_t seed, const char* const* input_paths,
                            size_t input_count) {
    return guarded([&] {
        need(json_path, "json_path");
        need(command, "command");
        need_array(input_paths, input_count, "input_paths");
        io::RunManifest m;
        m.command = command;
        m.config_json = config_json ? config_json : "";
        m.has_seed = has_seed != 0;
        m.seed = seed;
        m.tool_version = FREQTRIM_VERSION;
        for (size_t i = 0; i < input_count; ++i) {
            need(input_paths[i], "input path");
            m.inputs.emplace_back(input_paths[i], io::file_digest(input_paths[i]));
        }
        io::write_file(json_path, io::manifest_to_json(m));
    });
}

}  // extern "C"
