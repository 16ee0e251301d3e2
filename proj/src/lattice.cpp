#include "freqtrim/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "freqtrim/error.hpp"
#include "freqtrim/stats.hpp"

namespace freqtrim {

void Window::validate() const {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
        throw Error(ErrorCode::config, "window: need lo < hi");
}

QubitLattice::QubitLattice(std::size_t rows, std::size_t cols)
    : QubitLattice(rows, cols, std::vector<LatticeNode>(rows * cols)) {}

QubitLattice::QubitLattice(std::size_t rows, std::size_t cols, std::vector<LatticeNode> nodes)
    : rows_(rows), cols_(cols), nodes_(std::move(nodes)) {
    if (rows == 0 || cols == 0) throw Error(ErrorCode::config, "lattice: rows and cols must be >= 1");
    if (nodes_.size() != rows * cols)
        throw Error(ErrorCode::config, "lattice: expected " + std::to_string(rows * cols) +
                                           " nodes, got " + std::to_string(nodes_.size()));
    build_edges();
}

void QubitLattice::build_edges() {
    edges_.clear();
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c + 1 < cols_; ++c) edges_.push_back({index(r, c), index(r, c + 1)});
    for (std::size_t r = 0; r + 1 < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) edges_.push_back({index(r, c), index(r + 1, c)});
}

std::vector<double> QubitLattice::design_frequencies() const {
    std::vector<double> out;
    out.reserve(nodes_.size());
    for (const auto& n : nodes_) out.push_back(n.design_f);
    return out;
}

bool QubitLattice::has_measurements() const {
    return std::all_of(nodes_.begin(), nodes_.end(),
                       [](const LatticeNode& n) { return n.measured_f.has_value(); });
}

std::vector<double> QubitLattice::measured_frequencies() const {
    std::vector<double> out;
    std::string missing;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].measured_f) {
            out.push_back(*nodes_[i].measured_f);
        } else {
            missing += (missing.empty() ? "" : ", ") + node_label(*this, i);
        }
    }
    if (!missing.empty())
        throw Error(ErrorCode::config, "missing measured frequency for " + missing);
    return out;
}

std::string node_label(const QubitLattice& lattice, std::size_t id) {
    const std::size_t cols = std::max<std::size_t>(lattice.cols(), 1);
    return "q" + std::to_string(id) + " (" + std::to_string(id / cols) + "," +
           std::to_string(id % cols) + ")";
}

// ---------------------------------------------------------------------------

DetuningReport edge_detunings(const QubitLattice& lattice, std::span<const double> freqs,
                              Window window) {
    window.validate();
    if (freqs.size() != lattice.size())
        throw Error(ErrorCode::config, "edge_detunings: " + std::to_string(freqs.size()) +
                                           " frequencies for " + std::to_string(lattice.size()) +
                                           " qubits");
    DetuningReport report;
    report.window = window;
    report.modulated_count.assign(lattice.size(), 0);
    std::vector<double> magnitudes;
    for (const Edge& e : lattice.edges()) {
        EdgeDetuning d;
        d.edge = e;
        d.signed_mhz = freqs[e.b] - freqs[e.a];
        d.abs_mhz = std::abs(d.signed_mhz);
        d.tie = freqs[e.a] == freqs[e.b];
        d.modulated = freqs[e.b] > freqs[e.a] ? e.b : e.a;
        d.in_window = window.contains(d.abs_mhz);
        ++report.modulated_count[d.modulated];
        if (!d.in_window) ++report.out_of_window;
        if (d.tie) ++report.ties;
        magnitudes.push_back(d.abs_mhz);
        report.edges.push_back(d);
    }
    if (!magnitudes.empty()) {
        report.median_abs = median(magnitudes);
        report.min_abs = *std::min_element(magnitudes.begin(), magnitudes.end());
        report.max_abs = *std::max_element(magnitudes.begin(), magnitudes.end());
    }
    return report;
}

DetuningReport edge_detunings(const QubitLattice& lattice,
                              std::span<const std::optional<double>> freqs, Window window) {
    if (freqs.size() != lattice.size())
        throw Error(ErrorCode::config, "edge_detunings: " + std::to_string(freqs.size()) +
                                           " frequencies for " + std::to_string(lattice.size()) +
                                           " qubits");
    std::vector<double> values;
    std::string missing;
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        if (freqs[i]) {
            values.push_back(*freqs[i]);
        } else {
            missing += (missing.empty() ? "" : ", ") + node_label(lattice, i);
        }
    }
    if (!missing.empty()) throw Error(ErrorCode::config, "missing frequency for " + missing);
    return edge_detunings(lattice, std::span<const double>(values), window);
}

ModulationAssignment modulation_assignment(const DetuningReport& report, int limit) {
    ModulationAssignment out;
    out.limit = limit;
    out.counts.assign(report.modulated_count.size(), 0);
    for (const auto& e : report.edges) ++out.counts.at(e.modulated);
    for (std::size_t q = 0; q < out.counts.size(); ++q) {
        out.max_count = std::max(out.max_count, out.counts[q]);
        if (out.counts[q] > limit) out.overloaded.push_back(q);
    }
    out.valid = out.overloaded.empty();
    return out;
}

// ---------------------------------------------------------------------------

std::vector<ChipDeviations> subtract_global_offset(std::span<const ChipDeviations> chips) {
    if (chips.empty()) throw Error(ErrorCode::config, "subtract_global_offset: no chips");
    std::vector<ChipDeviations> out;
    out.reserve(chips.size());
    for (std::size_t i = 0; i < chips.size(); ++i) {
        if (chips[i].empty())
            throw Error(ErrorCode::config, "subtract_global_offset: chip " + std::to_string(i) +
                                               " has no qubits");
        const double offset = mean(chips[i]);
        ChipDeviations centered;
        centered.reserve(chips[i].size());
        for (double d : chips[i]) centered.push_back(d - offset);
        out.push_back(std::move(centered));
    }
    return out;
}

ChipSpread spread_after_centering(std::span<const ChipDeviations> chips,
                                  double mean_design_frequency) {
    if (!(mean_design_frequency > 0.0))
        throw Error(ErrorCode::domain, "spread_after_centering: design frequency must be positive");
    std::vector<double> pooled;
    for (const auto& chip : subtract_global_offset(chips))
        pooled.insert(pooled.end(), chip.begin(), chip.end());
    ChipSpread out;
    out.fit = fit_gaussian(pooled);
    out.sigma_percent = 100.0 * out.fit.sigma / mean_design_frequency;
    return out;
}

double detuning_error_sigma(double sigma_f) {
    if (!(sigma_f >= 0.0)) throw Error(ErrorCode::domain, "detuning_error_sigma: sigma must be >= 0");
    return std::sqrt(2.0) * sigma_f;
}

DeviationStats detuning_deviation_stats(const DetuningReport& measured,
                                        const DetuningReport& design) {
    if (measured.edges.size() != design.edges.size())
        throw Error(ErrorCode::config, "detuning_deviation_stats: edge sets differ in size");
    if (measured.edges.empty()) throw Error(ErrorCode::config, "detuning_deviation_stats: no edges");
    std::vector<double> dev;
    for (std::size_t i = 0; i < measured.edges.size(); ++i) {
        const auto& m = measured.edges[i];
        const auto& d = design.edges[i];
        if (m.edge.a != d.edge.a || m.edge.b != d.edge.b)
            throw Error(ErrorCode::config, "detuning_deviation_stats: edge " + std::to_string(i) +
                                               " does not match");
        dev.push_back(m.signed_mhz - d.signed_mhz);
    }
    return {mean(dev), population_sigma(dev)};
}

// ---------------------------------------------------------------------------
// Parking: arc-consistency pruning followed by depth-first branch and bound.

namespace {

struct Cost {
    std::size_t parked = 0;
    double max_abs = 0.0;
    double sum_abs = 0.0;

    auto key() const { return std::tie(parked, max_abs, sum_abs); }
};

class ParkingSearch {
public:
    ParkingSearch(const QubitLattice& lattice, std::span<const double> freqs,
                  const ParkingOptions& opt)
        : freqs_(freqs.begin(), freqs.end()), window_(opt.window), n_(freqs.size()) {
        const auto steps = static_cast<long>(std::floor(opt.max_park / opt.step + 1e-9));
        std::vector<double> values{0.0};
        for (long k = 1; k <= steps; ++k) {
            values.push_back(-static_cast<double>(k) * opt.step);
            if (opt.allow_upward) values.push_back(static_cast<double>(k) * opt.step);
        }
        domains_.assign(n_, values);
        neighbors_.resize(n_);
        for (const Edge& e : lattice.edges()) {
            neighbors_[e.a].push_back(e.b);
            neighbors_[e.b].push_back(e.a);
        }
        assignment_.assign(n_, 0.0);
    }

    bool compatible(std::size_t i, double vi, std::size_t j, double vj) const {
        return window_.contains(std::abs((freqs_[j] + vj) - (freqs_[i] + vi)));
    }

    // AC-3 over the edge constraints. False when some domain empties.
    bool enforce_arc_consistency() {
        std::vector<std::pair<std::size_t, std::size_t>> queue;
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j : neighbors_[i]) queue.emplace_back(i, j);
        while (!queue.empty()) {
            const auto [i, j] = queue.back();
            queue.pop_back();
            auto& di = domains_[i];
            const auto before = di.size();
            std::erase_if(di, [&](double vi) {
                return std::none_of(domains_[j].begin(), domains_[j].end(),
                                    [&](double vj) { return compatible(i, vi, j, vj); });
            });
            if (di.empty()) return false;
            if (di.size() != before)
                for (std::size_t k : neighbors_[i])
                    if (k != j) queue.emplace_back(k, i);
        }
        return true;
    }

    void search() { dfs(0, Cost{}); }

    bool found() const { return found_; }
    const std::vector<double>& best() const { return best_; }
    const Cost& best_cost() const { return best_cost_; }

private:
    bool consistent_with_assigned(std::size_t i, double v) const {
        for (std::size_t j : neighbors_[i])
            if (j < i && !compatible(i, v, j, assignment_[j])) return false;
        return true;
    }

    // Every unassigned neighbor of i keeps at least one supported value.
    bool forward_check(std::size_t i) const {
        for (std::size_t j : neighbors_[i]) {
            if (j <= i) continue;
            const bool ok = std::any_of(domains_[j].begin(), domains_[j].end(), [&](double vj) {
                for (std::size_t k : neighbors_[j])
                    if (k <= i && !compatible(j, vj, k, assignment_[k])) return false;
                return true;
            });
            if (!ok) return false;
        }
        return true;
    }

    void dfs(std::size_t i, const Cost& cost) {
        if (found_ && !(cost.key() < best_cost_.key())) return;
        if (i == n_) {
            found_ = true;
            best_ = assignment_;
            best_cost_ = cost;
            return;
        }
        for (double v : domains_[i]) {
            Cost next = cost;
            if (v != 0.0) {
                ++next.parked;
                next.max_abs = std::max(next.max_abs, std::abs(v));
                next.sum_abs += std::abs(v);
            }
            if (found_ && !(next.key() < best_cost_.key())) continue;
            if (!consistent_with_assigned(i, v)) continue;
            assignment_[i] = v;
            if (forward_check(i)) dfs(i + 1, next);
        }
        assignment_[i] = 0.0;
    }

    std::vector<double> freqs_;
    Window window_;
    std::size_t n_;
    std::vector<std::vector<double>> domains_;
    std::vector<std::vector<std::size_t>> neighbors_;
    std::vector<double> assignment_;
    bool found_ = false;
    std::vector<double> best_;
    Cost best_cost_;
};

}  // namespace

ParkingPlan optimize_parking(const QubitLattice& lattice, std::span<const double> freqs,
                             const ParkingOptions& options) {
    options.window.validate();
    if (!(options.step > 0.0)) throw Error(ErrorCode::config, "parking: step must be > 0");
    if (!(options.max_park >= 0.0)) throw Error(ErrorCode::config, "parking: max_park must be >= 0");
    if (freqs.size() != lattice.size())
        throw Error(ErrorCode::config, "parking: frequency count does not match lattice");
    if (lattice.size() > options.max_qubits)
        throw Error(ErrorCode::config, "parking: exact search supports at most " +
                                           std::to_string(options.max_qubits) + " qubits, got " +
                                           std::to_string(lattice.size()));

    ParkingPlan plan;
    plan.offsets.assign(lattice.size(), 0.0);
    for (const auto& d : edge_detunings(lattice, freqs, options.window).edges)
        if (!d.in_window) plan.violating_edges.push_back(d.edge);

    ParkingSearch search(lattice, freqs, options);
    if (!search.enforce_arc_consistency()) return plan;
    search.search();
    if (!search.found()) return plan;

    plan.feasible = true;
    plan.offsets = search.best();
    plan.parked = search.best_cost().parked;
    plan.max_abs_offset = search.best_cost().max_abs;
    plan.sum_abs_offset = search.best_cost().sum_abs;
    return plan;
}

ParkingPlan optimize_parking(const QubitLattice& lattice, const ParkingOptions& options) {
    const auto freqs = lattice.measured_frequencies();
    return optimize_parking(lattice, freqs, options);
}

}  // namespace freqtrim
