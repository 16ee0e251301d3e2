#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "freqtrim/freq_model.hpp"

// Square-lattice Hamiltonian targeting: nearest-neighbor detunings, which
// endpoint is modulated, chip-offset removal and parking.
namespace freqtrim {

struct Window {
    double lo = 20.0;
    double hi = 130.0;

    bool contains(double value) const noexcept { return value >= lo && value <= hi; }
    void validate() const;
};

struct LatticeNode {
    double design_f = 0.0;  // f01max, MHz
    std::optional<double> measured_f;
};

struct Edge {
    std::size_t a = 0;  // a < b
    std::size_t b = 0;
};

/// rows x cols grid; qubit id = row * cols + col; edges are the 4-neighbor
/// adjacency, horizontal edges first in row-major order, then vertical.
class QubitLattice {
public:
    QubitLattice() = default;
    QubitLattice(std::size_t rows, std::size_t cols);
    QubitLattice(std::size_t rows, std::size_t cols, std::vector<LatticeNode> nodes);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t index(std::size_t row, std::size_t col) const noexcept { return row * cols_ + col; }

    const std::vector<LatticeNode>& nodes() const noexcept { return nodes_; }
    LatticeNode& node(std::size_t id) { return nodes_.at(id); }
    const LatticeNode& node(std::size_t id) const { return nodes_.at(id); }
    const std::vector<Edge>& edges() const noexcept { return edges_; }

    std::vector<double> design_frequencies() const;
    /// Throws Error(config) naming every node without a measurement.
    std::vector<double> measured_frequencies() const;
    bool has_measurements() const;

private:
    void build_edges();

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<LatticeNode> nodes_;
    std::vector<Edge> edges_;
};

std::string node_label(const QubitLattice& lattice, std::size_t id);

struct EdgeDetuning {
    Edge edge;
    double signed_mhz = 0.0;  // f(b) - f(a)
    double abs_mhz = 0.0;
    std::size_t modulated = 0;  // higher-frequency endpoint
    bool tie = false;           // equal frequencies, modulated = lower id
    bool in_window = false;
};

struct DetuningReport {
    Window window;
    std::vector<EdgeDetuning> edges;
    std::vector<int> modulated_count;  // per qubit
    double median_abs = 0.0;
    double min_abs = 0.0;
    double max_abs = 0.0;
    std::size_t out_of_window = 0;
    std::size_t ties = 0;
};

DetuningReport edge_detunings(const QubitLattice& lattice, std::span<const double> freqs,
                              Window window = {});
/// Throws Error(config) listing the nodes with no frequency.
DetuningReport edge_detunings(const QubitLattice& lattice,
                              std::span<const std::optional<double>> freqs, Window window = {});

struct ModulationAssignment {
    std::vector<int> counts;
    int max_count = 0;
    int limit = 2;
    bool valid = true;
    std::vector<std::size_t> overloaded;
};

ModulationAssignment modulation_assignment(const DetuningReport& report, int limit = 2);

using ChipDeviations = std::vector<double>;

/// Removes each chip's mean deviation.
std::vector<ChipDeviations> subtract_global_offset(std::span<const ChipDeviations> chips);

struct ChipSpread {
    GaussianFit fit;
    double sigma_percent = 0.0;  // of mean design frequency
};

ChipSpread spread_after_centering(std::span<const ChipDeviations> chips,
                                  double mean_design_frequency);

/// sqrt(2) * sigma_f for two independent Gaussian endpoints.
double detuning_error_sigma(double sigma_f);

struct DeviationStats {
    double mean = 0.0;
    double sigma = 0.0;
};

/// Statistics of measured minus design signed detuning over matching edges.
DeviationStats detuning_deviation_stats(const DetuningReport& measured,
                                        const DetuningReport& design);

struct ParkingOptions {
    Window window;
    double max_park = 50.0;  // MHz
    double step = 1.0;       // MHz
    bool allow_upward = false;
    std::size_t max_qubits = 12;
};

struct ParkingPlan {
    bool feasible = false;
    std::vector<double> offsets;  // MHz per qubit
    std::size_t parked = 0;
    double max_abs_offset = 0.0;
    double sum_abs_offset = 0.0;
    // Edges out of window before parking.
    std::vector<Edge> violating_edges;
};

/// Exact minimum of (parked count, max |offset|, sum |offset|) in that
/// lexicographic order such that every |detuning| lies in the window.
ParkingPlan optimize_parking(const QubitLattice& lattice, std::span<const double> freqs,
                             const ParkingOptions& options);
/// Uses the lattice's measured frequencies.
ParkingPlan optimize_parking(const QubitLattice& lattice, const ParkingOptions& options);

}  // namespace freqtrim
