#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "freqtrim/lattice.hpp"

// Detuning-edge yield: tileable 3x3 unit cells and Monte Carlo chip yield.
namespace freqtrim {

inline constexpr std::size_t kCellSize = 3;
using CellOffsets = std::array<std::array<double, kCellSize>, kCellSize>;

struct UnitCellDesign {
    CellOffsets offsets{};         // MHz, relative to base_frequency
    double base_frequency = 4628.0;
    Window design_window{40.0, 110.0};
};

struct CellViolation {
    std::size_t r0, c0, r1, c1;
    double abs_detuning;
    bool stitching;
};

/// Checks the 12 internal and 6 stitching constraints.
std::vector<CellViolation> check_unit_cell(const CellOffsets& offsets, Window window);

struct CellSearchOptions {
    double grid = 10.0;
    double max_offset = 250.0;
    std::size_t restarts = 64;
    std::size_t node_budget = 200'000;  // per restart
};

/// Randomized-restart backtracking over the offset grid. Throws
/// Error(search) when no valid cell exists or the budget is exhausted.
UnitCellDesign generate_unit_cell(Window window, std::uint64_t seed,
                                  const CellSearchOptions& options = {});

/// (3m) x (3n) lattice of translated copies.
QubitLattice tile(const UnitCellDesign& cell, std::size_t m, std::size_t n);

struct YieldConfig {
    double sigma_f = 0.0;  // MHz
    Window window{20.0, 130.0};
    std::size_t trials = 100'000;
    std::uint64_t seed = 0;
    unsigned threads = 1;  // 0 = hardware concurrency

    void validate() const;
};

struct YieldResult {
    double yield = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::size_t passes = 0;
    std::size_t trials = 0;
    std::size_t qubit_count = 0;
};

/// Trial i draws from an engine seeded by derive_seed(seed, i), so the
/// estimate does not depend on thread count or scheduling.
YieldResult mc_chip_yield(const QubitLattice& lattice, const YieldConfig& config);

struct YieldPoint {
    std::size_t m = 1;
    std::size_t n = 1;
    double sigma_f = 0.0;
    YieldResult result;
};

YieldResult yield_for_cells(const UnitCellDesign& cell, std::size_t m, std::size_t n,
                            const YieldConfig& config);

std::vector<YieldPoint> yield_curve(const UnitCellDesign& cell, std::span<const double> sigmas,
                                    std::span<const std::pair<std::size_t, std::size_t>> sizes,
                                    const YieldConfig& base);

inline constexpr long kDefaultDicePerWafer = 212;

struct WaferProjection {
    long chips = 0;
    long qubits = 0;
};

WaferProjection wafer_projection(const YieldResult& result, long dice = kDefaultDicePerWafer);

}  // namespace freqtrim
