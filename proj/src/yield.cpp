#include "freqtrim/yield.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "freqtrim/error.hpp"
#include "freqtrim/random.hpp"
#include "freqtrim/stats.hpp"

namespace freqtrim {

std::vector<CellViolation> check_unit_cell(const CellOffsets& f, Window window) {
    std::vector<CellViolation> out;
    auto check = [&](std::size_t r0, std::size_t c0, std::size_t r1, std::size_t c1, bool stitch) {
        const double d = std::abs(f[r1][c1] - f[r0][c0]);
        if (!window.contains(d)) out.push_back({r0, c0, r1, c1, d, stitch});
    };
    for (std::size_t r = 0; r < kCellSize; ++r)
        for (std::size_t c = 0; c + 1 < kCellSize; ++c) check(r, c, r, c + 1, false);
    for (std::size_t r = 0; r + 1 < kCellSize; ++r)
        for (std::size_t c = 0; c < kCellSize; ++c) check(r, c, r + 1, c, false);
    // Translated copies meet column 2 against column 0 and row 2 against row 0.
    for (std::size_t r = 0; r < kCellSize; ++r) check(r, kCellSize - 1, r, 0, true);
    for (std::size_t c = 0; c < kCellSize; ++c) check(kCellSize - 1, c, 0, c, true);
    return out;
}

namespace {

class CellSearch {
public:
    CellSearch(Window window, std::vector<double> values, std::size_t budget)
        : window_(window), values_(std::move(values)), budget_(budget) {}

    enum class Outcome { found, exhausted, budget };

    Outcome run(Engine& engine) {
        nodes_ = 0;
        budget_hit_ = false;
        orders_.clear();
        for (std::size_t p = 0; p < kCellSize * kCellSize; ++p) {
            auto order = values_;
            std::shuffle(order.begin(), order.end(), engine);
            orders_.push_back(std::move(order));
        }
        if (place(0)) return Outcome::found;
        return budget_hit_ ? Outcome::budget : Outcome::exhausted;
    }

    const CellOffsets& cell() const { return cell_; }

private:
    bool ok(double a, double b) const { return window_.contains(std::abs(a - b)); }

    bool fits(std::size_t r, std::size_t c, double v) const {
        if (c > 0 && !ok(cell_[r][c - 1], v)) return false;
        if (r > 0 && !ok(cell_[r - 1][c], v)) return false;
        if (c == kCellSize - 1 && !ok(cell_[r][0], v)) return false;
        if (r == kCellSize - 1 && !ok(cell_[0][c], v)) return false;
        return true;
    }

    bool place(std::size_t pos) {
        if (pos == kCellSize * kCellSize) return true;
        if (++nodes_ > budget_) {
            budget_hit_ = true;
            return false;
        }
        const std::size_t r = pos / kCellSize;
        const std::size_t c = pos % kCellSize;
        for (double v : orders_[pos]) {
            if (!fits(r, c, v)) continue;
            cell_[r][c] = v;
            if (place(pos + 1)) return true;
            if (budget_hit_) return false;
        }
        return false;
    }

    Window window_;
    std::vector<double> values_;
    std::size_t budget_;
    std::size_t nodes_ = 0;
    bool budget_hit_ = false;
    std::vector<std::vector<double>> orders_;
    CellOffsets cell_{};
};

}  // namespace

UnitCellDesign generate_unit_cell(Window window, std::uint64_t seed,
                                  const CellSearchOptions& options) {
    // A single-value window is allowed here; the search then proves it empty.
    if (!std::isfinite(window.lo) || !std::isfinite(window.hi) || !(window.lo <= window.hi))
        throw Error(ErrorCode::config, "unit cell: need window lo <= hi");
    if (!(options.grid > 0.0) || !(options.max_offset >= 0.0))
        throw Error(ErrorCode::config, "unit cell: grid must be > 0 and range >= 0");
    std::vector<double> values;
    const auto steps = static_cast<long>(std::floor(options.max_offset / options.grid + 1e-9));
    for (long k = 0; k <= steps; ++k) values.push_back(static_cast<double>(k) * options.grid);

    CellSearch search(window, values, options.node_budget);
    for (std::size_t attempt = 0; attempt < std::max<std::size_t>(options.restarts, 1); ++attempt) {
        Engine engine(derive_seed(seed, attempt));
        switch (search.run(engine)) {
            case CellSearch::Outcome::found: {
                UnitCellDesign design;
                design.offsets = search.cell();
                design.design_window = window;
                return design;
            }
            case CellSearch::Outcome::exhausted:
                throw Error(ErrorCode::search,
                            "unit cell: no 3x3 assignment on the offset grid satisfies window [" +
                                std::to_string(window.lo) + ", " + std::to_string(window.hi) + "]");
            case CellSearch::Outcome::budget:
                break;
        }
    }
    throw Error(ErrorCode::search, "unit cell: restart budget exhausted without a valid cell");
}

QubitLattice tile(const UnitCellDesign& cell, std::size_t m, std::size_t n) {
    if (m == 0 || n == 0) throw Error(ErrorCode::config, "tile: m and n must be >= 1");
    const std::size_t rows = kCellSize * m;
    const std::size_t cols = kCellSize * n;
    std::vector<LatticeNode> nodes(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            nodes[r * cols + c].design_f =
                cell.base_frequency + cell.offsets[r % kCellSize][c % kCellSize];
    return QubitLattice(rows, cols, std::move(nodes));
}

void YieldConfig::validate() const {
    if (!(sigma_f >= 0.0) || !std::isfinite(sigma_f))
        throw Error(ErrorCode::config, "yield: sigma must be >= 0");
    if (trials == 0) throw Error(ErrorCode::config, "yield: trials must be >= 1");
    window.validate();
}

YieldResult mc_chip_yield(const QubitLattice& lattice, const YieldConfig& config) {
    config.validate();
    const std::vector<double> design = lattice.design_frequencies();
    const auto& edges = lattice.edges();

    auto run_block = [&](std::size_t begin, std::size_t end) {
        std::vector<double> f(design.size());
        std::size_t passes = 0;
        for (std::size_t trial = begin; trial < end; ++trial) {
            Engine engine(derive_seed(config.seed, trial));
            std::normal_distribution<double> z(0.0, 1.0);
            for (std::size_t q = 0; q < f.size(); ++q) f[q] = design[q] + config.sigma_f * z(engine);
            const bool pass = std::all_of(edges.begin(), edges.end(), [&](const Edge& e) {
                return config.window.contains(std::abs(f[e.b] - f[e.a]));
            });
            if (pass) ++passes;
        }
        return passes;
    };

    unsigned workers = config.threads ? config.threads
                                      : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, config.trials));

    std::size_t passes = 0;
    if (workers <= 1) {
        passes = run_block(0, config.trials);
    } else {
        std::vector<std::size_t> counts(workers, 0);
        {
            std::vector<std::jthread> pool;
            const std::size_t chunk = (config.trials + workers - 1) / workers;
            for (unsigned w = 0; w < workers; ++w) {
                const std::size_t begin = std::min(config.trials, w * chunk);
                const std::size_t end = std::min(config.trials, begin + chunk);
                pool.emplace_back([&, w, begin, end] { counts[w] = run_block(begin, end); });
            }
        }
        for (std::size_t c : counts) passes += c;
    }

    YieldResult result;
    result.passes = passes;
    result.trials = config.trials;
    result.qubit_count = lattice.size();
    result.yield = static_cast<double>(passes) / static_cast<double>(config.trials);
    const Interval ci = wilson_interval(passes, config.trials);
    result.ci_lo = ci.lo;
    result.ci_hi = ci.hi;
    return result;
}

YieldResult yield_for_cells(const UnitCellDesign& cell, std::size_t m, std::size_t n,
                            const YieldConfig& config) {
    return mc_chip_yield(tile(cell, m, n), config);
}

std::vector<YieldPoint> yield_curve(const UnitCellDesign& cell, std::span<const double> sigmas,
                                    std::span<const std::pair<std::size_t, std::size_t>> sizes,
                                    const YieldConfig& base) {
    std::vector<YieldPoint> out;
    for (const auto& [m, n] : sizes) {
        const QubitLattice lattice = tile(cell, m, n);
        for (double sigma : sigmas) {
            YieldConfig cfg = base;
            cfg.sigma_f = sigma;
            out.push_back({m, n, sigma, mc_chip_yield(lattice, cfg)});
        }
    }
    return out;
}

WaferProjection wafer_projection(const YieldResult& result, long dice) {
    if (dice < 0) throw Error(ErrorCode::config, "wafer_projection: dice must be >= 0");
    WaferProjection out;
    out.chips = std::lround(result.yield * static_cast<double>(dice));
    out.qubits = out.chips * static_cast<long>(result.qubit_count);
    return out;
}

}  // namespace freqtrim
