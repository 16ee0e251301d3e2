#include <cmath>
#include <utility>
#include <vector>

#include "doctest.h"
#include "freqtrim/error.hpp"
#include "freqtrim/stats.hpp"
#include "freqtrim/yield.hpp"

using namespace freqtrim;

namespace {

// Independent checker: every internal neighbor pair plus the wraparound
// pairs that appear once the cell is translated.
std::size_t count_violations(const CellOffsets& o, Window w) {
    std::size_t bad = 0;
    auto test = [&](double a, double b) { bad += w.contains(std::abs(a - b)) ? 0 : 1; };
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) {
            if (c + 1 < 3) test(o[r][c], o[r][c + 1]);
            if (r + 1 < 3) test(o[r][c], o[r + 1][c]);
        }
    for (std::size_t k = 0; k < 3; ++k) {
        test(o[k][2], o[k][0]);
        test(o[2][k], o[0][k]);
    }
    return bad;
}

UnitCellDesign additive_cell() {
    UnitCellDesign cell;
    cell.offsets = {{{0, 50, 100}, {100, 150, 200}, {50, 100, 150}}};
    return cell;
}

YieldConfig config(double sigma, std::size_t trials, std::uint64_t seed = 1) {
    YieldConfig c;
    c.sigma_f = sigma;
    c.trials = trials;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("additive cell satisfies all constraints") {
    const auto cell = additive_cell();
    CHECK(count_violations(cell.offsets, {40, 110}) == 0);
    CHECK(check_unit_cell(cell.offsets, {40, 110}).empty());
}

TEST_CASE("checker flags violations the oracle sees") {
    CellOffsets o{{{0, 40, 80}, {40, 80, 120}, {80, 120, 160}}};
    const auto v = check_unit_cell(o, {40, 40});
    CHECK(v.size() == count_violations(o, {40, 40}));
    CHECK_FALSE(v.empty());
    bool stitching = false;
    for (const auto& x : v) stitching |= x.stitching;
    CHECK(stitching);
}

TEST_CASE("over-constrained window fails the search") {
    CHECK_THROWS_AS(generate_unit_cell({40, 40}, 1), Error);
    try {
        generate_unit_cell({40, 40}, 1);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::search);
    }
}

TEST_CASE("generated cells pass the independent checker") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto cell = generate_unit_cell({40, 110}, seed);
        CHECK(count_violations(cell.offsets, {40, 110}) == 0);
        for (const auto& row : cell.offsets)
            for (double v : row) {
                CHECK(v >= 0.0);
                CHECK(v <= 250.0);
                CHECK(std::fmod(v, 10.0) == 0.0);
            }
    }
    const auto a = generate_unit_cell({40, 110}, 42);
    const auto b = generate_unit_cell({40, 110}, 42);
    CHECK(a.offsets == b.offsets);
}

TEST_CASE("tiling") {
    const auto cell = additive_cell();
    const auto one = tile(cell, 1, 1);
    CHECK(one.size() == 9);
    CHECK(one.edges().size() == 12);
    CHECK(one.design_frequencies()[4] == 4628.0 + 150.0);

    const auto two = tile(cell, 1, 2);
    CHECK(two.size() == 18);
    CHECK(two.edges().size() == 27);

    for (auto [m, n] : std::vector<std::pair<std::size_t, std::size_t>>{{2, 3}, {3, 3}, {2, 6}}) {
        const auto lat = tile(cell, m, n);
        CHECK(lat.size() == 9 * m * n);
        CHECK(lat.edges().size() == 3 * m * (3 * n - 1) + 3 * n * (3 * m - 1));
        // Zero perturbation keeps every edge in the design window.
        const auto rep = edge_detunings(lat, lat.design_frequencies(), cell.design_window);
        CHECK(rep.out_of_window == 0);
        // Stitching edges repeat the cell's wraparound detunings.
        const auto f = lat.design_frequencies();
        for (const auto& e : lat.edges()) {
            const std::size_t cols = lat.cols();
            const std::size_t ra = e.a / cols, ca = e.a % cols, rb = e.b / cols, cb = e.b % cols;
            const double d = std::abs(f[e.a] - f[e.b]);
            if (ca % 3 == 2 && cb % 3 == 0)
                CHECK(d == std::abs(cell.offsets[ra % 3][2] - cell.offsets[ra % 3][0]));
            if (ra % 3 == 2 && rb % 3 == 0)
                CHECK(d == std::abs(cell.offsets[2][ca % 3] - cell.offsets[0][ca % 3]));
        }
    }
    CHECK_THROWS_AS(tile(cell, 0, 1), Error);
}

TEST_CASE("zero spread yields every chip") {
    const auto r = yield_for_cells(additive_cell(), 2, 2, config(0.0, 1000));
    CHECK(r.yield == 1.0);
    CHECK(r.passes == 1000);
    CHECK(r.qubit_count == 36);
    CHECK(r.ci_lo <= 1.0);
    CHECK(r.ci_hi == 1.0);
}

TEST_CASE("yield is independent of thread count") {
    const auto lat = tile(additive_cell(), 1, 2);
    auto c = config(18.4, 20000, 77);
    c.threads = 1;
    const auto a = mc_chip_yield(lat, c);
    c.threads = 4;
    const auto b = mc_chip_yield(lat, c);
    c.threads = 3;
    const auto d = mc_chip_yield(lat, c);
    CHECK(a.passes == b.passes);
    CHECK(a.passes == d.passes);
    CHECK(a.yield == b.yield);
}

TEST_CASE("yield bounds and interval width") {
    const auto lat = tile(additive_cell(), 1, 1);
    const auto small = mc_chip_yield(lat, config(18.4, 1000, 3));
    const auto large = mc_chip_yield(lat, config(18.4, 100000, 3));
    for (const auto& r : {small, large}) {
        CHECK(r.yield >= 0.0);
        CHECK(r.yield <= 1.0);
        CHECK(r.ci_lo <= r.yield);
        CHECK(r.ci_hi >= r.yield);
    }
    const double ratio = (small.ci_hi - small.ci_lo) / (large.ci_hi - large.ci_lo);
    CHECK(ratio > 7.0);
    CHECK(ratio < 14.0);
}

TEST_CASE("yield versus spread on a generated cell") {
    const auto cell = generate_unit_cell({40, 110}, 7);
    const auto lat = tile(cell, 1, 1);
    const auto y77 = mc_chip_yield(lat, config(7.7, 100000, 11));
    const auto y184 = mc_chip_yield(lat, config(18.4, 100000, 11));
    const auto y935 = mc_chip_yield(lat, config(93.5, 100000, 11));
    CHECK(y77.yield >= 0.75);
    CHECK(y77.yield <= 0.95);
    CHECK(y184.yield >= 0.08);
    CHECK(y184.yield <= 0.30);
    CHECK(y935.yield < 0.005);
}

TEST_CASE("yield curve is monotone in size and spread") {
    const auto cell = generate_unit_cell({40, 110}, 7);
    const std::vector<double> sigmas{5.0, 7.7, 12.0, 18.4};
    const std::vector<std::pair<std::size_t, std::size_t>> sizes{{1, 1}, {1, 2}, {2, 2}, {2, 6}};
    const auto curve = yield_curve(cell, sigmas, sizes, config(0.0, 20000, 5));
    REQUIRE(curve.size() == sigmas.size() * sizes.size());

    auto at = [&](std::size_t si, std::size_t zi) -> const YieldResult& {
        for (const auto& p : curve)
            if (p.sigma_f == sigmas[si] && p.m == sizes[zi].first && p.n == sizes[zi].second)
                return p.result;
        FAIL("missing point");
        return curve.front().result;
    };
    auto margin = [](const YieldResult& a, const YieldResult& b) {
        // 3 x the 95% half-widths, generous against shared-seed correlation.
        return 3.0 * ((a.ci_hi - a.ci_lo) + (b.ci_hi - b.ci_lo)) / 2.0;
    };
    for (std::size_t s = 0; s < sigmas.size(); ++s)
        for (std::size_t z = 0; z + 1 < sizes.size(); ++z) {
            const auto& a = at(s, z);
            const auto& b = at(s, z + 1);
            CHECK(b.yield <= a.yield + margin(a, b));
        }
    for (std::size_t z = 0; z < sizes.size(); ++z)
        for (std::size_t s = 0; s + 1 < sigmas.size(); ++s) {
            const auto& a = at(s, z);
            const auto& b = at(s + 1, z);
            CHECK(b.yield <= a.yield + margin(a, b));
        }
    CHECK(at(1, 3).yield > 0.0);
    CHECK(at(1, 3).qubit_count == 108);
}

TEST_CASE("wafer projection") {
    YieldResult r;
    r.qubit_count = 9;
    r.yield = 0.17;
    CHECK(wafer_projection(r).chips == 36);
    CHECK(wafer_projection(r).qubits == 324);
    r.yield = 0.86;
    CHECK(wafer_projection(r).chips == 182);
    r.yield = 0.0;
    CHECK(wafer_projection(r).chips == 0);
    CHECK(wafer_projection(r).qubits == 0);
    CHECK_THROWS_AS(wafer_projection(r, -1), Error);
}

TEST_CASE("config validation") {
    const auto lat = tile(additive_cell(), 1, 1);
    CHECK_THROWS_AS(mc_chip_yield(lat, config(-1.0, 10)), Error);
    CHECK_THROWS_AS(mc_chip_yield(lat, config(1.0, 0)), Error);
    auto c = config(1.0, 10);
    c.window = {130.0, 20.0};
    CHECK_THROWS_AS(mc_chip_yield(lat, c), Error);
}
