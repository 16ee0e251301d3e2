#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "doctest.h"
#include "freqtrim/error.hpp"
#include "freqtrim/freq_model.hpp"

using namespace freqtrim;

namespace {

template <class F>
ErrorCode code_of(F&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return static_cast<ErrorCode>(-1);
}

std::vector<FrequencyPoint> exact_points(double beta, double alpha, std::size_t n) {
    std::vector<FrequencyPoint> pts;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = 3000.0 + 6000.0 * static_cast<double>(i) / static_cast<double>(n - 1);
        pts.push_back({r, beta * std::pow(r, -alpha)});
    }
    return pts;
}

PowerLawModel model_through(double alpha, double r0, double f0) {
    PowerLawModel m;
    m.alpha = alpha;
    m.beta = f0 * std::pow(r0, alpha);
    m.r_min = 3000.0;
    m.r_max = 9000.0;
    return m;
}

// Three regimes joined continuously at 0.2 and 2 hr.
double three_regime(double t) {
    const double a1 = 0.30, a2 = 0.24, a3 = 0.16;
    const double c1 = 10.0;
    const double c2 = c1 * std::pow(0.2, a1 - a2);
    const double c3 = c2 * std::pow(2.0, a2 - a3);
    if (t <= 0.2) return c1 * std::pow(t, a1);
    if (t <= 2.0) return c2 * std::pow(t, a2);
    return c3 * std::pow(t, a3);
}

struct Series {
    std::vector<double> t, dr;
};

Series three_regime_series(double noise, unsigned seed) {
    Series s;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, noise);
    for (int i = 0; i < 90; ++i) {
        const double t = 0.01 * std::pow(10.0, 3.0 * i / 89.0);
        s.t.push_back(t);
        s.dr.push_back(three_regime(t) * (1.0 + (noise > 0 ? n(rng) : 0.0)));
    }
    return s;
}

// Residual of a least-squares fit by modified Gram-Schmidt.
double residual_ss(const std::vector<std::vector<double>>& cols, std::vector<double> y) {
    std::vector<std::vector<double>> q;
    for (auto v : cols) {
        for (const auto& u : q) {
            double d = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) d += u[i] * v[i];
            for (std::size_t i = 0; i < v.size(); ++i) v[i] -= d * u[i];
        }
        double norm = 0.0;
        for (double e : v) norm += e * e;
        norm = std::sqrt(norm);
        for (double& e : v) e /= norm;
        q.push_back(v);
    }
    for (const auto& u : q) {
        double d = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) d += u[i] * y[i];
        for (std::size_t i = 0; i < y.size(); ++i) y[i] -= d * u[i];
    }
    double ss = 0.0;
    for (double e : y) ss += e * e;
    return ss;
}

// Exhaustive knot pair for a continuous two-kink line in log-log space.
std::pair<double, double> best_knot_pair(const std::vector<double>& t,
                                         const std::vector<double>& dr, int grid) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < t.size(); ++i) {
        x.push_back(std::log(t[i]));
        y.push_back(std::log(dr[i]));
    }
    const double lo = x.front(), hi = x.back();
    auto count_le = [&](double k) {
        return static_cast<std::size_t>(std::count_if(x.begin(), x.end(), [&](double v) { return v <= k; }));
    };
    double best = 1e300;
    std::pair<double, double> arg{0, 0};
    for (int i = 0; i < grid; ++i)
        for (int j = i + 1; j < grid; ++j) {
            const double k1 = lo + (hi - lo) * (i + 1) / (grid + 1);
            const double k2 = lo + (hi - lo) * (j + 1) / (grid + 1);
            const std::size_t n1 = count_le(k1), n2 = count_le(k2);
            if (n1 < 3 || n2 - n1 < 3 || x.size() - n2 < 3) continue;
            std::vector<std::vector<double>> cols(4, std::vector<double>(x.size()));
            for (std::size_t r = 0; r < x.size(); ++r) {
                cols[0][r] = 1.0;
                cols[1][r] = x[r];
                cols[2][r] = std::max(0.0, x[r] - k1);
                cols[3][r] = std::max(0.0, x[r] - k2);
            }
            const double ss = residual_ss(cols, y);
            if (ss < best) {
                best = ss;
                arg = {std::exp(k1), std::exp(k2)};
            }
        }
    return arg;
}

}  // namespace

TEST_CASE("power law: exact data recovers alpha") {
    const auto pts = exact_points(300000.0, 0.5, 20);
    const auto m = fit_power_law(pts);
    CHECK(m.alpha == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(m.beta == doctest::Approx(300000.0).epsilon(1e-9));
    CHECK(m.residual_sigma <= 1e-6);
    CHECK(m.r_min == 3000.0);
    CHECK(m.r_max == 9000.0);
}

TEST_CASE("power law: noisy calibration") {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> ur(3600.0, 5600.0);
    std::normal_distribution<double> noise(0.0, 12.4);
    const double alpha = 0.51;
    const double beta = 4556.0 * std::pow(4587.8, alpha);
    std::vector<FrequencyPoint> pts;
    for (int i = 0; i < 60; ++i) {
        const double r = ur(rng);
        pts.push_back({r, beta * std::pow(r, -alpha) + noise(rng)});
    }
    const auto m = fit_power_law(pts);
    CHECK(std::abs(m.alpha - 0.51) <= 0.05);
    CHECK(m.residual_sigma >= 10.0);
    CHECK(m.residual_sigma <= 15.0);
}

TEST_CASE("power law: two points interpolate exactly") {
    const std::vector<FrequencyPoint> pts{{4000.0, 5000.0}, {6000.0, 4100.0}};
    const auto m = fit_power_law(pts);
    const double alpha = std::log(5000.0 / 4100.0) / std::log(6000.0 / 4000.0);
    CHECK(m.alpha == doctest::Approx(alpha).epsilon(1e-12));
    CHECK(predict_f(m, 4000.0) == doctest::Approx(5000.0).epsilon(1e-12));
    CHECK(predict_f(m, 6000.0) == doctest::Approx(4100.0).epsilon(1e-12));
}

TEST_CASE("power law: fit errors") {
    const std::vector<FrequencyPoint> one{{4000.0, 5000.0}};
    CHECK(code_of([&] { fit_power_law(one); }) == ErrorCode::fit);
    const std::vector<FrequencyPoint> neg{{4000.0, 5000.0}, {-1.0, 4000.0}, {5000.0, 4500.0}};
    CHECK(code_of([&] { fit_power_law(neg); }) == ErrorCode::fit);
    const std::vector<FrequencyPoint> rising{{4000.0, 4000.0}, {5000.0, 4500.0}, {6000.0, 5000.0}};
    CHECK(code_of([&] { fit_power_law(rising); }) == ErrorCode::fit);
}

TEST_CASE("predict and invert") {
    const auto m = model_through(0.5, 4496.0, 4556.0);
    CHECK(predict_f(m, 4496.0) == doctest::Approx(4556.0).epsilon(1e-12));
    CHECK(predict_f(m, 4496.0 * 1.02) == doctest::Approx(4556.0 / std::sqrt(1.02)).epsilon(1e-12));
    CHECK(std::abs(predict_f(m, 4496.0 * 1.02) - 4511.1) < 0.05);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ur(100.0, 1e5);
    for (int i = 0; i < 100; ++i) {
        const double r = ur(rng);
        CHECK(invert_R(m, predict_f(m, r)) == doctest::Approx(r).epsilon(1e-9));
        CHECK(predict_f(m, r) > predict_f(m, r * 1.001));
    }
    CHECK(code_of([&] { predict_f(m, 0.0); }) == ErrorCode::domain);
    CHECK(code_of([&] { invert_R(m, -5.0); }) == ErrorCode::domain);
}

TEST_CASE("target assignment") {
    const auto m = model_through(0.5, 4587.8, 4556.0);
    const auto zero = assign_target_R(m, 4556.0, 0.0);
    CHECK(zero.target_resistance == doctest::Approx(invert_R(m, 4556.0)).epsilon(1e-15));

    const auto t = assign_target_R(m, 4556.0);
    CHECK(t.design_resistance == doctest::Approx(4587.8).epsilon(1e-12));
    CHECK(std::abs(t.target_resistance - 4496.0) < 0.05);
    CHECK(t.within_domain);

    // Aging back up by the budget lands on the design frequency.
    const double aged = t.target_resistance / (1.0 - 0.02);
    CHECK(predict_f(m, aged) == doctest::Approx(4556.0).epsilon(1e-9));

    CHECK_FALSE(assign_target_R(m, 100.0).within_domain);
    CHECK(code_of([&] { assign_target_R(m, 0.0); }) == ErrorCode::domain);
    CHECK(code_of([&] { assign_target_R(m, 4556.0, 1.0); }) == ErrorCode::domain);
}

TEST_CASE("frequency-equivalent sigma") {
    const auto m = model_through(0.5, 4496.0, 4556.0);
    CHECK(std::abs(freq_equiv_sigma(m, 4556.0, 0.0034) - 7.745) < 1e-3);
    CHECK(freq_equiv_sigma(m, 4556.0, 0.0) == 0.0);

    // Central finite difference of the power law.
    for (double s : {0.001, 0.0034, 0.005, 0.01}) {
        const double r = 4496.0;
        const double h = r * 1e-6;
        const double dfdr = (predict_f(m, r + h) - predict_f(m, r - h)) / (2.0 * h);
        const double oracle = std::abs(dfdr) * r * s;
        const double got = freq_equiv_sigma(m, predict_f(m, r), s);
        CHECK(std::abs(got - oracle) <= 1e-3 * oracle);
    }
}

TEST_CASE("power law properties") {
    const auto m = model_through(0.47, 5000.0, 4700.0);
    std::vector<FrequencyPoint> own;
    for (double r = 3500.0; r <= 6500.0; r += 250.0) own.push_back({r, predict_f(m, r)});
    const auto refit = fit_power_law(own);
    CHECK(refit.alpha == doctest::Approx(m.alpha).epsilon(1e-9));
    CHECK(refit.beta == doctest::Approx(m.beta).epsilon(1e-9));

    const double c = 1.37;
    auto scaled = own;
    for (auto& p : scaled) p.resistance *= c;
    const auto sfit = fit_power_law(scaled);
    CHECK(sfit.alpha == doctest::Approx(refit.alpha).epsilon(1e-9));
    CHECK(sfit.beta == doctest::Approx(refit.beta * std::pow(c, refit.alpha)).epsilon(1e-9));
}

TEST_CASE("segmented fit: given breakpoints on exact data") {
    const auto s = three_regime_series(0.0, 0);
    const auto fit = fit_segmented_power_law(s.t, s.dr, std::vector<double>{0.2, 2.0});
    REQUIRE(fit.exponents.size() == 3);
    CHECK(fit.exponents[0] == doctest::Approx(0.30).epsilon(1e-6));
    CHECK(fit.exponents[1] == doctest::Approx(0.24).epsilon(1e-6));
    CHECK(fit.exponents[2] == doctest::Approx(0.16).epsilon(1e-6));
    CHECK(fit.continuity_residual < 1e-6);
    CHECK(fit.evaluate(1.0) == doctest::Approx(three_regime(1.0)).epsilon(1e-6));
    CHECK(fit.segment_of(0.1) == 0);
    CHECK(fit.segment_of(1.0) == 1);
    CHECK(fit.segment_of(10.0) == 2);
}

TEST_CASE("segmented fit: noisy data") {
    for (unsigned seed : {1u, 2u, 3u}) {
        const auto s = three_regime_series(0.02, seed);
        const auto fit = fit_segmented_power_law(s.t, s.dr, std::vector<double>{0.2, 2.0});
        CHECK(std::abs(fit.exponents[0] - 0.30) <= 0.02);
        CHECK(std::abs(fit.exponents[1] - 0.24) <= 0.02);
        CHECK(std::abs(fit.exponents[2] - 0.16) <= 0.02);
    }
}

TEST_CASE("segmented fit: auto breakpoints") {
    for (double noise : {0.0, 0.02}) {
        const auto s = three_regime_series(noise, 5);
        const auto fit = fit_segmented_power_law(s.t, s.dr, std::nullopt);
        REQUIRE(fit.breakpoints.size() == 2);
        CHECK(fit.breakpoints[0] >= 0.2 / 1.5);
        CHECK(fit.breakpoints[0] <= 0.2 * 1.5);
        CHECK(fit.breakpoints[1] >= 2.0 / 1.5);
        CHECK(fit.breakpoints[1] <= 2.0 * 1.5);

        const auto oracle = best_knot_pair(s.t, s.dr, 50);
        CHECK(fit.breakpoints[0] == doctest::Approx(oracle.first).epsilon(1e-12));
        CHECK(fit.breakpoints[1] == doctest::Approx(oracle.second).epsilon(1e-12));
    }
}

TEST_CASE("segmented fit: errors") {
    const std::vector<double> t{0.1, 0.2, 0.3, 1.0, 2.0};
    const std::vector<double> dr{1.0, 1.2, 1.3, 1.6, 1.8};
    CHECK(code_of([&] { fit_segmented_power_law(t, dr, std::vector<double>{0.25}); }) ==
          ErrorCode::fit);
    const std::vector<double> short_dr{1.0, 1.2};
    CHECK(code_of([&] { fit_segmented_power_law(t, short_dr, std::nullopt); }) == ErrorCode::fit);
    const std::vector<double> bad{1.0, -1.2, 1.3, 1.6, 1.8};
    CHECK(code_of([&] { fit_segmented_power_law(t, bad, std::vector<double>{}); }) ==
          ErrorCode::fit);
}

TEST_CASE("gaussian fit") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> n(0.0, 18.4);
    std::vector<double> xs(100000);
    for (auto& x : xs) x = n(rng);
    const auto g = fit_gaussian(xs);
    CHECK(std::abs(g.sigma - 18.4) <= 0.3);
    CHECK(g.sample_count == xs.size());

    const std::vector<double> flat(10, 3.5);
    CHECK(fit_gaussian(flat).sigma == 0.0);
    CHECK(fit_gaussian(flat).mu == 3.5);

    const std::vector<double> pm{-1.0, 1.0};
    CHECK(fit_gaussian(pm).mu == 0.0);
    CHECK(fit_gaussian(pm).sigma == 1.0);

    const std::vector<double> one{1.0};
    CHECK(code_of([&] { fit_gaussian(one); }) == ErrorCode::fit);
}

TEST_CASE("compose sigma") {
    const std::vector<double> a{3.0, 4.0};
    CHECK(compose_sigma(a) == doctest::Approx(5.0));
    const std::vector<double> budget{7.7, 12.4, 4.0, kDefaultPreCooldownSigmaMhz};
    CHECK(std::abs(compose_sigma(budget) - 18.4) <= 0.05);
    const std::vector<double> single{2.5};
    CHECK(compose_sigma(single) == doctest::Approx(2.5));
    const std::vector<double> neg{1.0, -1.0};
    CHECK(code_of([&] { compose_sigma(neg); }) == ErrorCode::domain);
}

TEST_CASE("loss tangent and tunability") {
    CHECK(loss_tangent(35.2, 4.6) == doctest::Approx(9.83e-7).epsilon(1e-3));
    CHECK(loss_tangent(70.4, 4.6) == doctest::Approx(loss_tangent(35.2, 4.6) / 2.0));
    CHECK(loss_tangent(1.0 / (2.0 * std::numbers::pi * 1000.0), 1.0) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(code_of([] { loss_tangent(0.0, 4.6); }) == ErrorCode::domain);

    CHECK(tunability(5000.0, 4000.0) == 1000.0);
    CHECK(tunability(4000.0, 4000.0) == 0.0);
    CHECK(code_of([] { tunability(4000.0, 5000.0); }) == ErrorCode::domain);
}
