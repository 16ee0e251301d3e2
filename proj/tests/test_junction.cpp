#include <cmath>
#include <vector>

#include "doctest.h"
#include "freqtrim/error.hpp"
#include "freqtrim/junction.hpp"
#include "freqtrim/stats.hpp"

using namespace freqtrim;

namespace {

// Piecewise power law built directly from the defaults, for comparison.
double shape_oracle(double t) {
    const double b[] = {0.2, 2.0, 24.0};
    const double a[] = {0.30, 0.24, 0.16, 0.11};
    auto branch = [&](double x) {
        double amp = 1.0;
        int k = 0;
        while (k < 3 && x > b[k]) {
            amp *= std::pow(b[k], a[k] - a[k + 1]);
            ++k;
        }
        return amp * std::pow(x, a[k]);
    };
    return branch(t) / branch(5.0);
}

JunctionState pulsed_once(double r, double rho) {
    JunctionState s;
    s.resistance = r;
    s.relax_fraction = rho;
    StepModel step;
    step.kind = StepDistribution::constant;
    step.mean_step = 1.0;
    return apply_pulse(s, step, 1);
}

}  // namespace

TEST_CASE("fabricated batch matches the requested spread") {
    FabricationModel fab;
    fab.design_resistance = 4587.8;
    fab.mean_offset_frac = -0.107;
    std::vector<double> r;
    for (std::uint64_t i = 0; i < 221; ++i) r.push_back(sample_fabricated(fab, derive_seed(99, i)).resistance);
    const Summary s = summarize(r);
    CHECK(std::abs(s.mean - 4096.9) / 4096.9 < 0.01);
    CHECK(s.sigma / s.mean >= 0.030);
    CHECK(s.sigma / s.mean <= 0.040);
    CHECK(s.min > 0.0);
}

TEST_CASE("zero spread draws the mean exactly") {
    FabricationModel fab;
    fab.design_resistance = 4587.8;
    fab.sigma_frac = 0.0;
    fab.relax_sigma = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const JunctionState s = sample_fabricated(fab, seed);
        CHECK(s.resistance == 4587.8 * (1.0 - 0.1047));
        CHECK(s.relax_fraction == 0.0289);
        CHECK(s.pulse_count == 0);
    }
}

TEST_CASE("fabrication is deterministic under a seed") {
    FabricationModel fab;
    fab.design_resistance = 5000.0;
    const JunctionState a = sample_fabricated(fab, 42);
    const JunctionState b = sample_fabricated(fab, 42);
    CHECK(a.resistance == b.resistance);
    CHECK(a.relax_fraction == b.relax_fraction);
    CHECK(sample_fabricated(fab, 43).resistance != a.resistance);
}

TEST_CASE("invalid fabrication models are rejected") {
    FabricationModel fab;
    fab.design_resistance = 0.0;
    CHECK_THROWS_AS(sample_fabricated(fab, 1), Error);
    fab.design_resistance = 100.0;
    fab.sigma_frac = -0.1;
    CHECK_THROWS_AS(sample_fabricated(fab, 1), Error);
    try {
        fab.sigma_frac = -0.1;
        sample_fabricated(fab, 1);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::invalid_model);
    }
}

TEST_CASE("relaxation fractions are non-negative") {
    FabricationModel fab;
    fab.design_resistance = 4000.0;
    fab.relax_mean = 0.001;
    fab.relax_sigma = 0.01;
    for (std::uint64_t seed = 0; seed < 2000; ++seed)
        CHECK(sample_fabricated(fab, seed).relax_fraction >= 0.0);
}

TEST_CASE("constant pulse") {
    JunctionState s;
    s.resistance = 4490.0;
    StepModel step;
    step.kind = StepDistribution::constant;
    step.mean_step = 2.0;
    s.hours_since_last_pulse = 3.0;
    const JunctionState after = apply_pulse(s, step, 7);
    CHECK(after.resistance == 4492.0);
    CHECK(after.resistance_at_last_pulse == 4492.0);
    CHECK(after.pulse_count == 1);
    CHECK(after.hours_since_last_pulse == 0.0);
}

TEST_CASE("exponential steps have mean and sigma equal to the mean step") {
    StepModel step;
    Engine engine(3);
    std::vector<double> samples;
    for (int i = 0; i < 100000; ++i) samples.push_back(step.sample(engine));
    const Summary s = summarize(samples);
    CHECK(s.mean == doctest::Approx(1.9).epsilon(0.05 / 1.9));
    CHECK(s.sigma == doctest::Approx(1.9).epsilon(0.05 / 1.9));
    CHECK(s.min > 0.0);
}

TEST_CASE("uniform and bounded steps stay in range") {
    StepModel step;
    step.kind = StepDistribution::uniform;
    Engine engine(4);
    for (int i = 0; i < 10000; ++i) {
        const double v = step.sample(engine);
        CHECK(v > 0.0);
        CHECK(v <= 3.8);
    }
    StepModel bounded;
    bounded.min_step = 1.0;
    bounded.max_step = 2.5;
    for (int i = 0; i < 10000; ++i) {
        const double v = bounded.sample(engine);
        CHECK(v >= 1.0);
        CHECK(v <= 2.5);
    }
    StepModel bad;
    bad.mean_step = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("profile matches the piecewise oracle") {
    const RelaxationProfile p;
    for (double t = 0.001; t < 500.0; t *= 1.07)
        CHECK(p.shape(t) == doctest::Approx(shape_oracle(t)).epsilon(1e-12));
    CHECK(p.shape(0.0) == 0.0);
    CHECK(p.shape(5.0) == 1.0);
}

TEST_CASE("profile is continuous at the breakpoints") {
    const RelaxationProfile p;
    for (std::size_t k = 0; k < p.breakpoints().size(); ++k) {
        const double b = p.breakpoints()[k];
        const double left = p.regime_value(k, b);
        const double right = p.regime_value(k + 1, b);
        CHECK(std::abs(left - right) / left < 1e-9);
    }
}

TEST_CASE("log-log slope per regime equals the configured exponent") {
    const RelaxationProfile p;
    const std::vector<std::pair<double, double>> spans{{0.01, 0.19}, {0.21, 1.9}, {2.1, 23.0}, {25.0, 400.0}};
    for (std::size_t k = 0; k < spans.size(); ++k) {
        std::vector<double> x, y;
        for (double t = spans[k].first; t <= spans[k].second; t *= 1.1) {
            x.push_back(std::log(t));
            y.push_back(std::log(p.shape(t)));
        }
        CHECK(fit_line(x, y).slope == doctest::Approx(p.exponents()[k]).epsilon(1e-6));
    }
}

TEST_CASE("relaxation rate keeps slowing down") {
    const RelaxationProfile p;
    double previous = INFINITY;
    for (double t = 0.01; t < 300.0; t *= 1.05) {
        const double h = t * 1e-4;
        const double rate = (p.shape(t + h) - p.shape(t)) / h;
        CHECK(rate < previous);
        previous = rate;
    }
}

TEST_CASE("invalid profiles are rejected") {
    CHECK_THROWS_AS(RelaxationProfile({2.0, 0.2}, {0.3, 0.2, 0.1}, 5.0), Error);
    CHECK_THROWS_AS(RelaxationProfile({0.2}, {0.3, 1.2}, 5.0), Error);
    CHECK_THROWS_AS(RelaxationProfile({0.2}, {0.3}, 5.0), Error);
    CHECK_THROWS_AS(RelaxationProfile({0.2}, {0.3, 0.2}, 0.0), Error);
}

TEST_CASE("relaxation delta") {
    const RelaxationProfile p;
    CHECK(relaxation_delta(p, 0.0289, 4497.9, 0.0) == 0.0);
    CHECK(relaxation_delta(p, 0.0289, 4497.9, 5.0) == doctest::Approx(130.0).epsilon(0.05 / 130.0));
    CHECK(relaxation_delta(p, 0.03, 4000.0, 5.0) == doctest::Approx(120.0).epsilon(1e-12));
    CHECK_THROWS_AS(relaxation_delta(p, 0.03, 4000.0, -1.0), Error);
    CHECK_THROWS_AS(relaxation_delta(p, -0.03, 4000.0, 1.0), Error);
    CHECK_THROWS_AS(relaxation_delta(p, 0.03, 0.0, 1.0), Error);
}

TEST_CASE("advancing time composes") {
    const RelaxationProfile p;
    const JunctionState s = pulsed_once(4400.0, 0.03);
    const JunctionState once = advance_time(s, p, 5.0);
    const JunctionState twice = advance_time(advance_time(s, p, 2.5), p, 2.5);
    CHECK(twice.resistance == doctest::Approx(once.resistance).epsilon(1e-9));
    CHECK(once.hours_since_last_pulse == 5.0);
    CHECK(once.resistance == doctest::Approx(s.resistance_at_last_pulse * 1.03).epsilon(1e-12));

    const JunctionState same = advance_time(s, p, 0.0);
    CHECK(same.resistance == s.resistance);
    CHECK(same.hours_since_last_pulse == s.hours_since_last_pulse);
}

TEST_CASE("never-pulsed junctions hold still") {
    JunctionState s;
    s.resistance = 4000.0;
    s.relax_fraction = 0.03;
    CHECK(advance_time(s, RelaxationProfile{}, 100.0).resistance == 4000.0);
}

TEST_CASE("trajectories are monotone under any pulse and wait sequence") {
    const RelaxationProfile p;
    StepModel step;
    Engine rng(11);
    std::uniform_real_distribution<double> wait(0.0, 30.0);
    for (int trial = 0; trial < 200; ++trial) {
        JunctionState s;
        s.resistance = 3000.0 + 1000.0 * std::generate_canonical<double, 53>(rng);
        s.relax_fraction = 0.05 * std::generate_canonical<double, 53>(rng);
        double last = s.resistance;
        for (int k = 0; k < 30; ++k) {
            s = (rng() % 2) ? apply_pulse(s, step, rng) : advance_time(s, p, wait(rng));
            CHECK(s.resistance >= last);
            CHECK(s.resistance >= s.resistance_at_last_pulse);
            last = s.resistance;
        }
    }
}

TEST_CASE("measurement noise") {
    JunctionState s;
    s.resistance = 4500.0;
    MeasurementModel exact;
    CHECK(measure_resistance(s, exact, 1) == 4500.0);

    MeasurementModel noisy{0.5};
    CHECK(measure_resistance(s, noisy, 9) == measure_resistance(s, noisy, 9));
    Engine engine(12);
    std::vector<double> reads;
    for (int i = 0; i < 100000; ++i) reads.push_back(measure_resistance(s, noisy, engine));
    CHECK(population_sigma(reads) == doctest::Approx(0.5).epsilon(0.02 / 0.5));
    CHECK(s.resistance == 4500.0);
    CHECK_THROWS_AS((MeasurementModel{-1.0}).validate(), Error);
}

TEST_CASE("day-scale aging follows the slow power law") {
    FabricationModel fab;
    fab.design_resistance = 4587.8;
    const RelaxationProfile p;
    const std::vector<double> days{4.0, 8.0, 11.0};
    std::vector<double> shift(days.size(), 0.0);
    for (std::uint64_t q = 0; q < 28; ++q) {
        const JunctionState fabricated = sample_fabricated(fab, derive_seed(5, q));
        const JunctionState probed =
            advance_time(pulsed_once(fabricated.resistance, fabricated.relax_fraction), p, 5.0);
        for (std::size_t d = 0; d < days.size(); ++d) {
            const JunctionState aged = advance_time(probed, p, 24.0 * days[d]);
            shift[d] += (aged.resistance - aged.resistance_at_last_pulse) / 28.0;
        }
    }
    std::vector<double> x, y;
    for (std::size_t d = 0; d < days.size(); ++d) {
        x.push_back(std::log(days[d]));
        y.push_back(std::log(shift[d]));
    }
    CHECK(std::abs(fit_line(x, y).slope - 0.11) <= 0.03);
}
