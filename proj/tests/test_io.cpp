#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "freqtrim/error.hpp"
#include "freqtrim/io.hpp"
#include "freqtrim/tuning.hpp"

using namespace freqtrim;
namespace fs = std::filesystem;

namespace {

std::string parse_error(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::parse);
        return e.what();
    }
    FAIL("expected a parse error");
    return {};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "freqtrim_test_io";
    fs::create_directories(dir);
    return dir / name;
}

CampaignResult small_campaign(std::uint64_t seed) {
    FabricationModel fab;
    fab.design_resistance = 4587.8;
    std::vector<Qubit> qubits;
    std::vector<TuningTarget> targets;
    for (int i = 0; i < 40; ++i) {
        const std::string id = "Q" + std::to_string(i);
        qubits.push_back({id, sample_fabricated(fab, qubit_seed(seed, id))});
        targets.push_back({id, 4496.0, 0.0289});
    }
    CampaignConfig cfg;
    cfg.seed = seed;
    return run_campaign(qubits, targets, cfg);
}

}  // namespace

TEST_CASE("fixed formatting") {
    CHECK(io::format_fixed(1.5, 3) == "1.500");
    CHECK(io::format_fixed(-0.0004, 3) == "0.000");
    CHECK(io::format_fixed(4496.0, 0) == "4496");
    CHECK(io::format_fixed(1234567.891, 2) == "1234567.89");
}

TEST_CASE("resistance log round trip is byte-identical") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> t(0.0, 300.0), r(3000.0, 9000.0);
    std::vector<io::ResistanceLogRow> rows;
    const io::LogPhase phases[] = {io::LogPhase::untuned, io::LogPhase::pulse, io::LogPhase::probe};
    for (int i = 0; i < 1000; ++i)
        rows.push_back({"q" + std::to_string(i % 37), t(rng), r(rng), phases[i % 3]});

    std::ostringstream first;
    io::write_resistance_log(first, rows);
    std::istringstream in(first.str());
    const auto parsed = io::parse_resistance_log(in);
    REQUIRE(parsed.size() == 1000);
    std::ostringstream second;
    io::write_resistance_log(second, parsed);
    CHECK(first.str() == second.str());
    CHECK(first.str().rfind(std::string(io::kResistanceLogHeader) + "\n", 0) == 0);

    // The canonical form is a fixed point.
    std::istringstream again(second.str());
    CHECK(io::parse_resistance_log(again) == parsed);
}

TEST_CASE("resistance log diagnostics name line and field") {
    const std::string text =
        "qubit_id,t_hr,resistance_ohm,phase\n"
        "q1,0.5,4500,probe\n"
        "q1,-1,4500,probe\n"
        "q2,1.0,abc,pulse\n"
        "q3,1.0,4500,sideways\n"
        "q4,1.0\n";
    std::istringstream in(text);
    const auto msg = parse_error([&] { io::parse_resistance_log(in, "log.csv"); });
    CHECK(msg.find("4 schema violation") != std::string::npos);
    CHECK(msg.find("log.csv:3: t_hr") != std::string::npos);
    CHECK(msg.find("log.csv:4: resistance_ohm") != std::string::npos);
    CHECK(msg.find("log.csv:5: phase") != std::string::npos);
    CHECK(msg.find("log.csv:6:") != std::string::npos);

    std::istringstream bad_header("id,t,r,p\n");
    CHECK(parse_error([&] { io::parse_resistance_log(bad_header, "h.csv"); }).find("h.csv:1") !=
          std::string::npos);
}

TEST_CASE("campaign save and load keep precision statistics") {
    const auto c = small_campaign(9);
    const auto path = scratch("campaign.csv");
    io::save_campaign(path, c.records);
    const auto loaded = io::load_campaign(path);
    REQUIRE(loaded.size() == c.records.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].qubit_id == c.records[i].qubit_id);
        CHECK(loaded[i].pulses == c.records[i].pulses);
        CHECK(loaded[i].already_above == c.records[i].already_above);
        CHECK(std::abs(loaded[i].r_tuned - c.records[i].r_tuned) < 1e-8);
    }
    const auto a = precision_stats(c.records);
    const auto b = precision_stats(loaded);
    CHECK(b.mean_frac == doctest::Approx(a.mean_frac).epsilon(1e-9));
    CHECK(b.sigma_frac == doctest::Approx(a.sigma_frac).epsilon(1e-9));

    std::ostringstream once, twice;
    io::save_campaign(once, loaded);
    std::istringstream in(once.str());
    io::save_campaign(twice, io::load_campaign(in));
    CHECK(once.str() == twice.str());
}

TEST_CASE("campaign schema violations") {
    std::istringstream in(std::string(io::kCampaignHeader) +
                          "\nq1,4000,4496,4370,4369,4371,4500,x,0\n");
    const auto msg = parse_error([&] { io::load_campaign(in, "c.csv"); });
    CHECK(msg.find("c.csv:2: pulses") != std::string::npos);
}

TEST_CASE("design JSON") {
    const auto d = io::load_design(fs::path(FREQTRIM_DATA_DIR) / "design_3x3.json");
    CHECK(d.lattice.rows() == 3);
    CHECK(d.base_frequency == 4628.0);
    CHECK(d.lattice.node(4).design_f == 4778.0);
    CHECK(d.lattice.has_measurements());

    const auto again = io::design_from_json(io::design_to_json(d));
    CHECK(again.lattice.design_frequencies() == d.lattice.design_frequencies());
    CHECK(again.lattice.measured_frequencies() == d.lattice.measured_frequencies());

    const std::string missing = R"({"rows":2,"cols":2,"base_frequency_mhz":4600,
        "offsets_mhz":[[0,50],[50,null]],"design_window_mhz":[40,110]})";
    const auto msg = parse_error([&] { io::design_from_json(missing, "d.json"); });
    CHECK(msg.find("q3 (1,1)") != std::string::npos);

    const std::string partial = R"({"rows":1,"cols":2,"base_frequency_mhz":4600,
        "offsets_mhz":[[0,50]],"measured_offsets_mhz":[[3,null]],"design_window_mhz":[40,110]})";
    const auto p = io::design_from_json(partial);
    CHECK(p.lattice.node(0).measured_f == 4603.0);
    CHECK_FALSE(p.lattice.node(1).measured_f.has_value());

    CHECK(parse_error([] { io::design_from_json("{not json"); }).size() > 0);
    CHECK(parse_error([] { io::design_from_json(R"({"rows":1})"); }).find("cols") !=
          std::string::npos);
}

TEST_CASE("calibration JSON round trip") {
    PowerLawModel m;
    m.alpha = 0.51;
    m.beta = 1.25e6;
    m.residual_sigma = 12.4;
    m.r_min = 3600;
    m.r_max = 5600;
    const auto back = io::calibration_from_json(io::calibration_to_json(m));
    CHECK(back.alpha == m.alpha);
    CHECK(back.beta == m.beta);
    CHECK(back.residual_sigma == m.residual_sigma);
    CHECK(back.r_max == m.r_max);
    CHECK(parse_error([] { io::calibration_from_json(R"({"beta":1})"); }).find("alpha") !=
          std::string::npos);
}

TEST_CASE("bundled calibration points load") {
    const auto pts = io::load_frequency_points(fs::path(FREQTRIM_DATA_DIR) / "calibration_points.csv");
    CHECK(pts.size() == 60);
    const auto m = fit_power_law(pts);
    CHECK(std::abs(m.alpha - 0.51) <= 0.05);
}

TEST_CASE("bundled relaxation log yields a pooled series") {
    const auto rows = io::parse_resistance_log(fs::path(FREQTRIM_DATA_DIR) / "relaxation_log.csv");
    const auto s = io::relaxation_series(rows);
    CHECK(s.t_hr.size() > 100);
    for (std::size_t i = 0; i < s.t_hr.size(); ++i) {
        CHECK(s.t_hr[i] > 0.0);
        CHECK(s.delta_ohm[i] > 0.0);
    }
    const auto fit = fit_segmented_power_law(s.t_hr, s.delta_ohm, std::nullopt);
    CHECK(std::abs(fit.exponents[0] - 0.30) <= 0.02);
    CHECK(std::abs(fit.exponents[1] - 0.24) <= 0.02);
    CHECK(std::abs(fit.exponents[2] - 0.16) <= 0.02);
}

TEST_CASE("yield table format") {
    YieldPoint p;
    p.sigma_f = 7.7;
    p.result.qubit_count = 9;
    p.result.yield = 0.86;
    p.result.ci_lo = 0.857;
    p.result.ci_hi = 0.8621;
    std::ostringstream out;
    const std::vector<YieldPoint> pts{p};
    io::write_yield_table(out, pts);
    CHECK(out.str() == "qubits,sigma_mhz,yield,ci_lo,ci_hi\n9,7.700,0.860000,0.857000,0.862100\n");
}

TEST_CASE("manifest is deterministic and digests inputs") {
    const auto f = scratch("input.txt");
    io::write_file(f, "foobar");
    CHECK(io::file_digest(f) == "fnv1a64:85944171f73967e8");

    io::RunManifest m;
    m.command = "yield";
    m.config_json = R"({"trials":10})";
    m.seed = 7;
    m.has_seed = true;
    m.inputs = {{f.string(), io::file_digest(f)}};
    m.tool_version = "0.3.1";
    const auto a = io::manifest_to_json(m);
    CHECK(a == io::manifest_to_json(m));
    CHECK(a.find("fnv1a64:85944171f73967e8") != std::string::npos);
    CHECK(a.find("\"seed\"") != std::string::npos);
    CHECK_THROWS_AS(io::read_file(scratch("does_not_exist")), Error);
}
