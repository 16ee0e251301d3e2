#include "freqtrim/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <algorithm>

#include "freqtrim/error.hpp"
#include "freqtrim/random.hpp"
#include "json.hpp"

namespace freqtrim::io {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxReportedProblems = 25;

// Collects every schema violation of a file before throwing once.
class Problems {
public:
    explicit Problems(std::string_view source) : source_(source) {}

    void add(std::size_t line, std::string_view field, const std::string& reason) {
        ++count_;
        if (count_ > kMaxReportedProblems) return;
        text_ += "\n  " + source_ + ":" + std::to_string(line) + ": " + std::string(field) + ": " +
                 reason;
    }

    void throw_if_any() const {
        if (count_ == 0) return;
        std::string msg = source_ + ": " + std::to_string(count_) + " schema violation(s)" + text_;
        if (count_ > kMaxReportedProblems)
            msg += "\n  ... " + std::to_string(count_ - kMaxReportedProblems) + " more";
        throw Error(ErrorCode::parse, msg);
    }

private:
    std::string source_;
    std::string text_;
    std::size_t count_ = 0;
};

std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string_view chomp(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

std::optional<double> parse_double(std::string_view text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<long long> parse_int(std::string_view text) {
    long long v = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return v;
}

// Reads a CSV body with the given header; calls `row` for each data line.
template <class RowFn>
void read_csv(std::istream& in, std::string_view source, std::string_view header, RowFn&& row) {
    Problems problems(source);
    std::string line;
    if (!std::getline(in, line)) {
        problems.add(1, "header", "file is empty, expected '" + std::string(header) + "'");
        problems.throw_if_any();
    }
    if (chomp(line) != header) {
        problems.add(1, "header", "expected '" + std::string(header) + "', got '" +
                                      std::string(chomp(line)) + "'");
        problems.throw_if_any();
    }
    const std::size_t columns = split(header).size();
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto text = chomp(line);
        if (text.empty()) {
            problems.add(lineno, "row", "blank line");
            continue;
        }
        const auto fields = split(text);
        if (fields.size() != columns) {
            problems.add(lineno, "row", "expected " + std::to_string(columns) + " fields, got " +
                                            std::to_string(fields.size()));
            continue;
        }
        row(lineno, fields, problems);
    }
    problems.throw_if_any();
}

bool valid_id(std::string_view id) {
    return !id.empty() && id.find_first_of(",\"\r\n") == std::string_view::npos;
}

void check_id_for_write(std::string_view id) {
    if (!valid_id(id))
        throw Error(ErrorCode::io, "qubit id '" + std::string(id) + "' cannot be written to CSV");
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for reading");
    return in;
}

}  // namespace

std::string format_fixed(double value, int decimals) {
    char buf[64];
    const auto [ptr, ec] =
        std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, decimals);
    if (ec != std::errc()) throw Error(ErrorCode::io, "format_fixed: value out of range");
    std::string out(buf, ptr);
    if (out.front() == '-' && out.find_first_not_of("-0.") == std::string::npos) out.erase(0, 1);
    return out;
}

const char* to_string(LogPhase phase) noexcept {
    switch (phase) {
        case LogPhase::untuned: return "untuned";
        case LogPhase::pulse: return "pulse";
        case LogPhase::probe: return "probe";
    }
    return "probe";
}

std::vector<ResistanceLogRow> parse_resistance_log(std::istream& in, std::string_view source) {
    std::vector<ResistanceLogRow> rows;
    read_csv(in, source, kResistanceLogHeader, [&](std::size_t line, const auto& f, Problems& p) {
        ResistanceLogRow row;
        bool ok = true;
        if (!valid_id(f[0])) {
            p.add(line, "qubit_id", "must be non-empty");
            ok = false;
        }
        row.qubit_id = std::string(f[0]);
        const auto t = parse_double(f[1]);
        if (!t || *t < 0.0) {
            p.add(line, "t_hr", "'" + std::string(f[1]) + "' is not a number >= 0");
            ok = false;
        } else {
            row.t_hr = *t;
        }
        const auto r = parse_double(f[2]);
        if (!r || *r <= 0.0) {
            p.add(line, "resistance_ohm", "'" + std::string(f[2]) + "' is not a positive number");
            ok = false;
        } else {
            row.resistance_ohm = *r;
        }
        if (f[3] == "untuned") {
            row.phase = LogPhase::untuned;
        } else if (f[3] == "pulse") {
            row.phase = LogPhase::pulse;
        } else if (f[3] == "probe") {
            row.phase = LogPhase::probe;
        } else {
            p.add(line, "phase", "'" + std::string(f[3]) + "' is not one of untuned|pulse|probe");
            ok = false;
        }
        if (ok) rows.push_back(std::move(row));
    });
    return rows;
}

std::vector<ResistanceLogRow> parse_resistance_log(const std::filesystem::path& path) {
    auto in = open_in(path);
    return parse_resistance_log(in, path.string());
}

void write_resistance_log(std::ostream& out, std::span<const ResistanceLogRow> rows) {
    out << kResistanceLogHeader << '\n';
    for (const auto& r : rows) {
        check_id_for_write(r.qubit_id);
        out << r.qubit_id << ',' << format_fixed(r.t_hr, 6) << ','
            << format_fixed(r.resistance_ohm, 6) << ',' << to_string(r.phase) << '\n';
    }
}

std::vector<ResistanceLogRow> campaign_log(const CampaignResult& campaign,
                                           const RelaxationProfile& profile,
                                           double probe_delay_hr,
                                           std::span<const double> monitor_hours) {
    if (campaign.stopped_states.size() != campaign.records.size())
        throw Error(ErrorCode::config, "campaign_log: campaign carries no junction trajectories");
    std::vector<double> hours(monitor_hours.begin(), monitor_hours.end());
    std::sort(hours.begin(), hours.end());
    std::vector<ResistanceLogRow> rows;
    for (std::size_t i = 0; i < campaign.records.size(); ++i) {
        const auto& rec = campaign.records[i];
        rows.push_back({rec.qubit_id, 0.0, rec.r_untuned, LogPhase::untuned});
        if (!rec.already_above) {
            rows.push_back({rec.qubit_id, 0.0, rec.r_last_pulse, LogPhase::pulse});
            bool probed = false;
            for (double h : hours) {
                if (!(h > 0.0)) continue;
                if (!probed && h >= probe_delay_hr) {
                    rows.push_back({rec.qubit_id, probe_delay_hr, rec.r_tuned, LogPhase::probe});
                    probed = true;
                    if (h == probe_delay_hr) continue;
                }
                const auto s = advance_time(campaign.stopped_states[i], profile, h);
                rows.push_back({rec.qubit_id, h, s.resistance, LogPhase::probe});
            }
            if (!probed) rows.push_back({rec.qubit_id, probe_delay_hr, rec.r_tuned, LogPhase::probe});
        } else {
            rows.push_back({rec.qubit_id, probe_delay_hr, rec.r_tuned, LogPhase::probe});
        }
    }
    return rows;
}

RelaxationSeries relaxation_series(std::span<const ResistanceLogRow> rows) {
    struct LastPulse {
        double t, r;
    };
    std::unordered_map<std::string, LastPulse> last;
    RelaxationSeries out;
    for (const auto& row : rows) {
        if (row.phase == LogPhase::pulse) {
            last[row.qubit_id] = {row.t_hr, row.resistance_ohm};
        } else if (row.phase == LogPhase::probe) {
            const auto it = last.find(row.qubit_id);
            if (it == last.end()) continue;
            const double dt = row.t_hr - it->second.t;
            const double dr = row.resistance_ohm - it->second.r;
            if (dt > 0.0 && dr > 0.0) {
                out.t_hr.push_back(dt);
                out.delta_ohm.push_back(dr);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

void save_campaign(std::ostream& out, std::span<const QubitTuneRecord> records) {
    out << kCampaignHeader << '\n';
    for (const auto& r : records) {
        check_id_for_write(r.qubit_id);
        out << r.qubit_id << ',' << format_fixed(r.r_untuned, 9) << ','
            << format_fixed(r.r_target, 9) << ',' << format_fixed(r.threshold, 9) << ','
            << format_fixed(r.r_before_last_pulse, 9) << ',' << format_fixed(r.r_last_pulse, 9)
            << ',' << format_fixed(r.r_tuned, 9) << ',' << r.pulses << ','
            << (r.already_above ? 1 : 0) << '\n';
    }
}

void save_campaign(const std::filesystem::path& path, std::span<const QubitTuneRecord> records) {
    std::ostringstream out;
    save_campaign(out, records);
    write_file(path, out.str());
}

namespace {
constexpr const char* kCampaignFields[] = {"r_untuned_ohm",    "r_target_ohm",
                                           "threshold_ohm",    "r_before_last_pulse_ohm",
                                           "r_last_pulse_ohm", "r_tuned_ohm"};
}  // namespace

std::vector<QubitTuneRecord> load_campaign(std::istream& in, std::string_view source) {
    std::vector<QubitTuneRecord> records;
    read_csv(in, source, kCampaignHeader, [&](std::size_t line, const auto& f, Problems& p) {
        QubitTuneRecord r;
        bool ok = true;
        if (!valid_id(f[0])) {
            p.add(line, "qubit_id", "must be non-empty");
            ok = false;
        }
        r.qubit_id = std::string(f[0]);
        double* targets[] = {&r.r_untuned,           &r.r_target,     &r.threshold,
                             &r.r_before_last_pulse, &r.r_last_pulse, &r.r_tuned};
        for (std::size_t k = 0; k < 6; ++k) {
            const auto v = parse_double(f[k + 1]);
            if (!v || *v <= 0.0) {
                p.add(line, kCampaignFields[k], "'" + std::string(f[k + 1]) + "' is not a positive number");
                ok = false;
            } else {
                *targets[k] = *v;
            }
        }
        const auto pulses = parse_int(f[7]);
        if (!pulses || *pulses < 0) {
            p.add(line, "pulses", "'" + std::string(f[7]) + "' is not a non-negative integer");
            ok = false;
        } else {
            r.pulses = *pulses;
        }
        if (f[8] == "0" || f[8] == "1") {
            r.already_above = f[8] == "1";
        } else {
            p.add(line, "already_above", "'" + std::string(f[8]) + "' is not 0 or 1");
            ok = false;
        }
        if (ok) records.push_back(std::move(r));
    });
    return records;
}

std::vector<QubitTuneRecord> load_campaign(const std::filesystem::path& path) {
    auto in = open_in(path);
    return load_campaign(in, path.string());
}

std::vector<DesignResistance> parse_design_resistances(std::istream& in, std::string_view source) {
    std::vector<DesignResistance> rows;
    read_csv(in, source, "qubit_id,design_resistance_ohm",
             [&](std::size_t line, const auto& f, Problems& p) {
                 if (!valid_id(f[0])) {
                     p.add(line, "qubit_id", "must be non-empty");
                     return;
                 }
                 const auto v = parse_double(f[1]);
                 if (!v || *v <= 0.0) {
                     p.add(line, "design_resistance_ohm",
                           "'" + std::string(f[1]) + "' is not a positive number");
                     return;
                 }
                 rows.push_back({std::string(f[0]), *v});
             });
    return rows;
}

std::vector<DesignResistance> load_design_resistances(const std::filesystem::path& path) {
    auto in = open_in(path);
    return parse_design_resistances(in, path.string());
}

void save_design_resistances(std::ostream& out, std::span<const DesignResistance> rows) {
    out << "qubit_id,design_resistance_ohm\n";
    for (const auto& r : rows) {
        check_id_for_write(r.qubit_id);
        out << r.qubit_id << ',' << format_fixed(r.design_resistance, 6) << '\n';
    }
}

std::vector<FrequencyPoint> parse_frequency_points(std::istream& in, std::string_view source) {
    std::vector<FrequencyPoint> points;
    read_csv(in, source, "resistance_ohm,f01max_mhz",
             [&](std::size_t line, const auto& f, Problems& p) {
                 const auto r = parse_double(f[0]);
                 const auto q = parse_double(f[1]);
                 if (!r || *r <= 0.0)
                     p.add(line, "resistance_ohm", "'" + std::string(f[0]) + "' is not a positive number");
                 if (!q || *q <= 0.0)
                     p.add(line, "f01max_mhz", "'" + std::string(f[1]) + "' is not a positive number");
                 if (r && q && *r > 0.0 && *q > 0.0) points.push_back({*r, *q});
             });
    return points;
}

std::vector<FrequencyPoint> load_frequency_points(const std::filesystem::path& path) {
    auto in = open_in(path);
    return parse_frequency_points(in, path.string());
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json parse_json(std::string_view text, std::string_view source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::parse, std::string(source) + ": invalid JSON: " + e.what());
    }
}

double require_number(const json& obj, const char* key, std::string_view source) {
    if (!obj.contains(key))
        throw Error(ErrorCode::parse, std::string(source) + ": missing field '" + key + "'");
    const auto& v = obj.at(key);
    if (!v.is_number())
        throw Error(ErrorCode::parse, std::string(source) + ": field '" + key + "' must be a number");
    return v.get<double>();
}

std::size_t require_count(const json& obj, const char* key, std::string_view source) {
    if (!obj.contains(key))
        throw Error(ErrorCode::parse, std::string(source) + ": missing field '" + key + "'");
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 1)
        throw Error(ErrorCode::parse,
                    std::string(source) + ": field '" + key + "' must be a positive integer");
    return v.get<std::size_t>();
}

}  // namespace

std::string calibration_to_json(const PowerLawModel& model) {
    json j;
    j["beta"] = model.beta;
    j["alpha"] = model.alpha;
    j["residual_sigma_mhz"] = model.residual_sigma;
    j["r_min"] = model.r_min;
    j["r_max"] = model.r_max;
    return j.dump(2) + "\n";
}

PowerLawModel calibration_from_json(std::string_view text, std::string_view source) {
    const json j = parse_json(text, source);
    if (!j.is_object()) throw Error(ErrorCode::parse, std::string(source) + ": expected an object");
    PowerLawModel m;
    m.beta = require_number(j, "beta", source);
    m.alpha = require_number(j, "alpha", source);
    m.residual_sigma = require_number(j, "residual_sigma_mhz", source);
    m.r_min = require_number(j, "r_min", source);
    m.r_max = require_number(j, "r_max", source);
    try {
        m.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::parse, std::string(source) + ": " + e.what());
    }
    return m;
}

PowerLawModel load_calibration(const std::filesystem::path& path) {
    return calibration_from_json(read_file(path), path.string());
}

void save_calibration(const std::filesystem::path& path, const PowerLawModel& model) {
    write_file(path, calibration_to_json(model));
}

DesignFile design_from_json(std::string_view text, std::string_view source) {
    const json j = parse_json(text, source);
    const std::string src(source);
    if (!j.is_object()) throw Error(ErrorCode::parse, src + ": expected an object");
    const std::size_t rows = require_count(j, "rows", source);
    const std::size_t cols = require_count(j, "cols", source);
    DesignFile design;
    design.base_frequency = require_number(j, "base_frequency_mhz", source);

    if (!j.contains("design_window_mhz"))
        throw Error(ErrorCode::parse, src + ": missing field 'design_window_mhz'");
    const auto& w = j.at("design_window_mhz");
    if (!w.is_array() || w.size() != 2 || !w[0].is_number() || !w[1].is_number() ||
        !(w[0].get<double>() < w[1].get<double>()))
        throw Error(ErrorCode::parse, src + ": 'design_window_mhz' must be [lo, hi] with lo < hi");
    design.design_window = {w[0].get<double>(), w[1].get<double>()};

    std::vector<LatticeNode> nodes(rows * cols);
    auto read_grid = [&](const char* key, bool required, auto&& assign) {
        if (!j.contains(key)) {
            if (required) throw Error(ErrorCode::parse, src + ": missing field '" + key + "'");
            return;
        }
        const auto& grid = j.at(key);
        if (!grid.is_array())
            throw Error(ErrorCode::parse, src + ": '" + key + "' must be an array of rows");
        if (grid.size() > rows)
            throw Error(ErrorCode::parse, src + ": '" + key + "' has " +
                                              std::to_string(grid.size()) + " rows, expected " +
                                              std::to_string(rows));
        std::string missing;
        for (std::size_t r = 0; r < rows; ++r) {
            const json* row = r < grid.size() ? &grid[r] : nullptr;
            if (row && !row->is_array())
                throw Error(ErrorCode::parse, src + ": '" + key + "' row " + std::to_string(r) +
                                                  " must be an array");
            if (row && row->size() > cols)
                throw Error(ErrorCode::parse, src + ": '" + key + "' row " + std::to_string(r) +
                                                  " has more than " + std::to_string(cols) +
                                                  " entries");
            for (std::size_t c = 0; c < cols; ++c) {
                const json* cell = row && c < row->size() ? &(*row)[c] : nullptr;
                const std::size_t id = r * cols + c;
                if (cell && cell->is_number()) {
                    assign(id, cell->get<double>());
                } else if (cell && !cell->is_null()) {
                    throw Error(ErrorCode::parse, src + ": '" + key + "' entry for node q" +
                                                      std::to_string(id) + " must be a number");
                } else if (required) {
                    missing += (missing.empty() ? "" : ", ") + std::string("q") +
                               std::to_string(id) + " (" + std::to_string(r) + "," +
                               std::to_string(c) + ")";
                }
            }
        }
        if (!missing.empty())
            throw Error(ErrorCode::parse, src + ": '" + key + "' is missing a frequency for node " +
                                              missing);
    };
    read_grid("offsets_mhz", true,
              [&](std::size_t id, double v) { nodes[id].design_f = design.base_frequency + v; });
    read_grid("measured_offsets_mhz", false,
              [&](std::size_t id, double v) { nodes[id].measured_f = design.base_frequency + v; });
    design.lattice = QubitLattice(rows, cols, std::move(nodes));
    return design;
}

DesignFile load_design(const std::filesystem::path& path) {
    return design_from_json(read_file(path), path.string());
}

std::string design_to_json(const DesignFile& design) {
    const auto& lat = design.lattice;
    json j;
    j["rows"] = lat.rows();
    j["cols"] = lat.cols();
    j["base_frequency_mhz"] = design.base_frequency;
    j["design_window_mhz"] = {design.design_window.lo, design.design_window.hi};
    json offsets = json::array();
    json measured = json::array();
    bool any_measured = false;
    for (std::size_t r = 0; r < lat.rows(); ++r) {
        json orow = json::array();
        json mrow = json::array();
        for (std::size_t c = 0; c < lat.cols(); ++c) {
            const auto& node = lat.node(lat.index(r, c));
            orow.push_back(node.design_f - design.base_frequency);
            if (node.measured_f) {
                any_measured = true;
                mrow.push_back(*node.measured_f - design.base_frequency);
            } else {
                mrow.push_back(nullptr);
            }
        }
        offsets.push_back(orow);
        measured.push_back(mrow);
    }
    j["offsets_mhz"] = offsets;
    if (any_measured) j["measured_offsets_mhz"] = measured;
    return j.dump(2) + "\n";
}

DesignFile design_from_cell(const UnitCellDesign& cell) {
    DesignFile d;
    d.lattice = tile(cell, 1, 1);
    d.base_frequency = cell.base_frequency;
    d.design_window = cell.design_window;
    return d;
}

void write_yield_table(std::ostream& out, std::span<const YieldPoint> points) {
    out << kYieldHeader << '\n';
    for (const auto& p : points) {
        out << p.result.qubit_count << ',' << format_fixed(p.sigma_f, 3) << ','
            << format_fixed(p.result.yield, 6) << ',' << format_fixed(p.result.ci_lo, 6) << ','
            << format_fixed(p.result.ci_hi, 6) << '\n';
    }
}

// ---------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::io, "failed writing '" + path.string() + "'");
}

std::string file_digest(const std::filesystem::path& path) {
    const std::uint64_t h = fnv1a64(read_file(path));
    char buf[17];
    static constexpr char kHex[] = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) buf[15 - i] = kHex[(h >> (4 * i)) & 0xf];
    buf[16] = '\0';
    return std::string("fnv1a64:") + buf;
}

std::string manifest_to_json(const RunManifest& manifest) {
    json j;
    j["command"] = manifest.command;
    json config = json::object();
    if (!manifest.config_json.empty()) {
        try {
            config = json::parse(manifest.config_json);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::parse, std::string("manifest config: ") + e.what());
        }
        if (!config.is_object()) throw Error(ErrorCode::parse, "manifest config: expected an object");
    }
    j["config"] = std::move(config);
    if (manifest.has_seed) j["seed"] = manifest.seed;
    json inputs = json::array();
    for (const auto& [path, digest] : manifest.inputs) inputs.push_back({{"path", path}, {"digest", digest}});
    j["inputs"] = inputs;
    j["tool_version"] = manifest.tool_version;
    return j.dump(2) + "\n";
}

}  // namespace freqtrim::io
