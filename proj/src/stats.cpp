#include "freqtrim/stats.hpp"

#include <algorithm>
#include <cmath>

#include "freqtrim/error.hpp"

namespace freqtrim {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_model: return "invalid model";
        case ErrorCode::domain: return "domain error";
        case ErrorCode::fit: return "fit error";
        case ErrorCode::controller: return "controller error";
        case ErrorCode::config: return "configuration error";
        case ErrorCode::infeasible: return "infeasible";
        case ErrorCode::search: return "search failure";
        case ErrorCode::parse: return "parse error";
        case ErrorCode::io: return "i/o error";
    }
    return "error";
}

namespace {

void require_nonempty(std::span<const double> values, const char* what) {
    if (values.empty()) throw Error(ErrorCode::config, std::string(what) + ": empty input");
}

}  // namespace

double mean(std::span<const double> values) {
    require_nonempty(values, "mean");
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double population_sigma(std::span<const double> values) {
    const double mu = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - mu) * (v - mu);
    return std::sqrt(ss / static_cast<double>(values.size()));
}

Summary summarize(std::span<const double> values) {
    require_nonempty(values, "summarize");
    Summary s;
    s.count = values.size();
    s.mean = mean(values);
    s.sigma = population_sigma(values);
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    s.min = *lo;
    s.max = *hi;
    return s;
}

double median(std::span<const double> values) {
    require_nonempty(values, "median");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(ErrorCode::fit, "fit_line: x and y differ in length");
    if (x.size() < 2) throw Error(ErrorCode::fit, "fit_line: need at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw Error(ErrorCode::fit, "fit_line: x values are all equal");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        f.sse += r * r;
    }
    return f;
}

Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
    if (trials == 0) throw Error(ErrorCode::config, "wilson_interval: zero trials");
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::clamp(centre - half, 0.0, p), std::clamp(centre + half, p, 1.0)};
}

}  // namespace freqtrim
