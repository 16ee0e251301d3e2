#include "freqtrim/freq_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "freqtrim/error.hpp"
#include "freqtrim/stats.hpp"

namespace freqtrim {

void PowerLawModel::validate() const {
    if (!std::isfinite(beta) || beta <= 0.0)
        throw Error(ErrorCode::invalid_model, "power law: beta must be positive");
    if (!std::isfinite(alpha) || alpha <= 0.0)
        throw Error(ErrorCode::invalid_model, "power law: alpha must be positive");
    if (!(residual_sigma >= 0.0))
        throw Error(ErrorCode::invalid_model, "power law: residual sigma must be >= 0");
    if (!(r_min >= 0.0) || !(r_max >= r_min))
        throw Error(ErrorCode::invalid_model, "power law: fit domain must satisfy 0 <= r_min <= r_max");
}

PowerLawModel fit_power_law(std::span<const FrequencyPoint> points) {
    if (points.size() < 2)
        throw Error(ErrorCode::fit, "power-law fit: need at least 2 points, got " +
                                        std::to_string(points.size()));
    std::vector<double> x, y;
    x.reserve(points.size());
    y.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (!(p.resistance > 0.0) || !(p.frequency > 0.0) || !std::isfinite(p.resistance) ||
            !std::isfinite(p.frequency))
            throw Error(ErrorCode::fit,
                        "power-law fit: point " + std::to_string(i) + " is not strictly positive");
        x.push_back(std::log(p.resistance));
        y.push_back(std::log(p.frequency));
    }
    const LineFit line = fit_line(x, y);
    PowerLawModel model;
    model.alpha = -line.slope;
    model.beta = std::exp(line.intercept);
    if (!(model.alpha > 0.0))
        throw Error(ErrorCode::fit, "power-law fit: frequency does not decrease with resistance");

    std::vector<double> residuals;
    residuals.reserve(points.size());
    model.r_min = points[0].resistance;
    model.r_max = points[0].resistance;
    for (const auto& p : points) {
        residuals.push_back(p.frequency - model.beta * std::pow(p.resistance, -model.alpha));
        model.r_min = std::min(model.r_min, p.resistance);
        model.r_max = std::max(model.r_max, p.resistance);
    }
    model.residual_sigma = population_sigma(residuals);
    return model;
}

double predict_f(const PowerLawModel& model, double resistance) {
    if (!(resistance > 0.0) || !std::isfinite(resistance))
        throw Error(ErrorCode::domain, "predict_f: resistance must be positive");
    return model.beta * std::pow(resistance, -model.alpha);
}

double invert_R(const PowerLawModel& model, double frequency) {
    if (!(frequency > 0.0) || !std::isfinite(frequency))
        throw Error(ErrorCode::domain, "invert_R: frequency must be positive");
    return std::pow(model.beta / frequency, 1.0 / model.alpha);
}

TargetAssignment assign_target_R(const PowerLawModel& model, double f_design, double aging_budget) {
    if (!(aging_budget >= 0.0 && aging_budget < 1.0))
        throw Error(ErrorCode::domain, "assign_target_R: aging budget must lie in [0, 1)");
    TargetAssignment out;
    out.design_resistance = invert_R(model, f_design);
    out.target_resistance = out.design_resistance * (1.0 - aging_budget);
    if (model.r_max > model.r_min)
        out.within_domain =
            out.design_resistance >= model.r_min && out.design_resistance <= model.r_max;
    return out;
}

double freq_equiv_sigma(const PowerLawModel& model, double f_pred, double sigma_r_rel) {
    if (!(f_pred > 0.0)) throw Error(ErrorCode::domain, "freq_equiv_sigma: frequency must be positive");
    if (!(sigma_r_rel >= 0.0))
        throw Error(ErrorCode::domain, "freq_equiv_sigma: relative spread must be >= 0");
    return model.alpha * f_pred * sigma_r_rel;
}

// ---------------------------------------------------------------------------
// Segmented fit

std::size_t SegmentedPowerLaw::segment_of(double t) const {
    return static_cast<std::size_t>(std::lower_bound(breakpoints.begin(), breakpoints.end(), t) -
                                    breakpoints.begin());
}

double SegmentedPowerLaw::evaluate(double t) const {
    const std::size_t k = segment_of(t);
    return amplitudes.at(k) * std::pow(t, exponents.at(k));
}

namespace {

std::size_t split_index(const std::vector<double>& t_sorted, double breakpoint) {
    // Points with t <= breakpoint belong to the left segment.
    return static_cast<std::size_t>(
        std::upper_bound(t_sorted.begin(), t_sorted.end(), breakpoint) - t_sorted.begin());
}

// Least-squares SSE of the continuous broken line
// y = c0 + c1 x + sum_k d_k max(0, x - knot_k) in log-log space.
double broken_line_sse(const std::vector<double>& x, const std::vector<double>& y,
                       const std::vector<double>& knots) {
    const std::size_t p = knots.size() + 2;
    std::vector<double> a(p * (p + 1), 0.0);  // augmented normal equations
    std::vector<double> row(p);
    auto regressors = [&](double xi) {
        row[0] = 1.0;
        row[1] = xi;
        for (std::size_t k = 0; k < knots.size(); ++k) row[k + 2] = std::max(0.0, xi - knots[k]);
    };
    for (std::size_t i = 0; i < x.size(); ++i) {
        regressors(x[i]);
        for (std::size_t r = 0; r < p; ++r) {
            for (std::size_t c = 0; c < p; ++c) a[r * (p + 1) + c] += row[r] * row[c];
            a[r * (p + 1) + p] += row[r] * y[i];
        }
    }
    for (std::size_t c = 0; c < p; ++c) {
        std::size_t pivot = c;
        for (std::size_t r = c + 1; r < p; ++r)
            if (std::abs(a[r * (p + 1) + c]) > std::abs(a[pivot * (p + 1) + c])) pivot = r;
        if (!(std::abs(a[pivot * (p + 1) + c]) > 1e-12)) return std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k <= p; ++k) std::swap(a[c * (p + 1) + k], a[pivot * (p + 1) + k]);
        for (std::size_t r = 0; r < p; ++r) {
            if (r == c) continue;
            const double f = a[r * (p + 1) + c] / a[c * (p + 1) + c];
            for (std::size_t k = c; k <= p; ++k) a[r * (p + 1) + k] -= f * a[c * (p + 1) + k];
        }
    }
    std::vector<double> coef(p);
    for (std::size_t r = 0; r < p; ++r) coef[r] = a[r * (p + 1) + p] / a[r * (p + 1) + r];
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        regressors(x[i]);
        double fit = 0.0;
        for (std::size_t r = 0; r < p; ++r) fit += coef[r] * row[r];
        sse += (y[i] - fit) * (y[i] - fit);
    }
    return sse;
}

// Exhaustive over increasing candidate tuples with enough points per segment.
struct ChangepointSearch {
    const std::vector<double>& t;
    const std::vector<double>& x;
    const std::vector<double>& y;
    const std::vector<double>& candidates;
    std::size_t min_points;
    std::size_t changepoints;

    double best_sse = std::numeric_limits<double>::infinity();
    std::vector<double> best;
    std::vector<double> current;
    std::vector<double> knots;

    void run(std::size_t first_candidate, std::size_t begin) {
        if (current.size() == changepoints) {
            if (t.size() - begin < min_points) return;
            const double sse = broken_line_sse(x, y, knots);
            if (sse < best_sse) {
                best_sse = sse;
                best = current;
            }
            return;
        }
        for (std::size_t c = first_candidate; c < candidates.size(); ++c) {
            const std::size_t split = split_index(t, candidates[c]);
            if (split < begin + min_points) continue;
            if (t.size() - split < min_points * (changepoints - current.size())) break;
            current.push_back(candidates[c]);
            knots.push_back(std::log(candidates[c]));
            run(c + 1, split);
            knots.pop_back();
            current.pop_back();
        }
    }
};

}  // namespace

SegmentedPowerLaw fit_segmented_power_law(std::span<const double> t_hr,
                                          std::span<const double> delta_r,
                                          std::optional<std::vector<double>> breakpoints,
                                          const SegmentedFitOptions& options) {
    if (t_hr.size() != delta_r.size())
        throw Error(ErrorCode::fit, "segmented fit: time and shift series differ in length");
    if (options.min_points < 2) throw Error(ErrorCode::fit, "segmented fit: min_points must be >= 2");

    std::vector<std::size_t> order(t_hr.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < t_hr.size(); ++i) {
        if (!(t_hr[i] > 0.0) || !(delta_r[i] > 0.0) || !std::isfinite(t_hr[i]) ||
            !std::isfinite(delta_r[i]))
            throw Error(ErrorCode::fit,
                        "segmented fit: point " + std::to_string(i) + " is not strictly positive");
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return t_hr[a] < t_hr[b]; });
    std::vector<double> t, x, y;
    for (std::size_t i : order) {
        t.push_back(t_hr[i]);
        x.push_back(std::log(t_hr[i]));
        y.push_back(std::log(delta_r[i]));
    }

    std::vector<double> bps;
    if (breakpoints) {
        bps = *breakpoints;
        for (std::size_t i = 0; i < bps.size(); ++i) {
            if (!(bps[i] > 0.0) || (i > 0 && bps[i] <= bps[i - 1]))
                throw Error(ErrorCode::fit,
                            "segmented fit: breakpoints must be positive and strictly increasing");
        }
    } else {
        if (t.empty()) throw Error(ErrorCode::fit, "segmented fit: empty series");
        const double lo = std::log(t.front());
        const double hi = std::log(t.back());
        std::vector<double> candidates;
        for (std::size_t i = 0; i < options.grid_size; ++i)
            candidates.push_back(
                std::exp(lo + (hi - lo) * static_cast<double>(i + 1) /
                                  static_cast<double>(options.grid_size + 1)));
        ChangepointSearch search{t, x, y, candidates, options.min_points, options.changepoints,
                                 std::numeric_limits<double>::infinity(), {}, {}, {}};
        search.run(0, 0);
        if (search.best.size() != options.changepoints)
            throw Error(ErrorCode::fit, "segmented fit: not enough points for " +
                                            std::to_string(options.changepoints) +
                                            " changepoints");
        bps = search.best;
    }

    SegmentedPowerLaw out;
    out.breakpoints = bps;
    std::size_t begin = 0;
    for (std::size_t k = 0; k <= bps.size(); ++k) {
        const std::size_t end = k < bps.size() ? split_index(t, bps[k]) : t.size();
        if (end < begin || end - begin < options.min_points)
            throw Error(ErrorCode::fit, "segmented fit: segment " + std::to_string(k) + " has " +
                                            std::to_string(end > begin ? end - begin : 0) +
                                            " points, need " + std::to_string(options.min_points));
        const std::span<const double> xs(x.data() + begin, end - begin);
        const std::span<const double> ys(y.data() + begin, end - begin);
        const LineFit line = fit_line(xs, ys);
        out.exponents.push_back(line.slope);
        out.amplitudes.push_back(std::exp(line.intercept));
        out.segment_counts.push_back(end - begin);
        out.sse += line.sse;
        begin = end;
    }
    for (std::size_t k = 0; k < bps.size(); ++k) {
        const double lb = std::log(bps[k]);
        const double left = std::log(out.amplitudes[k]) + out.exponents[k] * lb;
        const double right = std::log(out.amplitudes[k + 1]) + out.exponents[k + 1] * lb;
        out.continuity_residual = std::max(out.continuity_residual, std::abs(left - right));
    }
    return out;
}

// ---------------------------------------------------------------------------

GaussianFit fit_gaussian(std::span<const double> samples) {
    if (samples.size() < 2)
        throw Error(ErrorCode::fit, "gaussian fit: need at least 2 samples");
    return {mean(samples), population_sigma(samples), samples.size()};
}

double compose_sigma(std::span<const double> components) {
    double ss = 0.0;
    for (double c : components) {
        if (!(c >= 0.0)) throw Error(ErrorCode::domain, "compose_sigma: components must be >= 0");
        ss += c * c;
    }
    return std::sqrt(ss);
}

double loss_tangent(double t1_us, double f_ghz) {
    if (!(t1_us > 0.0) || !(f_ghz > 0.0))
        throw Error(ErrorCode::domain, "loss_tangent: T1 and frequency must be positive");
    return 1.0 / (t1_us * 1e-6 * 2.0 * std::numbers::pi * f_ghz * 1e9);
}

double tunability(double f_max_mhz, double f_min_mhz) {
    if (!(f_max_mhz >= f_min_mhz))
        throw Error(ErrorCode::domain, "tunability: f_max must be >= f_min");
    return f_max_mhz - f_min_mhz;
}

}  // namespace freqtrim
