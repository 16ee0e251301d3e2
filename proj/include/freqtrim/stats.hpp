#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Descriptive statistics shared by every module. Standard deviations are
// population (divide by N) throughout.
namespace freqtrim {

struct Summary {
    std::size_t count = 0;
    double mean = 0.0;
    double sigma = 0.0;
    double min = 0.0;
    double max = 0.0;
};

/// Throws Error(config) on empty input.
Summary summarize(std::span<const double> values);

double mean(std::span<const double> values);
double population_sigma(std::span<const double> values);
double median(std::span<const double> values);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double sse = 0.0;
};

/// Ordinary least squares y = intercept + slope * x. Needs two distinct x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Wilson score interval for a binomial proportion (z = 1.96 -> 95%).
Interval wilson_interval(std::size_t successes, std::size_t trials,
                         double z = 1.959963984540054);

}  // namespace freqtrim
