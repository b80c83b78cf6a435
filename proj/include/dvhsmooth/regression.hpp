#pragma once

#include <span>

namespace dvhsmooth {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Ordinary least squares y = slope * x + intercept.
///
/// r_squared is 1 - SS_res / max(SS_tot, n * flat_floor^2). The floor keeps a
/// perfectly flat data set (SS_tot = 0) from reading as a failed fit: a
/// horizontal line through it is exact. With flat_floor = 0 this is the
/// textbook coefficient of determination.
LinearFit fit_line(std::span<const double> x, std::span<const double> y, double flat_floor = 0.0);

}  // namespace dvhsmooth
