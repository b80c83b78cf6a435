#include "dvhsmooth/regression.hpp"

#include <algorithm>
#include <cmath>

#include "dvhsmooth/error.hpp"

namespace dvhsmooth {

LinearFit fit_line(std::span<const double> x, std::span<const double> y, double flat_floor) {
    require(x.size() == y.size(), "fit_line: size mismatch");
    if (x.size() < 2) fail(ErrorCode::InsufficientData, "fit_line needs at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) fail(ErrorCode::InsufficientData, "fit_line: abscissae are all equal");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.slope * x[i] + fit.intercept);
        ss_res += r * r;
    }
    const double denom = std::max(syy, n * flat_floor * flat_floor);
    fit.r_squared = denom > 0.0 ? std::clamp(1.0 - ss_res / denom, 0.0, 1.0) : 1.0;
    return fit;
}

}  // namespace dvhsmooth
