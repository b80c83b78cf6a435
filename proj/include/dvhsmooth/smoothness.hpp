#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "dvhsmooth/dose_model.hpp"
#include "dvhsmooth/objective.hpp"
#include "dvhsmooth/optimizer.hpp"

namespace dvhsmooth {

/// A parameter point where the dose level h equals a critical value.
struct LambdaPoint {
    ParamPoint sigma;
    std::size_t which_weight = 0;
    CriticalPoint critical_point;
    double dose_level = 0.0;
    double residual = 0.0;  // |f_sigma(x_sigma) - h|
};

struct LambdaOptions {
    double lambda_tol = 1e-8;
    int scan_points = 16;  // continuation grid across the bracket
    CriticalPointOptions critical;
    Region search_box = Region::default_box();
};

/// Bisection on t -> f_{sigma(t)}(x_{sigma(t)}) - h, where sigma(t) is
/// `base` with weight `which_weight` set to t. Every critical point found at
/// the lower bracket end is continued across the bracket; the first (in
/// descending value order) whose value minus h changes sign is used.
/// Throws BracketInvalid when none does.
LambdaPoint locate_lambda_1d(const PeakFamily& family, double h, std::size_t which_weight,
                             std::pair<double, double> bracket, const ParamPoint& base,
                             const LambdaOptions& opts = {});

enum class Stencil { Left, Right, Central };

std::string_view to_string(Stencil s) noexcept;

/// (f(s) - 2 f(s-h) + f(s-2h)) / h^2, its mirror, or the central quotient.
double fd_second_derivative(const std::function<double(double)>& fn, double sigma, double step,
                            Stencil stencil);

struct ExponentFit {
    double exponent = 0.0;
    double coefficient = 0.0;
    double r_squared = 0.0;
    std::pair<double, double> sample_range{0.0, 0.0};
    int resolved = 0;  // samples that entered the regression
};

struct HolderOptions {
    double fit_quality_min = 0.98;
    // Undivided second differences at or below this magnitude (plus a few
    // ulps of the stencil values) are unresolved and left out of the fit;
    // when none is resolved the function is flat there and the exponent is 0.
    double noise_floor = 0.0;
    // r^2 is measured against max(spread, n * flat_spread^2) of the log
    // magnitudes, so nearly constant second differences count as a good fit.
    double flat_spread = 0.1;
};

/// {1e-1, ..., 1e-4} with ratio 10^(-1/4).
std::vector<double> default_probe_steps();

/// Log-log least squares of |second difference| against step.
ExponentFit holder_exponent(const std::function<double(double)>& fn, double sigma_star,
                            Stencil stencil, std::span<const double> probe_steps,
                            const HolderOptions& opts = {});

/// Runs Newton from each start (all on one side of sigma_star), pools
/// (|s_k - sigma_star|, step_k) for iterates on that side and fits step ~ c d^e.
ExponentFit step_scaling_probe(const Scalar1DObjective& obj, double sigma_star,
                               std::span<const double> starts, const NewtonOptions& newton = {},
                               double fit_quality_min = 0.98);

/// First-order distance from sigma to Lambda for one tracked critical point:
/// |f_sigma(x_sigma) - h| / |grad_sigma f(x_sigma)|. The critical point is
/// re-polished from its last location on every call.
class LambdaMonitor {
public:
    LambdaMonitor(PeakFamily family, double h, Vec3 start, CriticalPointOptions opts = {});

    double distance(const ParamPoint& sigma);
    const Vec3& location() const noexcept { return location_; }

private:
    PeakFamily family_;
    double h_;
    Vec3 location_;
    MorseSignature signature_;
    bool have_signature_ = false;
    CriticalPointOptions opts_;
};

}  // namespace dvhsmooth
