#include "dvhsmooth/smoothness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dvhsmooth/error.hpp"
#include "dvhsmooth/regression.hpp"

namespace dvhsmooth {

// ---------------------------------------------------------------------------
// Lambda location

LambdaPoint locate_lambda_1d(const PeakFamily& family, double h, std::size_t which_weight,
                             std::pair<double, double> bracket, const ParamPoint& base,
                             const LambdaOptions& opts) {
    require(which_weight < family.dimension(), "weight index out of range");
    require(base.size() == family.dimension(), "parameter point does not match family");
    require(std::isfinite(h) && h > 0.0, "dose level must be positive");
    auto [lo, hi] = bracket;
    require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, "bracket must satisfy lo < hi");
    require(opts.scan_points >= 2, "scan_points must be at least 2");

    const ParamPath path = [&](double t) { return base.with(which_weight, t); };
    std::vector<double> grid(static_cast<std::size_t>(opts.scan_points) + 1);
    for (std::size_t i = 0; i < grid.size(); ++i)
        grid[i] = i + 1 == grid.size() ? hi : lo + (hi - lo) * static_cast<double>(i) / opts.scan_points;

    const auto initial = find_critical_points(family, path(lo), opts.search_box, 8, opts.critical);
    for (std::size_t which = 0; which < initial.size(); ++which) {
        const auto track =
            track_critical_value(family, path, which, grid, opts.search_box, opts.critical);
        for (std::size_t i = 0; i + 1 < track.size(); ++i) {
            const double ga = track[i].value - h, gb = track[i + 1].value - h;
            if (ga == 0.0 || (ga < 0.0) != (gb < 0.0)) {
                // Bisect inside [track[i].t, track[i+1].t], continuing the
                // critical point from the lower end.
                double a = track[i].t, b = track[i + 1].t;
                Vec3 xa = track[i].location;
                double fa = ga;
                CriticalPoint cp = classify_critical_point(family, path(a), xa, opts.critical);
                for (int it = 0; it < 200 && fa != 0.0; ++it) {
                    const double mid = 0.5 * (a + b);
                    if (!(mid > a && mid < b)) break;
                    const CriticalPoint cm = continue_critical_point(family, path, a, xa, mid, opts.critical);
                    const double fm = cm.value - h;
                    if ((fm < 0.0) == (fa < 0.0) && fm != 0.0) {
                        a = mid;
                        xa = cm.location;
                        fa = fm;
                        cp = cm;
                    } else {
                        b = mid;
                    }
                }
                // Report whichever end is closer to the level.
                const CriticalPoint cb = continue_critical_point(family, path, a, xa, b, opts.critical);
                double t_star = a;
                if (std::abs(cb.value - h) < std::abs(cp.value - h)) {
                    t_star = b;
                    cp = cb;
                }
                LambdaPoint lp{path(t_star), which_weight, cp, h, std::abs(cp.value - h)};
                if (!(lp.residual < opts.lambda_tol)) {
                    std::ostringstream os;
                    os << "Lambda bisection stopped with residual " << lp.residual;
                    fail(ErrorCode::NumericalDomain, os.str());
                }
                return lp;
            }
        }
    }
    std::ostringstream os;
    os << "no critical value crosses h = " << h << " for weight " << which_weight << " in ["
       << lo << ", " << hi << "]";
    fail(ErrorCode::BracketInvalid, os.str());
}

// ---------------------------------------------------------------------------
// Finite-difference probes

std::string_view to_string(Stencil s) noexcept {
    switch (s) {
        case Stencil::Left: return "left";
        case Stencil::Right: return "right";
        case Stencil::Central: return "central";
    }
    return "?";
}

namespace {

struct SecondDifference {
    double undivided = 0.0;
    double scale = 0.0;  // largest |f| in the stencil
};

SecondDifference second_difference(const std::function<double(double)>& fn, double s, double h,
                                   Stencil stencil) {
    double a = 0.0, b = 0.0, c = 0.0;
    switch (stencil) {
        case Stencil::Left:
            a = fn(s);
            b = fn(s - h);
            c = fn(s - 2.0 * h);
            break;
        case Stencil::Right:
            a = fn(s);
            b = fn(s + h);
            c = fn(s + 2.0 * h);
            break;
        case Stencil::Central:
            a = fn(s - h);
            b = fn(s);
            c = fn(s + h);
            break;
    }
    return {a - 2.0 * b + c, std::max({std::abs(a), std::abs(b), std::abs(c)})};
}

}  // namespace

double fd_second_derivative(const std::function<double(double)>& fn, double sigma, double step,
                            Stencil stencil) {
    require(std::isfinite(step) && step > 0.0, "step must be positive");
    return second_difference(fn, sigma, step, stencil).undivided / (step * step);
}

std::vector<double> default_probe_steps() {
    std::vector<double> steps;
    for (int i = 0; i <= 12; ++i) steps.push_back(1e-1 * std::pow(10.0, -0.25 * i));
    return steps;
}

ExponentFit holder_exponent(const std::function<double(double)>& fn, double sigma_star,
                            Stencil stencil, std::span<const double> probe_steps,
                            const HolderOptions& opts) {
    require(probe_steps.size() >= 5, "holder_exponent needs at least five probe steps");
    for (double s : probe_steps) require(std::isfinite(s) && s > 0.0, "probe steps must be positive");
    const auto [smin, smax] = std::minmax_element(probe_steps.begin(), probe_steps.end());
    require(*smax / *smin >= 100.0 * (1.0 - 1e-12), "probe steps must span at least two decades");

    std::vector<double> lx, ly;
    for (double s : probe_steps) {
        const SecondDifference d = second_difference(fn, sigma_star, s, stencil);
        if (!std::isfinite(d.undivided)) fail(ErrorCode::NumericalDomain, "non-finite probe value");
        const double floor =
            opts.noise_floor + 8.0 * std::numeric_limits<double>::epsilon() * d.scale;
        if (std::abs(d.undivided) <= floor) continue;
        lx.push_back(std::log(s));
        ly.push_back(std::log(std::abs(d.undivided) / (s * s)));
    }

    ExponentFit fit;
    fit.sample_range = {*smin, *smax};
    fit.resolved = static_cast<int>(lx.size());
    if (lx.empty()) {
        // Second differences vanish at every step: locally affine.
        fit.r_squared = 1.0;
        return fit;
    }
    if (lx.size() < 3)
        fail(ErrorCode::InsufficientData, "fewer than three resolved second differences");
    const LinearFit line = fit_line(lx, ly, opts.flat_spread);
    fit.exponent = line.slope;
    fit.coefficient = std::exp(line.intercept);
    fit.r_squared = line.r_squared;
    if (fit.r_squared < opts.fit_quality_min) {
        std::ostringstream os;
        os << "second differences do not follow a power law (r^2 = " << fit.r_squared << ")";
        fail(ErrorCode::FitFailed, os.str());
    }
    return fit;
}

ExponentFit step_scaling_probe(const Scalar1DObjective& obj, double sigma_star,
                               std::span<const double> starts, const NewtonOptions& newton,
                               double fit_quality_min) {
    require(!starts.empty(), "step_scaling_probe needs at least one start");
    const bool left = starts.front() < sigma_star;
    for (double s : starts)
        require(s != sigma_star && (s < sigma_star) == left,
                "all starts must lie on one side of sigma_star");

    std::vector<double> lx, ly;
    double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
    for (double s0 : starts) {
        const Trace t = newton1d_run(obj, s0, newton);
        for (std::size_t k = 0; k < t.step_sizes.size(); ++k) {
            const double s = t.iterates[k][0];
            if ((s < sigma_star) != left || s == sigma_star || t.step_sizes[k] <= 0.0) break;
            const double d = std::abs(s - sigma_star);
            lx.push_back(std::log(d));
            ly.push_back(std::log(t.step_sizes[k]));
            dmin = std::min(dmin, d);
            dmax = std::max(dmax, d);
        }
    }
    if (lx.size() < 2) fail(ErrorCode::InsufficientData, "fewer than two Newton steps on the probe side");
    const LinearFit line = fit_line(lx, ly);
    ExponentFit fit{line.slope, std::exp(line.intercept), line.r_squared, {dmin, dmax},
                    static_cast<int>(lx.size())};
    if (fit.r_squared < fit_quality_min) {
        std::ostringstream os;
        os << "Newton steps do not follow a power law (r^2 = " << fit.r_squared << ")";
        fail(ErrorCode::FitFailed, os.str());
    }
    return fit;
}

// ---------------------------------------------------------------------------
// Lambda distance

LambdaMonitor::LambdaMonitor(PeakFamily family, double h, Vec3 start, CriticalPointOptions opts)
    : family_(std::move(family)), h_(h), location_(std::move(start)), opts_(opts) {
    require(std::isfinite(h) && h > 0.0, "dose level must be positive");
}

double LambdaMonitor::distance(const ParamPoint& sigma) {
    std::optional<CriticalPoint> cp = refine_critical_point(family_, sigma, location_, 1.0, opts_);
    if (!cp || (have_signature_ && !(cp->signature == signature_))) {
        // Fall back to a full search and take the nearest point of the same type.
        cp.reset();
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : find_critical_points(family_, sigma, Region::default_box(), 8, opts_)) {
            if (have_signature_ && !(c.signature == signature_)) continue;
            const double d = (c.location - location_).norm();
            if (d < best) {
                best = d;
                cp = c;
            }
        }
        if (!cp) return std::numeric_limits<double>::infinity();
    }
    location_ = cp->location;
    signature_ = cp->signature;
    have_signature_ = true;
    const double g = grad_sigma(family_, sigma, location_).norm();
    return std::abs(cp->value - h_) / g;
}

}  // namespace dvhsmooth
