#include "dvhsmooth/histogram.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include <Eigen/Dense>

#include "dvhsmooth/csv.hpp"
#include "dvhsmooth/error.hpp"
#include "dvhsmooth/regression.hpp"
#include "grid.hpp"

namespace dvhsmooth {

QuadratureSpec QuadratureSpec::grid(int resolution, int refine_depth) {
    QuadratureSpec q;
    q.kind = Kind::Grid;
    q.resolution = resolution;
    q.refine_depth = refine_depth;
    q.validate();
    return q;
}

QuadratureSpec QuadratureSpec::monte_carlo(std::uint64_t samples, std::uint64_t seed) {
    QuadratureSpec q;
    q.kind = Kind::MonteCarlo;
    q.samples = samples;
    q.seed = seed;
    q.validate();
    return q;
}

void QuadratureSpec::validate() const {
    if (kind == Kind::Grid) {
        require(resolution >= 8, "grid resolution must be at least 8");
        require(refine_depth >= 0 && refine_depth <= 12, "refine_depth must be in [0, 12]");
    } else {
        require(samples >= 1000, "Monte-Carlo quadrature needs at least 1000 samples");
    }
}

namespace {

using detail::Coverage;

struct CellContext {
    std::span<const Peak> peaks;
    std::span<const double> weights;
    const Region& region;
    std::span<const double> levels;
};

// Leaves whose curvature term outweighs the gradient term may hold a
// critical point, where a plane is a poor model of the level set; those keep
// splitting for up to this many extra levels.
constexpr int kCriticalExtraDepth = 12;

// Adds weight * (fraction of the cell inside the region with f >= h) to
// acc[l] for every level index l in `pending`.
void accumulate_cell(const CellContext& ctx, const Vec3& c, const Vec3& hw, int depth,
                     int extra, double weight, Coverage cov, std::span<const int> pending,
                     std::span<double> acc) {
    const FieldJet j = jet_unchecked(ctx.peaks, ctx.weights, c);
    // Taylor bound on |f - f(c)| over the cell, padded.
    const double bound = 1.25 * (j.gradient.cwiseAbs().dot(hw)) + j.hessian.norm() * hw.squaredNorm();

    double region_frac = -1.0;  // computed on demand
    auto inside_fraction = [&] {
        if (region_frac < 0.0)
            region_frac = cov == Coverage::Inside
                              ? 1.0
                              : detail::region_fraction(ctx.region, c, hw, depth);
        return region_frac;
    };

    std::vector<int> cut;
    for (int l : pending) {
        const double h = ctx.levels[static_cast<std::size_t>(l)];
        if (h <= j.value - bound)
            acc[static_cast<std::size_t>(l)] += weight * inside_fraction();
        else if (h <= j.value + bound)
            cut.push_back(l);
    }
    if (cut.empty()) return;

    const double curvature = j.hessian.norm() * hw.squaredNorm();
    if (depth == 0 && (extra == 0 || curvature <= j.gradient.cwiseAbs().dot(hw))) {
        const double rf = cov == Coverage::Inside ? 1.0 : detail::region_fraction(ctx.region, c, hw, 0);
        if (rf <= 0.0) return;
        for (int l : cut) {
            const double h = ctx.levels[static_cast<std::size_t>(l)];
            acc[static_cast<std::size_t>(l)] +=
                weight * rf * detail::linear_fraction_above(j.value, j.gradient, hw, h);
        }
        return;
    }
    const Vec3 chw = 0.5 * hw;
    for (int o = 0; o < 8; ++o) {
        const Vec3 cc = detail::child_center(c, chw, o);
        const Coverage ccov = cov == Coverage::Inside ? Coverage::Inside
                                                       : detail::classify_cell(ctx.region, cc, chw);
        if (ccov == Coverage::Outside) continue;
        if (depth > 0)
            accumulate_cell(ctx, cc, chw, depth - 1, extra, weight / 8.0, ccov, cut, acc);
        else
            accumulate_cell(ctx, cc, chw, 0, extra - 1, weight / 8.0, ccov, cut, acc);
    }
}

std::vector<double> grid_volumes(const PeakFamily& family, const ParamPoint& sigma,
                                 const Region& region, std::span<const double> levels,
                                 const QuadratureSpec& quad) {
    const detail::GridLayout g(region, quad.resolution);
    const std::size_t nl = levels.size();
    const CellContext ctx{family.peaks(), sigma.weights(), region, levels};

    std::vector<int> all(nl);
    for (std::size_t l = 0; l < nl; ++l) all[l] = static_cast<int>(l);

    // One row per x-slab: nl numerators then the region measure.
    std::vector<std::vector<double>> slabs(static_cast<std::size_t>(g.res));
    parallel_for(g.res, [&](int i) {
        std::vector<double> acc(nl + 1, 0.0);
        std::span<double> num(acc.data(), nl);
        for (int jj = 0; jj < g.res; ++jj) {
            for (int k = 0; k < g.res; ++k) {
                const Vec3 c = g.center(i, jj, k);
                const Coverage cov = detail::classify_cell(region, c, g.hw);
                if (cov == Coverage::Outside) continue;
                acc[nl] += cov == Coverage::Inside
                               ? 1.0
                               : detail::region_fraction(region, c, g.hw, quad.refine_depth);
                accumulate_cell(ctx, c, g.hw, quad.refine_depth, kCriticalExtraDepth, 1.0, cov, all,
                                num);
            }
        }
        slabs[static_cast<std::size_t>(i)] = std::move(acc);
    });

    std::vector<double> total(nl + 1, 0.0);
    for (const auto& s : slabs)
        for (std::size_t l = 0; l <= nl; ++l) total[l] += s[l];
    const double measure = total[nl];
    if (!(measure > 0.0)) fail(ErrorCode::NumericalDomain, "grid does not resolve the region");
    std::vector<double> out(nl);
    for (std::size_t l = 0; l < nl; ++l) out[l] = std::min(1.0, total[l] / measure);
    return out;
}

void check_levels(std::span<const double> h) {
    for (double v : h) require(std::isfinite(v) && v >= 0.0, "dose levels must be finite and >= 0");
}

}  // namespace

std::vector<double> volumes_above(const PeakFamily& family, const ParamPoint& sigma,
                                  const Region& region, std::span<const double> h,
                                  const QuadratureSpec& quad) {
    require(sigma.size() == family.dimension(), "parameter point does not match family");
    quad.validate();
    check_levels(h);

    // Dose is strictly positive, so h = 0 covers the whole region exactly.
    std::vector<double> positive;
    std::vector<std::size_t> where;
    for (std::size_t l = 0; l < h.size(); ++l) {
        if (h[l] > 0.0) {
            positive.push_back(h[l]);
            where.push_back(l);
        }
    }
    std::vector<double> out(h.size(), 1.0);
    if (positive.empty()) return out;

    std::vector<double> vols;
    if (quad.kind == QuadratureSpec::Kind::Grid) {
        vols = grid_volumes(family, sigma, region, positive, quad);
    } else {
        std::vector<std::uint64_t> counts(positive.size(), 0);
        detail::for_each_mc_sample(region, quad.samples, quad.seed, [&](const Vec3& x) {
            const double f = eval_unchecked(family.peaks(), sigma.weights(), x);
            for (std::size_t l = 0; l < positive.size(); ++l)
                if (f >= positive[l]) ++counts[l];
        });
        vols.resize(positive.size());
        for (std::size_t l = 0; l < positive.size(); ++l)
            vols[l] = static_cast<double>(counts[l]) / static_cast<double>(quad.samples);
    }
    for (std::size_t i = 0; i < where.size(); ++i) out[where[i]] = vols[i];
    return out;
}

double volume_above(const PeakFamily& family, const ParamPoint& sigma, const Region& region,
                    double h, const QuadratureSpec& quad) {
    const double level[1] = {h};
    return volumes_above(family, sigma, region, level, quad).front();
}

DvhCurve dvh_curve(const PeakFamily& family, const ParamPoint& sigma, const Region& region,
                   std::span<const double> h_grid, const QuadratureSpec& quad) {
    require(!h_grid.empty(), "dose grid is empty");
    for (std::size_t i = 1; i < h_grid.size(); ++i)
        require(h_grid[i] >= h_grid[i - 1], "dose grid must be ascending");
    DvhCurve curve;
    curve.doses.assign(h_grid.begin(), h_grid.end());
    curve.volumes = volumes_above(family, sigma, region, h_grid, quad);
    return curve;
}

McEstimate volume_above_mc(const PeakFamily& family, const ParamPoint& sigma,
                           const Region& region, double h, std::uint64_t samples,
                           std::uint64_t seed) {
    const double p = volume_above(family, sigma, region, h, QuadratureSpec::monte_carlo(samples, seed));
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(samples))};
}

void write_dvh_csv(std::ostream& os, const DvhCurve& curve) {
    os << "dose,volume\n";
    for (std::size_t i = 0; i < curve.doses.size(); ++i)
        os << format_double(curve.doses[i]) << ',' << format_double(curve.volumes[i]) << '\n';
}

// ---------------------------------------------------------------------------
// Morse standard form volumes

namespace {

// Volume of { |x| <= R : x_1^2 - x_2^2 - x_3^2 >= k }. Slices orthogonal to
// x_1 are disks of radius^2 min(max(x^2 - k, 0), R^2 - x^2).
double saddle_one_two(double k, double radius) {
    const double r2 = radius * radius;
    const double a0 = std::sqrt(std::max(k, 0.0));
    const double a1 = std::sqrt(std::clamp(0.5 * (r2 + k), 0.0, r2));
    double half = 0.0;
    if (a1 > a0) half += (a1 * a1 * a1 - a0 * a0 * a0) / 3.0 - k * (a1 - a0);
    const double lo = std::max(a1, a0);
    if (radius > lo) half += r2 * (radius - lo) - (radius * radius * radius - lo * lo * lo) / 3.0;
    return 2.0 * std::numbers::pi * half;
}

}  // namespace

double local_volume_standard(int p, int q, double k, double radius) {
    require(p >= 0 && q >= 0 && p + q == 3, "standard form needs p + q = 3");
    require(std::isfinite(k), "level k must be finite");
    require(std::isfinite(radius) && radius > 0.0, "radius must be positive");
    constexpr double c = 4.0 / 3.0 * std::numbers::pi;
    const double r2 = radius * radius;
    const double ball = c * r2 * radius;
    switch (p) {
        case 0: {
            if (k > 0.0) return 0.0;
            const double m = std::min(-k, r2);
            return c * m * std::sqrt(m);
        }
        case 3: {
            if (k <= 0.0) return ball;
            const double m = std::min(k, r2);
            return ball - c * m * std::sqrt(m);
        }
        case 1: return saddle_one_two(k, radius);
        default: return ball - saddle_one_two(-k, radius);
    }
}

std::optional<double> local_volume_exponent(int p, int q, Side side, double radius) {
    require(p >= 0 && q >= 0 && p + q == 3, "standard form needs p + q = 3");
    require(std::isfinite(radius) && radius > 0.0, "radius must be positive");
    const double r2 = radius * radius;
    const double s = side == Side::Left ? -1.0 : 1.0;
    constexpr int kSamples = 13;
    std::vector<double> mags(kSamples);
    for (int i = 0; i < kSamples; ++i) mags[static_cast<std::size_t>(i)] = 1e-2 * r2 * std::pow(10.0, -0.25 * i);

    const double v0 = local_volume_standard(p, q, 0.0, radius);
    auto increments = [&](double sign) {
        Eigen::VectorXd d(kSamples);
        for (int i = 0; i < kSamples; ++i)
            d[i] = local_volume_standard(p, q, sign * mags[static_cast<std::size_t>(i)], radius) - v0;
        return d;
    };
    // Cubic through the origin in the scaled variable k / max|k|.
    auto design = [&](double sign) {
        Eigen::MatrixXd a(kSamples, 3);
        for (int i = 0; i < kSamples; ++i) {
            const double u = sign * mags[static_cast<std::size_t>(i)] / mags.front();
            a(i, 0) = u;
            a(i, 1) = u * u;
            a(i, 2) = u * u * u;
        }
        return a;
    };

    const Eigen::VectorXd probe = increments(s);
    const double scale = probe.cwiseAbs().maxCoeff();
    const double ball = 4.0 / 3.0 * std::numbers::pi * r2 * radius;
    if (!(scale > 1e-14 * ball)) return std::nullopt;

    // A side on which the increments are a polynomial in k carries no
    // non-smooth term.
    const Eigen::MatrixXd a_probe = design(s);
    const Eigen::VectorXd c_probe = a_probe.colPivHouseholderQr().solve(probe);
    if ((a_probe * c_probe - probe).norm() <= 1e-7 * probe.norm()) return std::nullopt;

    // The other side is smooth; its polynomial continues the background.
    const Eigen::MatrixXd a_opp = design(-s);
    const Eigen::VectorXd c_opp = a_opp.colPivHouseholderQr().solve(increments(-s));
    const Eigen::VectorXd remainder = probe - a_probe * c_opp;

    std::vector<double> lx(kSamples), ly(kSamples);
    for (int i = 0; i < kSamples; ++i) {
        lx[static_cast<std::size_t>(i)] = std::log(mags[static_cast<std::size_t>(i)]);
        ly[static_cast<std::size_t>(i)] = std::log(std::abs(remainder[i]));
    }
    const LinearFit fit = fit_line(lx, ly);
    if (!std::isfinite(fit.slope) || fit.r_squared < 0.98)
        fail(ErrorCode::FitFailed, "local volume remainder does not follow a power law");
    return fit.slope;
}

}  // namespace dvhsmooth
