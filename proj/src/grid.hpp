#pragma once

// Cell-grid machinery shared by the histogram and EUD quadratures.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

#include "dvhsmooth/histogram.hpp"
#include "dvhsmooth/region.hpp"

namespace dvhsmooth::detail {

enum class Coverage { Inside, Outside, Boundary };

inline Coverage classify_cell(const Region& region, const Vec3& c, const Vec3& hw) {
    if (region.kind() == Region::Kind::Box) {
        const Vec3 lo = region.lower(), hi = region.upper();
        if (((c - hw).array() >= lo.array()).all() && ((c + hw).array() <= hi.array()).all())
            return Coverage::Inside;
        if (((c + hw).array() <= lo.array()).any() || ((c - hw).array() >= hi.array()).any())
            return Coverage::Outside;
        return Coverage::Boundary;
    }
    const Vec3 d = (c - region.center()).cwiseAbs();
    const double r2 = region.radius() * region.radius();
    const double far2 = (d + hw).squaredNorm();
    const double near2 = (d - hw).cwiseMax(0.0).squaredNorm();
    if (far2 <= r2) return Coverage::Inside;
    if (near2 >= r2) return Coverage::Outside;
    return Coverage::Boundary;
}

/// Measure of { u in [0,1]^3 : b . u < t } for b >= 0 componentwise.
inline double cube_volume_below(std::array<double, 3> b, double t) {
    const double s = b[0] + b[1] + b[2];
    if (t <= 0.0) return 0.0;
    if (t >= s) return 1.0;
    // Reflection u -> 1 - u keeps t in the lower half where the formula is
    // best conditioned.
    if (t > 0.5 * s) return 1.0 - cube_volume_below(b, s - t);
    std::sort(b.begin(), b.end(), std::greater<>());
    constexpr double kThin = 1e-4;
    auto pos = [](double v) { return v > 0.0 ? v : 0.0; };
    if (b[1] <= kThin * b[0]) {
        const double tt = t - 0.5 * (b[1] + b[2]);
        return std::clamp(tt / b[0], 0.0, 1.0);
    }
    if (b[2] <= kThin * b[0]) {
        const double tt = t - 0.5 * b[2];
        const double sum = pos(tt) * pos(tt) - pos(tt - b[0]) * pos(tt - b[0]) -
                           pos(tt - b[1]) * pos(tt - b[1]) +
                           pos(tt - b[0] - b[1]) * pos(tt - b[0] - b[1]);
        return std::clamp(sum / (2.0 * b[0] * b[1]), 0.0, 1.0);
    }
    double sum = 0.0;
    for (int v = 0; v < 8; ++v) {
        double shift = 0.0;
        int bits = 0;
        for (int i = 0; i < 3; ++i) {
            if (v & (1 << i)) {
                shift += b[i];
                ++bits;
            }
        }
        const double r = pos(t - shift);
        sum += (bits % 2 ? -1.0 : 1.0) * r * r * r;
    }
    return std::clamp(sum / (6.0 * b[0] * b[1] * b[2]), 0.0, 1.0);
}

/// Fraction of the box (center c, half-widths hw) on which the linear model
/// value + g . (x - c) is >= h.
inline double linear_fraction_above(double value, const Vec3& g, const Vec3& hw, double h) {
    std::array<double, 3> b{};
    double half_sum = 0.0;
    for (int i = 0; i < 3; ++i) {
        b[static_cast<std::size_t>(i)] = 2.0 * std::abs(g[i]) * hw[i];
        half_sum += 0.5 * b[static_cast<std::size_t>(i)];
    }
    const double t = h - value + half_sum;
    return 1.0 - cube_volume_below(b, t);
}

/// Fraction of the box that lies inside the region, refined `depth` levels.
inline double region_fraction(const Region& region, const Vec3& c, const Vec3& hw, int depth) {
    switch (classify_cell(region, c, hw)) {
        case Coverage::Inside: return 1.0;
        case Coverage::Outside: return 0.0;
        case Coverage::Boundary: break;
    }
    if (depth <= 0) {
        if (region.kind() == Region::Kind::Box) {
            // Axis-aligned faces: the overlap is a product of 1-D overlaps.
            double frac = 1.0;
            const Vec3 lo = region.lower(), hi = region.upper();
            for (int i = 0; i < 3; ++i) {
                const double a = std::max(lo[i], c[i] - hw[i]);
                const double z = std::min(hi[i], c[i] + hw[i]);
                frac *= std::max(0.0, z - a) / (2.0 * hw[i]);
            }
            return frac;
        }
        const Vec3 d = c - region.center();
        const double dist = d.norm();
        if (dist == 0.0) return 1.0;
        // The signed distance r - |x - center| has gradient -d/|d|.
        return linear_fraction_above(region.radius() - dist, -d / dist, hw, 0.0);
    }
    const Vec3 chw = 0.5 * hw;
    double sum = 0.0;
    for (int o = 0; o < 8; ++o) {
        const Vec3 cc(c[0] + ((o & 1) ? chw[0] : -chw[0]), c[1] + ((o & 2) ? chw[1] : -chw[1]),
                      c[2] + ((o & 4) ? chw[2] : -chw[2]));
        sum += region_fraction(region, cc, chw, depth - 1);
    }
    return sum / 8.0;
}

inline Vec3 child_center(const Vec3& c, const Vec3& chw, int o) {
    return Vec3(c[0] + ((o & 1) ? chw[0] : -chw[0]), c[1] + ((o & 2) ? chw[1] : -chw[1]),
                c[2] + ((o & 4) ? chw[2] : -chw[2]));
}

struct GridLayout {
    Vec3 lo;
    Vec3 cell;
    Vec3 hw;
    int res = 0;

    GridLayout(const Region& region, int resolution)
        : lo(region.lower()),
          cell((region.upper() - region.lower()) / resolution),
          hw(0.5 * cell),
          res(resolution) {}

    Vec3 center(int i, int j, int k) const {
        return lo + Vec3(i + 0.5, j + 0.5, k + 0.5).cwiseProduct(cell);
    }
};

/// Visits (node, weight) pairs of the grid quadrature in slab i. Interior
/// cells give their midpoint with weight 1; boundary cells of a ball are
/// replaced by their refined leaves weighted by 8^-depth times the leaf's
/// inside fraction.
template <class Fn>
void for_each_node_in_slab(const Region& region, const GridLayout& g, int depth, int i, Fn&& fn) {
    for (int j = 0; j < g.res; ++j) {
        for (int k = 0; k < g.res; ++k) {
            const Vec3 c = g.center(i, j, k);
            const Coverage cov = classify_cell(region, c, g.hw);
            if (cov == Coverage::Inside) {
                fn(c, 1.0);
            } else if (cov == Coverage::Boundary) {
                auto visit = [&](auto&& self, const Vec3& cc, const Vec3& hw, int d,
                                 double w) -> void {
                    const Coverage cv = classify_cell(region, cc, hw);
                    if (cv == Coverage::Outside) return;
                    if (cv == Coverage::Inside) {
                        fn(cc, w);
                        return;
                    }
                    if (d == 0) {
                        const double frac = region_fraction(region, cc, hw, 0);
                        if (frac > 0.0) fn(cc, w * frac);
                        return;
                    }
                    const Vec3 chw = 0.5 * hw;
                    for (int o = 0; o < 8; ++o) self(self, child_center(cc, chw, o), chw, d - 1, w / 8.0);
                };
                visit(visit, c, g.hw, depth, 1.0);
            }
        }
    }
}

/// Uniform points in the region: mt19937_64 draws in the bounding box,
/// rejected outside a ball.
template <class Fn>
void for_each_mc_sample(const Region& region, std::uint64_t samples, std::uint64_t seed, Fn&& fn) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Vec3 lo = region.lower();
    const Vec3 span = region.upper() - lo;
    std::uint64_t accepted = 0;
    while (accepted < samples) {
        Vec3 x;
        for (int d = 0; d < 3; ++d) x[d] = lo[d] + unit(rng) * span[d];
        if (!region.contains(x)) continue;
        fn(x);
        ++accepted;
    }
}

}  // namespace dvhsmooth::detail
