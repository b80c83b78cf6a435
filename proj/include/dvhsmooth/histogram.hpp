#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "dvhsmooth/common.hpp"
#include "dvhsmooth/dose_model.hpp"
#include "dvhsmooth/region.hpp"

namespace dvhsmooth {

/// How region integrals are evaluated.
///
/// Grid: midpoint cells over the region's bounding box, `resolution` per
/// axis. Cells that a level set (or the ball boundary) may cut are split as
/// an octree up to `refine_depth` times; leaf cells use the exact volume of
/// the cell on the upper side of the linearised level set. Every cell
/// contribution is non-increasing in the dose level, so volumes computed on
/// one grid are exactly monotone.
///
/// MonteCarlo: `samples` uniform points in the region from a seeded
/// mt19937_64, reused for every dose level.
struct QuadratureSpec {
    enum class Kind { Grid, MonteCarlo };

    Kind kind = Kind::Grid;
    int resolution = 96;
    int refine_depth = 3;
    std::uint64_t samples = 0;
    std::uint64_t seed = 0;

    static QuadratureSpec grid(int resolution = 96, int refine_depth = 3);
    static QuadratureSpec monte_carlo(std::uint64_t samples, std::uint64_t seed);

    void validate() const;
};

struct DvhCurve {
    std::vector<double> doses;    // ascending
    std::vector<double> volumes;  // relative, non-increasing
};

/// Relative volume of `region` where f_sigma >= h.
double volume_above(const PeakFamily& family, const ParamPoint& sigma, const Region& region,
                    double h, const QuadratureSpec& quad);

/// volume_above for several dose levels sharing one pass over the grid (or one
/// sample set). Levels may be in any order.
std::vector<double> volumes_above(const PeakFamily& family, const ParamPoint& sigma,
                                  const Region& region, std::span<const double> h,
                                  const QuadratureSpec& quad);

DvhCurve dvh_curve(const PeakFamily& family, const ParamPoint& sigma, const Region& region,
                   std::span<const double> h_grid, const QuadratureSpec& quad);

struct McEstimate {
    double value = 0.0;
    double standard_error = 0.0;
};

/// Monte-Carlo volume with its binomial standard error sqrt(p(1-p)/N).
McEstimate volume_above_mc(const PeakFamily& family, const ParamPoint& sigma,
                           const Region& region, double h, std::uint64_t samples,
                           std::uint64_t seed);

/// Writes "dose,volume" rows (17 significant digits). Comment lines, if any,
/// are the caller's business.
void write_dvh_csv(std::ostream& os, const DvhCurve& curve);

/// Volume of { x in ball(0, radius) : sum_{i<p} x_i^2 - sum_{i>=p} x_i^2 >= k }
/// for p + q = 3. Closed form via a 1-D integral of disk areas.
double local_volume_standard(int p, int q, double k, double radius);

/// Exponent e in |V(k) - V_smooth(k)| ~ c |k|^e as k -> 0 from `side`, where
/// V_smooth is a quadratic fitted on the opposite side (identically zero for
/// extrema). Returns nullopt when the one-sided remainder vanishes. Throws
/// FitFailed when the log-log fit has r^2 below 0.98.
std::optional<double> local_volume_exponent(int p, int q, Side side, double radius);

}  // namespace dvhsmooth
