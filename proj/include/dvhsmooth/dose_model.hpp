#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dvhsmooth/region.hpp"

namespace dvhsmooth {

/// One inverse-quadratic dose peak, weight / (offset + |x - center|^2).
struct Peak {
    Vec3 center = Vec3::Zero();
    double offset = 1.0;
};

/// A dose field family f_sigma(x) = sum_i sigma_i / (c_i + |x - a_i|^2). The
/// peak geometry is fixed; the weights sigma are the treatment parameters.
class PeakFamily {
public:
    explicit PeakFamily(std::vector<Peak> peaks);

    std::size_t dimension() const noexcept { return peaks_.size(); }
    const std::vector<Peak>& peaks() const noexcept { return peaks_; }

private:
    std::vector<Peak> peaks_;
};

/// Nonnegative peak weights with at least one positive entry.
class ParamPoint {
public:
    explicit ParamPoint(std::vector<double> weights);
    ParamPoint(std::initializer_list<double> weights)
        : ParamPoint(std::vector<double>(weights)) {}

    std::size_t size() const noexcept { return weights_.size(); }
    double operator[](std::size_t i) const { return weights_[i]; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    /// Copy with component i replaced; validation applies to the result.
    ParamPoint with(std::size_t i, double value) const;

private:
    std::vector<double> weights_;
};

/// Reference geometries: a single unit peak at the origin, and the same peak
/// plus a second one at (4,0,0) with offset 2.
PeakFamily single_peak_family();
PeakFamily two_peak_family();

double eval(const PeakFamily& family, const ParamPoint& sigma, const Vec3& x);
Vec3 gradient_x(const PeakFamily& family, const ParamPoint& sigma, const Vec3& x);
Mat3 hessian_x(const PeakFamily& family, const ParamPoint& sigma, const Vec3& x);
Eigen::VectorXd grad_sigma(const PeakFamily& family, const ParamPoint& sigma, const Vec3& x);

/// Value, gradient and Hessian in one pass over the peaks.
struct FieldJet {
    double value = 0.0;
    Vec3 gradient = Vec3::Zero();
    Mat3 hessian = Mat3::Zero();
};
FieldJet jet(const PeakFamily& family, const ParamPoint& sigma, const Vec3& x);

// Raw-weight variants skip ParamPoint validation; the quadrature loops call
// these millions of times.
double eval_unchecked(std::span<const Peak> peaks, std::span<const double> weights,
                      const Vec3& x) noexcept;
FieldJet jet_unchecked(std::span<const Peak> peaks, std::span<const double> weights,
                       const Vec3& x) noexcept;

struct MorseSignature {
    int positive = 0;  // p
    int negative = 0;  // q
    friend bool operator==(const MorseSignature&, const MorseSignature&) = default;
};

struct CriticalPoint {
    Vec3 location = Vec3::Zero();
    double value = 0.0;
    MorseSignature signature;
    double hessian_det = 0.0;
};

struct CriticalPointOptions {
    double grad_tol = 1e-10;
    double degeneracy_tol = 1e-8;
    double dedup_radius = 1e-6;
    int max_iter = 100;
};

/// Classifies a point as a critical point: gradient norm below grad_tol and a
/// non-degenerate Hessian. Throws DegenerateCriticalPoint when |det H| is at
/// or below degeneracy_tol * (|H|_F / sqrt 3)^3.
CriticalPoint classify_critical_point(const PeakFamily& family, const ParamPoint& sigma,
                                      const Vec3& x, const CriticalPointOptions& opts = {});

/// Newton on grad f = 0 started from a seed grid of seed_resolution^3 cells.
/// Cells that may contain a gradient zero are subdivided a few levels first,
/// since Newton's basin around a peak is narrower than the seed spacing.
/// Roots outside the box or seeds that fail to converge are dropped. Sorted
/// by descending value.
std::vector<CriticalPoint> find_critical_points(const PeakFamily& family,
                                                const ParamPoint& sigma,
                                                const Region& search_box,
                                                int seed_resolution = 8,
                                                const CriticalPointOptions& opts = {});

/// Pure Newton polish from a nearby guess. Returns nullopt when the iteration
/// does not reach grad_tol within max_iter or wanders more than max_travel.
std::optional<CriticalPoint> refine_critical_point(const PeakFamily& family,
                                                   const ParamPoint& sigma,
                                                   const Vec3& guess,
                                                   double max_travel = 1.0,
                                                   const CriticalPointOptions& opts = {});

struct TrackedCriticalValue {
    double t = 0.0;
    double value = 0.0;
    Vec3 location = Vec3::Zero();
};

using ParamPath = std::function<ParamPoint(double)>;

/// Continuation of critical point number `which` (index into the sorted
/// find_critical_points result at t_grid.front()) along a parameter path.
/// Each grid step warm-starts Newton from the previous location, halving the
/// step when Newton fails; gives up with TrackingLost.
std::vector<TrackedCriticalValue> track_critical_value(const PeakFamily& family,
                                                       const ParamPath& sigma_path,
                                                       std::size_t which,
                                                       std::span<const double> t_grid,
                                                       const Region& search_box = Region::default_box(),
                                                       const CriticalPointOptions& opts = {});

/// Advance a tracked critical point from (t_from, location) to t_to.
CriticalPoint continue_critical_point(const PeakFamily& family, const ParamPath& sigma_path,
                                      double t_from, const Vec3& location, double t_to,
                                      const CriticalPointOptions& opts = {});

}  // namespace dvhsmooth
