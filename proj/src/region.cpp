#include "dvhsmooth/region.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dvhsmooth/error.hpp"

namespace dvhsmooth {

Region Region::box(const Vec3& lo, const Vec3& hi) {
    require(lo.allFinite() && hi.allFinite(), "box corners must be finite");
    require((hi.array() > lo.array()).all(), "box requires hi > lo componentwise");
    Region r;
    r.kind_ = Kind::Box;
    r.lo_ = lo;
    r.hi_ = hi;
    r.center_ = 0.5 * (lo + hi);
    return r;
}

Region Region::ball(const Vec3& center, double radius) {
    require(center.allFinite(), "ball center must be finite");
    require(std::isfinite(radius) && radius > 0.0, "ball radius must be positive");
    Region r;
    r.kind_ = Kind::Ball;
    r.center_ = center;
    r.radius_ = radius;
    r.lo_ = center.array() - radius;
    r.hi_ = center.array() + radius;
    return r;
}

Region Region::default_box() {
    return box(Vec3::Constant(-8.0), Vec3::Constant(8.0));
}

double Region::exact_volume() const noexcept {
    if (kind_ == Kind::Ball)
        return 4.0 / 3.0 * std::numbers::pi * radius_ * radius_ * radius_;
    return (hi_ - lo_).prod();
}

Vec3 Region::lower() const noexcept { return lo_; }
Vec3 Region::upper() const noexcept { return hi_; }

bool Region::contains(const Vec3& x) const noexcept {
    if (kind_ == Kind::Ball) return (x - center_).squaredNorm() <= radius_ * radius_;
    return (x.array() >= lo_.array()).all() && (x.array() <= hi_.array()).all();
}

double Region::signed_distance(const Vec3& x) const noexcept {
    if (kind_ == Kind::Ball) return radius_ - (x - center_).norm();
    const Vec3 to_lo = x - lo_;
    const Vec3 to_hi = hi_ - x;
    return std::min(to_lo.minCoeff(), to_hi.minCoeff());
}

}  // namespace dvhsmooth
