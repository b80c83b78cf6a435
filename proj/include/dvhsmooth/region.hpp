#pragma once

#include <Eigen/Core>

namespace dvhsmooth {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Integration / search domain: an axis-aligned box or a ball.
class Region {
public:
    enum class Kind { Box, Ball };

    static Region box(const Vec3& lo, const Vec3& hi);
    static Region ball(const Vec3& center, double radius);
    /// The [-8,8]^3 box used whenever a config does not name a region.
    static Region default_box();

    Kind kind() const noexcept { return kind_; }
    double exact_volume() const noexcept;

    // Box corners, or the ball's bounding box.
    Vec3 lower() const noexcept;
    Vec3 upper() const noexcept;

    const Vec3& center() const noexcept { return center_; }
    double radius() const noexcept { return radius_; }

    bool contains(const Vec3& x) const noexcept;

    /// Positive inside, negative outside. For the ball this is the signed
    /// distance to the sphere; for the box it is the distance to the nearest
    /// face (negative outside).
    double signed_distance(const Vec3& x) const noexcept;

private:
    Region() = default;

    Kind kind_ = Kind::Box;
    Vec3 lo_ = Vec3::Zero();
    Vec3 hi_ = Vec3::Zero();
    Vec3 center_ = Vec3::Zero();
    double radius_ = 0.0;
};

}  // namespace dvhsmooth
