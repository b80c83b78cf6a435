#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "dvhsmooth/common.hpp"
#include "dvhsmooth/dose_model.hpp"
#include "dvhsmooth/histogram.hpp"
#include "dvhsmooth/region.hpp"

namespace dvhsmooth {

/// One-sided quadratic penalty: 0 for x < 0, x^2 for x >= 0.
double penalty(double x) noexcept;
double penalty_derivative(double x) noexcept;
/// Second derivative; at the seam x = 0 the side picks the limit (0 or 2).
double penalty_second_derivative(double x, Side side = Side::Right) noexcept;

struct Constraint {
    enum class Kind { DvMin, DvMax, EudMin, EudMax };

    Kind kind = Kind::DvMax;
    double dose_level = 0.0;       // d_min / d_max
    double volume_fraction = 0.0;  // v_min / v_max, dv kinds only
    double alpha = 1.0;            // EUD kinds only
    double weight = 1.0;

    bool is_eud() const noexcept { return kind == Kind::EudMin || kind == Kind::EudMax; }
    void validate() const;
};

std::string_view to_string(Constraint::Kind kind) noexcept;
Constraint::Kind constraint_kind_from_string(std::string_view name);

struct ConstraintTerm {
    Region region;
    Constraint constraint;
};

struct ObjectiveSpec {
    PeakFamily family;
    std::vector<ConstraintTerm> terms;
    QuadratureSpec quad;

    void validate() const;
    bool eud_only() const noexcept;
};

/// Signed penalty arguments, one per term:
///   dv-min  v_min - V(d_min)      dv-max  V(d_max) - v_max
///   eud-min d_min - E_alpha       eud-max E_alpha - d_max
std::vector<double> constraint_arguments(const ObjectiveSpec& spec, const ParamPoint& sigma);

/// sum_k weight_k * penalty(argument_k).
double objective_value(const ObjectiveSpec& spec, const ParamPoint& sigma);

/// Central differences with absolute step per weight.
Eigen::VectorXd objective_grad_fd(const ObjectiveSpec& spec, const ParamPoint& sigma, double step);

/// Chain rule through eud_grad_sigma. Only for specs without dv terms.
Eigen::VectorXd objective_grad_eud(const ObjectiveSpec& spec, const ParamPoint& sigma);

/// A scalar objective of one parameter with exact derivatives. At a flagged
/// point the second derivative may differ between sides (or be infinite on
/// one of them); `second` takes the side to use there and ignores it
/// elsewhere.
struct Scalar1DObjective {
    std::string name;
    std::function<double(double)> value;
    std::function<double(double)> first;
    std::function<double(double, Side)> second;
    std::vector<double> flagged;
    double domain_lower = -std::numeric_limits<double>::infinity();  // exclusive
    double minimizer = std::numeric_limits<double>::quiet_NaN();     // when known

    bool in_domain(double s) const noexcept { return s > domain_lower && std::isfinite(s); }
};

/// U(s) = 15 / (10 + s), the smooth volume term of the 1-D examples.
double example_u(double s);

/// F1(s) = (U(s) - 1)^2, minimum 0 at s = 5, defined for s > -10.
Scalar1DObjective make_f1();

/// F2(s) = (V(s) - 1)^2 with V = U + alpha_loc (-s)^(3/2) for s < 0 and
/// V = U for s >= 0. Flagged at 0, where the left second derivative is +inf.
Scalar1DObjective make_f2(double alpha_loc = 0.3);

/// (s - center)^2.
Scalar1DObjective make_quadratic(double center);

/// slope * s + (4/3)(-s)^(3/2) for s < 0 and slope * s for s >= 0, so that
/// F'' = (-s)^(-1/2) exactly on the left. Flagged at 0.
Scalar1DObjective make_root_kink(double slope);

Scalar1DObjective make_scalar_objective(std::string_view name, double alpha_loc = 0.3);

}  // namespace dvhsmooth
