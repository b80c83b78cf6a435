#include "dvhsmooth/objective.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "dvhsmooth/error.hpp"
#include "dvhsmooth/eud.hpp"

namespace dvhsmooth {

double penalty(double x) noexcept { return x < 0.0 ? 0.0 : x * x; }

double penalty_derivative(double x) noexcept { return x < 0.0 ? 0.0 : 2.0 * x; }

double penalty_second_derivative(double x, Side side) noexcept {
    if (x == 0.0) return side == Side::Left ? 0.0 : 2.0;
    return x < 0.0 ? 0.0 : 2.0;
}

void Constraint::validate() const {
    require(std::isfinite(weight) && weight > 0.0, "constraint weight must be positive");
    require(std::isfinite(dose_level), "constraint dose level must be finite");
    if (is_eud()) {
        require(std::isfinite(alpha) && alpha != 0.0, "EUD constraint needs a nonzero alpha");
    } else {
        require(dose_level >= 0.0, "dose-volume constraint needs a nonnegative dose level");
        require(volume_fraction >= 0.0 && volume_fraction <= 1.0,
                "volume fraction must lie in [0, 1]");
    }
}

std::string_view to_string(Constraint::Kind kind) noexcept {
    switch (kind) {
        case Constraint::Kind::DvMin: return "dv-min";
        case Constraint::Kind::DvMax: return "dv-max";
        case Constraint::Kind::EudMin: return "eud-min";
        case Constraint::Kind::EudMax: return "eud-max";
    }
    return "?";
}

Constraint::Kind constraint_kind_from_string(std::string_view name) {
    for (auto k : {Constraint::Kind::DvMin, Constraint::Kind::DvMax, Constraint::Kind::EudMin,
                   Constraint::Kind::EudMax})
        if (to_string(k) == name) return k;
    fail(ErrorCode::InvalidArgument, "unknown constraint kind '" + std::string(name) + "'");
}

void ObjectiveSpec::validate() const {
    require(!terms.empty(), "objective needs at least one constraint");
    for (const auto& t : terms) t.constraint.validate();
    quad.validate();
}

bool ObjectiveSpec::eud_only() const noexcept {
    for (const auto& t : terms)
        if (!t.constraint.is_eud()) return false;
    return true;
}

std::vector<double> constraint_arguments(const ObjectiveSpec& spec, const ParamPoint& sigma) {
    spec.validate();
    std::vector<double> args;
    args.reserve(spec.terms.size());
    for (const auto& t : spec.terms) {
        const Constraint& c = t.constraint;
        switch (c.kind) {
            case Constraint::Kind::DvMin:
                args.push_back(c.volume_fraction -
                               volume_above(spec.family, sigma, t.region, c.dose_level, spec.quad));
                break;
            case Constraint::Kind::DvMax:
                args.push_back(volume_above(spec.family, sigma, t.region, c.dose_level, spec.quad) -
                               c.volume_fraction);
                break;
            case Constraint::Kind::EudMin:
                args.push_back(c.dose_level - eud(spec.family, sigma, {c.alpha, t.region, spec.quad}));
                break;
            case Constraint::Kind::EudMax:
                args.push_back(eud(spec.family, sigma, {c.alpha, t.region, spec.quad}) - c.dose_level);
                break;
        }
    }
    return args;
}

double objective_value(const ObjectiveSpec& spec, const ParamPoint& sigma) {
    const auto args = constraint_arguments(spec, sigma);
    double total = 0.0;
    for (std::size_t k = 0; k < args.size(); ++k) total += spec.terms[k].constraint.weight * penalty(args[k]);
    return total;
}

Eigen::VectorXd objective_grad_fd(const ObjectiveSpec& spec, const ParamPoint& sigma, double step) {
    require(std::isfinite(step) && step > 0.0, "finite-difference step must be positive");
    const std::size_t m = sigma.size();
    Eigen::VectorXd g(static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < m; ++j) {
        require(sigma[j] > step, "finite-difference step must be smaller than every weight");
        const double plus = objective_value(spec, sigma.with(j, sigma[j] + step));
        const double minus = objective_value(spec, sigma.with(j, sigma[j] - step));
        g[static_cast<Eigen::Index>(j)] = (plus - minus) / (2.0 * step);
    }
    return g;
}

Eigen::VectorXd objective_grad_eud(const ObjectiveSpec& spec, const ParamPoint& sigma) {
    spec.validate();
    require(spec.eud_only(), "analytic objective gradient needs EUD-only constraints");
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sigma.size()));
    for (const auto& t : spec.terms) {
        const Constraint& c = t.constraint;
        const EudValueGrad e = eud_with_grad(spec.family, sigma, {c.alpha, t.region, spec.quad});
        const bool is_min = c.kind == Constraint::Kind::EudMin;
        const double arg = is_min ? c.dose_level - e.value : e.value - c.dose_level;
        const double dg = c.weight * penalty_derivative(arg);
        g += (is_min ? -dg : dg) * e.grad;
    }
    return g;
}

// ---------------------------------------------------------------------------
// Scalar examples

namespace {

void check_u_domain(double s) {
    if (!(s > -10.0)) {
        std::ostringstream os;
        os << "U(s) = 15/(10+s) is undefined for s = " << s << " (need s > -10)";
        fail(ErrorCode::NumericalDomain, os.str());
    }
}

double u1(double s) { return -15.0 / ((10.0 + s) * (10.0 + s)); }
double u2(double s) { return 30.0 / ((10.0 + s) * (10.0 + s) * (10.0 + s)); }

}  // namespace

double example_u(double s) {
    check_u_domain(s);
    return 15.0 / (10.0 + s);
}

Scalar1DObjective make_f1() {
    Scalar1DObjective f;
    f.name = "f1";
    f.domain_lower = -10.0;
    f.minimizer = 5.0;
    f.value = [](double s) {
        const double d = example_u(s) - 1.0;
        return d * d;
    };
    f.first = [](double s) { return 2.0 * (example_u(s) - 1.0) * u1(s); };
    f.second = [](double s, Side) {
        const double v1 = u1(s);
        return 2.0 * v1 * v1 + 2.0 * (example_u(s) - 1.0) * u2(s);
    };
    return f;
}

Scalar1DObjective make_f2(double alpha_loc) {
    require(std::isfinite(alpha_loc) && alpha_loc > 0.0, "alpha_loc must be positive");
    const Scalar1DObjective f1 = make_f1();
    Scalar1DObjective f;
    f.name = "f2";
    f.domain_lower = -10.0;
    f.minimizer = 5.0;
    f.flagged = {0.0};
    const double a = alpha_loc;
    f.value = [a, f1](double s) {
        if (s >= 0.0) return f1.value(s);
        const double d = example_u(s) + a * std::pow(-s, 1.5) - 1.0;
        return d * d;
    };
    f.first = [a, f1](double s) {
        if (s >= 0.0) return f1.first(s);
        const double x = -s;
        const double v = example_u(s) + a * x * std::sqrt(x);
        const double v1 = u1(s) - 1.5 * a * std::sqrt(x);
        return 2.0 * (v - 1.0) * v1;
    };
    f.second = [a, f1](double s, Side side) {
        if (s > 0.0 || (s == 0.0 && side == Side::Right)) return f1.second(s, side);
        // Left limit at 0: V - 1 = 1/2 > 0 times V'' -> +inf.
        if (s == 0.0) return std::numeric_limits<double>::infinity();
        const double x = -s;
        const double v = example_u(s) + a * x * std::sqrt(x);
        const double v1 = u1(s) - 1.5 * a * std::sqrt(x);
        const double v2 = u2(s) + 0.75 * a / std::sqrt(x);
        return 2.0 * v1 * v1 + 2.0 * (v - 1.0) * v2;
    };
    return f;
}

Scalar1DObjective make_quadratic(double center) {
    require(std::isfinite(center), "quadratic center must be finite");
    Scalar1DObjective f;
    f.name = "quadratic";
    f.minimizer = center;
    f.value = [center](double s) { return (s - center) * (s - center); };
    f.first = [center](double s) { return 2.0 * (s - center); };
    f.second = [](double, Side) { return 2.0; };
    return f;
}

Scalar1DObjective make_root_kink(double slope) {
    require(std::isfinite(slope), "slope must be finite");
    Scalar1DObjective f;
    f.name = "root-kink";
    f.flagged = {0.0};
    f.value = [slope](double s) {
        return s >= 0.0 ? slope * s : slope * s + 4.0 / 3.0 * std::pow(-s, 1.5);
    };
    f.first = [slope](double s) { return s >= 0.0 ? slope : slope - 2.0 * std::sqrt(-s); };
    f.second = [](double s, Side side) {
        if (s > 0.0 || (s == 0.0 && side == Side::Right)) return 0.0;
        if (s == 0.0) return std::numeric_limits<double>::infinity();
        return 1.0 / std::sqrt(-s);
    };
    return f;
}

Scalar1DObjective make_scalar_objective(std::string_view name, double alpha_loc) {
    if (name == "f1") return make_f1();
    if (name == "f2") return make_f2(alpha_loc);
    fail(ErrorCode::InvalidArgument, "unknown scalar objective '" + std::string(name) + "'");
}

}  // namespace dvhsmooth
