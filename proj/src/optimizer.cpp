#include "dvhsmooth/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include <Eigen/Dense>

#include "dvhsmooth/error.hpp"

namespace dvhsmooth {

std::string_view to_string(Termination t) noexcept {
    switch (t) {
        case Termination::Converged: return "converged";
        case Termination::MaxIter: return "max-iter";
        case Termination::Stalled: return "stalled";
        case Termination::SpuriousFixedPoint: return "spurious-fixed-point";
        case Termination::SeamCrossed: return "seam-crossed";
    }
    return "?";
}

std::string_view to_string(ConvergenceRate r) noexcept {
    switch (r) {
        case ConvergenceRate::Quadratic: return "quadratic";
        case ConvergenceRate::Superlinear: return "superlinear";
        case ConvergenceRate::Linear: return "linear";
        case ConvergenceRate::Sublinear: return "sublinear";
        case ConvergenceRate::Stalled: return "stalled";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// 1-D Newton

double newton1d_step(const Scalar1DObjective& obj, double sigma, Side convention) {
    require(obj.in_domain(sigma), "Newton step requested outside the objective's domain");
    const double d1 = obj.first(sigma);
    const double d2 = obj.second(sigma, convention);
    if (!std::isfinite(d1) || std::isnan(d2)) {
        std::ostringstream os;
        os << "non-finite derivative at sigma = " << sigma;
        fail(ErrorCode::NumericalDomain, os.str());
    }
    if (std::isinf(d2)) return sigma;
    if (std::abs(d2) < 1e-14 * (1.0 + std::abs(d1))) {
        std::ostringstream os;
        os << "second derivative " << d2 << " too small for a Newton step at sigma = " << sigma;
        fail(ErrorCode::IllConditionedStep, os.str());
    }
    return sigma - d1 / d2;
}

namespace {

bool crosses(double a, double b, double p) { return (a < p && b >= p) || (a > p && b <= p); }

bool is_flagged(const Scalar1DObjective& obj, double s) {
    return std::find(obj.flagged.begin(), obj.flagged.end(), s) != obj.flagged.end();
}

}  // namespace

Trace newton1d_run(const Scalar1DObjective& obj, double sigma0, const NewtonOptions& opts) {
    require(opts.tol > 0.0 && opts.max_iter >= 1, "Newton options need tol > 0 and max_iter >= 1");
    require(obj.in_domain(sigma0), "starting point outside the objective's domain");
    Trace t;
    double s = sigma0;
    bool crossed = false;
    for (int k = 0;; ++k) {
        const double d1 = obj.first(s);
        t.iterates.push_back(Eigen::VectorXd::Constant(1, s));
        t.values.push_back(obj.value(s));
        t.derivative_norms.push_back(std::abs(d1));
        if (std::abs(d1) < opts.tol) {
            t.termination = Termination::Converged;
            break;
        }
        if (crossed && opts.stop_on_seam) {
            t.termination = Termination::SeamCrossed;
            break;
        }
        if (k == opts.max_iter) {
            t.termination = Termination::MaxIter;
            break;
        }
        double next = 0.0;
        const double d2 = obj.second(s, opts.convention);
        try {
            if (opts.safeguard && std::isfinite(d2) && d2 <= 0.0)
                next = s - std::copysign(1.0 + std::abs(s), d1);
            else
                next = newton1d_step(obj, s, opts.convention);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::IllConditionedStep) throw;
            t.termination = Termination::Stalled;
            t.message = e.what();
            break;
        }
        if (opts.safeguard && next != s) {
            const double f0 = t.values.back();
            int halvings = 0;
            while (!obj.in_domain(next) || !(obj.value(next) <= f0 + 1e-14 * std::abs(f0))) {
                if (++halvings > 60) break;
                next = s + 0.5 * (next - s);
            }
            if (halvings > 60) {
                t.termination = Termination::Stalled;
                t.message = "no decrease along the Newton direction";
                break;
            }
        }
        if (!obj.in_domain(next)) {
            std::ostringstream os;
            os << "Newton step from " << s << " leaves the domain (" << next << ")";
            t.termination = Termination::Stalled;
            t.message = os.str();
            break;
        }
        if (next == s) {
            t.termination = is_flagged(obj, s) ? Termination::SpuriousFixedPoint : Termination::Stalled;
            if (t.termination == Termination::SpuriousFixedPoint) {
                std::ostringstream os;
                os << "zero Newton step at flagged point " << s << " with |F'| = " << std::abs(d1);
                t.message = os.str();
            }
            break;
        }
        for (double p : obj.flagged)
            if (crosses(s, next, p)) {
                t.seam_crossings.push_back(static_cast<std::size_t>(k));
                crossed = true;
            }
        t.step_sizes.push_back(std::abs(next - s));
        s = next;
    }
    return t;
}

// ---------------------------------------------------------------------------
// BFGS

void QuasiNewtonOptions::validate() const {
    require(grad_tol > 0.0, "grad_tol must be positive");
    require(max_iter >= 1, "max_iter must be at least 1");
    require(fd_step > 0.0, "fd_step must be positive");
    require(wolfe_c1 > 0.0 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0,
            "Wolfe constants need 0 < c1 < c2 < 1");
    require(curvature_skip_tol >= 0.0, "curvature_skip_tol must be nonnegative");
    require(max_line_search >= 1, "max_line_search must be at least 1");
    require(lambda_band >= 0.0, "lambda_band must be nonnegative");
}

namespace {

struct LineSearchResult {
    bool ok = false;
    double alpha = 0.0;
    double value = 0.0;
    Eigen::VectorXd gradient;
    int evals = 0;
};

// Strong Wolfe search (bracketing then zoom) along p from x, with
// f0 = f(x) and d0 = g(x).p < 0. Non-finite trial values count as too long.
LineSearchResult wolfe_search(const Problem& pb, const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                              double f0, double d0, const QuasiNewtonOptions& o) {
    LineSearchResult r;
    auto phi = [&](double a) {
        ++r.evals;
        return pb.value(x + a * p);
    };
    auto accept = [&](double a, double fa, Eigen::VectorXd g) {
        r.ok = true;
        r.alpha = a;
        r.value = fa;
        r.gradient = std::move(g);
    };
    auto sufficient = [&](double a, double fa) {
        return std::isfinite(fa) && fa <= f0 + o.wolfe_c1 * a * d0;
    };

    struct End {
        double a, f, d;  // d is NaN when the slope is unknown
    };
    auto zoom = [&](End lo, End hi) {
        while (r.evals < o.max_line_search) {
            const double width = hi.a - lo.a;
            double a = 0.5 * (lo.a + hi.a);
            if (std::isfinite(hi.f) && std::isfinite(lo.d)) {
                // Minimiser of the quadratic through (lo.f, lo.d) and hi.f.
                const double denom = 2.0 * (hi.f - lo.f - lo.d * width);
                if (denom > 0.0) a = lo.a - lo.d * width * width / denom;
            }
            const double lo_edge = std::min(lo.a, hi.a), hi_edge = std::max(lo.a, hi.a);
            const double margin = 0.1 * (hi_edge - lo_edge);
            a = std::clamp(a, lo_edge + margin, hi_edge - margin);
            if (!(hi_edge - lo_edge > 1e-14 * std::max(1.0, hi_edge))) return;

            const double fa = phi(a);
            if (!sufficient(a, fa) || fa >= lo.f) {
                hi = {a, fa, std::numeric_limits<double>::quiet_NaN()};
                continue;
            }
            Eigen::VectorXd g = pb.gradient(x + a * p);
            const double da = g.dot(p);
            if (std::abs(da) <= -o.wolfe_c2 * d0) {
                accept(a, fa, std::move(g));
                return;
            }
            if (da * (hi.a - lo.a) >= 0.0) hi = lo;
            lo = {a, fa, da};
        }
    };

    End prev{0.0, f0, d0};
    double a = 1.0;
    for (int i = 0; r.evals < o.max_line_search; ++i) {
        const double fa = phi(a);
        if (!sufficient(a, fa) || (i > 0 && fa >= prev.f)) {
            zoom(prev, {a, fa, std::numeric_limits<double>::quiet_NaN()});
            return r;
        }
        Eigen::VectorXd g = pb.gradient(x + a * p);
        const double da = g.dot(p);
        if (std::abs(da) <= -o.wolfe_c2 * d0) {
            accept(a, fa, std::move(g));
            return r;
        }
        if (da >= 0.0) {
            zoom({a, fa, da}, prev);
            return r;
        }
        prev = {a, fa, da};
        a *= 2.0;
    }
    return r;
}

void check_finite(double f, const Eigen::VectorXd& g, const Eigen::VectorXd& x) {
    if (std::isfinite(f) && g.allFinite()) return;
    std::ostringstream os;
    os << "non-finite objective or gradient at sigma = (" << x.transpose() << ")";
    fail(ErrorCode::NumericalDomain, os.str());
}

bool seam_changed(const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k)
        if ((a[k] > 0.0) != (b[k] > 0.0)) return true;
    return false;
}

}  // namespace

Trace bfgs_run(const Problem& problem, const Eigen::VectorXd& sigma0, const QuasiNewtonOptions& opts) {
    opts.validate();
    require(static_cast<bool>(problem.value) && static_cast<bool>(problem.gradient),
            "BFGS problem needs value and gradient");
    require(sigma0.size() > 0, "BFGS needs a non-empty starting point");
    const Eigen::Index m = sigma0.size();

    Trace t;
    Eigen::VectorXd x = sigma0;
    double f = problem.value(x);
    Eigen::VectorXd g = problem.gradient(x);
    check_finite(f, g, x);
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(m, m) / std::max(g.norm(), 1e-300);
    std::vector<double> seams = problem.seams ? problem.seams(x) : std::vector<double>{};
    bool crossed = false;

    auto record = [&] {
        t.iterates.push_back(x);
        t.values.push_back(f);
        t.derivative_norms.push_back(g.norm());
        if (problem.lambda_distance) {
            const double d = problem.lambda_distance(x);
            t.lambda_distances.push_back(d);
            if (d < opts.lambda_band) t.slowdown_flag = true;
        }
    };
    record();

    for (int k = 0;; ++k) {
        if (g.norm() < opts.grad_tol) {
            t.termination = Termination::Converged;
            break;
        }
        if (crossed && opts.stop_on_seam) {
            t.termination = Termination::SeamCrossed;
            break;
        }
        if (k == opts.max_iter) {
            t.termination = Termination::MaxIter;
            break;
        }
        Eigen::VectorXd p = -h * g;
        double d0 = g.dot(p);
        if (!(d0 < 0.0)) {
            h = Eigen::MatrixXd::Identity(m, m) / g.norm();
            p = -h * g;
            d0 = g.dot(p);
        }
        LineSearchResult ls = wolfe_search(problem, x, p, f, d0, opts);
        t.line_search_evals.push_back(ls.evals);
        if (!ls.ok) {
            t.termination = Termination::Stalled;
            t.message = "line search found no strong Wolfe point";
            break;
        }
        const Eigen::VectorXd s = ls.alpha * p;
        const Eigen::VectorXd y = ls.gradient - g;
        x += s;
        f = ls.value;
        g = ls.gradient;
        check_finite(f, g, x);
        t.step_sizes.push_back(s.norm());

        const double ys = y.dot(s);
        if (ys > opts.curvature_skip_tol * y.norm() * s.norm() && ys > 0.0) {
            const double rho = 1.0 / ys;
            const Eigen::MatrixXd v = Eigen::MatrixXd::Identity(m, m) - rho * s * y.transpose();
            h = v * h * v.transpose() + rho * s * s.transpose();
        } else {
            ++t.curvature_skips;
        }

        if (problem.seams) {
            std::vector<double> next = problem.seams(x);
            if (seam_changed(seams, next)) {
                t.seam_crossings.push_back(static_cast<std::size_t>(k));
                crossed = true;
            }
            seams = std::move(next);
        }
        record();
    }
    return t;
}

Problem objective_problem(const ObjectiveSpec& spec, double fd_step) {
    spec.validate();
    require(std::isfinite(fd_step) && fd_step > 0.0, "finite-difference step must be positive");
    auto shared = std::make_shared<const ObjectiveSpec>(spec);
    auto to_param = [](const Eigen::VectorXd& x) {
        return ParamPoint(std::vector<double>(x.data(), x.data() + x.size()));
    };
    auto value = [shared, to_param](const Eigen::VectorXd& x) {
        for (Eigen::Index i = 0; i < x.size(); ++i)
            if (!(x[i] > 0.0)) return std::numeric_limits<double>::infinity();
        return objective_value(*shared, to_param(x));
    };
    Problem pb;
    pb.value = value;
    if (spec.eud_only()) {
        pb.gradient = [shared, to_param](const Eigen::VectorXd& x) {
            return objective_grad_eud(*shared, to_param(x));
        };
    } else {
        pb.gradient = [value, fd_step](const Eigen::VectorXd& x) {
            Eigen::VectorXd g(x.size());
            double f0 = std::numeric_limits<double>::quiet_NaN();
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                const double h = fd_step * std::max(1.0, std::abs(x[i]));
                Eigen::VectorXd plus = x;
                plus[i] += h;
                if (x[i] - h > 0.0) {
                    Eigen::VectorXd minus = x;
                    minus[i] -= h;
                    g[i] = (value(plus) - value(minus)) / (2.0 * h);
                } else {
                    if (std::isnan(f0)) f0 = value(x);
                    g[i] = (value(plus) - f0) / h;
                }
            }
            return g;
        };
    }
    pb.seams = [shared, to_param](const Eigen::VectorXd& x) {
        return constraint_arguments(*shared, to_param(x));
    };
    return pb;
}

// ---------------------------------------------------------------------------
// Rate classification

namespace {

double median_of_last(std::vector<double> v, std::size_t n) {
    if (v.size() > n) v.erase(v.begin(), v.end() - static_cast<std::ptrdiff_t>(n));
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace

ConvergenceRate classify_errors(std::span<const double> errors, double floor) {
    std::vector<double> e;
    for (double v : errors) {
        if (!(v > floor)) break;
        e.push_back(v);
    }
    if (e.size() < 3) fail(ErrorCode::InsufficientData, "need at least three errors above the floor");
    std::vector<double> ratios, orders;
    for (std::size_t k = 0; k + 1 < e.size(); ++k) ratios.push_back(e[k + 1] / e[k]);
    for (std::size_t k = 1; k + 1 < e.size(); ++k) {
        const double den = std::log(e[k] / e[k - 1]);
        if (den != 0.0) orders.push_back(std::log(e[k + 1] / e[k]) / den);
    }
    const double r = median_of_last(ratios, 3);
    if (r >= 1.0) return ConvergenceRate::Stalled;
    const double p = orders.empty() ? 1.0 : median_of_last(orders, 3);
    if (p >= 1.8) return ConvergenceRate::Quadratic;
    if (p >= 1.2 || r <= 0.05) return ConvergenceRate::Superlinear;
    if (r >= 0.95) return ConvergenceRate::Sublinear;
    return ConvergenceRate::Linear;
}

ConvergenceRate convergence_classify(const Trace& trace, const std::optional<Eigen::VectorXd>& limit) {
    if (trace.size() < 5) fail(ErrorCode::InsufficientData, "trace needs at least five iterates");
    if (trace.termination == Termination::Stalled) return ConvergenceRate::Stalled;
    const Eigen::VectorXd x_star = limit ? *limit : trace.iterates.back();
    std::vector<double> e;
    for (const auto& x : trace.iterates) e.push_back((x - x_star).norm());
    return classify_errors(e, 1e-14 * (1.0 + x_star.norm()));
}

}  // namespace dvhsmooth
