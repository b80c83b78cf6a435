#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Cholesky>

#include "dvhsmooth/error.hpp"
#include "dvhsmooth/optimizer.hpp"

using namespace dvhsmooth;

namespace {

Problem rosenbrock() {
    Problem p;
    p.value = [](const Eigen::VectorXd& x) {
        return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
    };
    p.gradient = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd g(2);
        g[0] = -400.0 * x[0] * (x[1] - x[0] * x[0]) - 2.0 * (1.0 - x[0]);
        g[1] = 200.0 * (x[1] - x[0] * x[0]);
        return g;
    };
    return p;
}

std::vector<double> geometric(double e0, double ratio, int n) {
    std::vector<double> e{e0};
    for (int k = 1; k < n; ++k) e.push_back(e.back() * ratio);
    return e;
}

}  // namespace

TEST_CASE("Newton on F1 converges quadratically from every start") {
    const auto f1 = make_f1();
    for (double s0 : {-5.0, 0.0, 20.0}) {
        const Trace t = newton1d_run(f1, s0);
        CHECK(t.termination == Termination::Converged);
        CHECK(std::abs(t.iterates.back()[0] - 5.0) < 1e-10);
        CHECK(t.step_sizes.size() + 1 == t.size());
        CHECK(t.values.size() == t.size());
        if (t.size() >= 5) CHECK(convergence_classify(t, Eigen::VectorXd::Constant(1, 5.0)) == ConvergenceRate::Quadratic);
    }
    // From 20 the safeguard is busy at first but the tail is pure Newton.
    CHECK(newton1d_run(f1, 20.0).size() >= 5);
}

TEST_CASE("a start at the minimum is a one-row converged trace") {
    const Trace t = newton1d_run(make_f1(), 5.0);
    CHECK(t.size() == 1);
    CHECK(t.termination == Termination::Converged);
    CHECK(t.step_sizes.empty());
}

TEST_CASE("Newton solves a quadratic in one step") {
    const Trace t = newton1d_run(make_quadratic(3.5), -10.0);
    REQUIRE(t.size() == 2);
    CHECK(t.iterates[1][0] == 3.5);
    CHECK(t.termination == Termination::Converged);
    CHECK_THROWS_AS(convergence_classify(t), Error);
}

TEST_CASE("an infinite one-sided curvature makes the kink a spurious fixed point") {
    const auto f2 = make_f2(0.3);
    CHECK(newton1d_step(f2, 0.0, Side::Left) == 0.0);
    const Trace t = newton1d_run(f2, 0.0);
    CHECK(t.termination == Termination::SpuriousFixedPoint);
    CHECK(t.size() == 1);
    CHECK(t.derivative_norms[0] > 0.1);
    // The right-hand convention sees the smooth branch and walks on to 5.
    NewtonOptions right;
    right.convention = Side::Right;
    const Trace r = newton1d_run(f2, 0.0, right);
    CHECK(r.termination == Termination::Converged);
    CHECK(r.iterates.back()[0] == doctest::Approx(5.0).epsilon(1e-10));
    // A small perturbation is enough to escape.
    const Trace p = newton1d_run(f2, 1e-3);
    CHECK(p.termination == Termination::Converged);
    CHECK(p.iterates.back()[0] == doctest::Approx(5.0).epsilon(1e-10));
}

TEST_CASE("crossing the seam is recorded and can stop the run") {
    const auto f2 = make_f2(0.3);
    const Trace t = newton1d_run(f2, -0.5);
    REQUIRE_FALSE(t.seam_crossings.empty());
    CHECK(t.seam_crossings[0] == 0);
    NewtonOptions stop;
    stop.stop_on_seam = true;
    const Trace s = newton1d_run(f2, -0.5, stop);
    CHECK(s.termination == Termination::SeamCrossed);
    CHECK(s.size() == 2);
}

TEST_CASE("Newton validates its inputs") {
    CHECK_THROWS_AS(newton1d_run(make_f1(), -10.0), Error);
    NewtonOptions bad;
    bad.tol = 0.0;
    CHECK_THROWS_AS(newton1d_run(make_f1(), 1.0, bad), Error);
}

TEST_CASE("BFGS minimises the Rosenbrock function") {
    QuasiNewtonOptions opts;
    opts.grad_tol = 1e-8;
    opts.max_iter = 500;
    const Trace t = bfgs_run(rosenbrock(), Eigen::Vector2d(-1.2, 1.0), opts);
    CHECK(t.termination == Termination::Converged);
    CHECK((t.iterates.back() - Eigen::Vector2d(1, 1)).norm() < 1e-6);
    CHECK(t.derivative_norms.back() < 1e-8);
    // Accepted points never increase the value.
    for (std::size_t k = 1; k < t.size(); ++k) CHECK(t.values[k] <= t.values[k - 1]);
    CHECK(t.line_search_evals.size() == t.step_sizes.size());
    const auto rate = convergence_classify(t, Eigen::Vector2d(1, 1));
    CHECK((rate == ConvergenceRate::Superlinear || rate == ConvergenceRate::Quadratic));
}

TEST_CASE("BFGS on random convex quadratics (property)") {
    std::mt19937_64 rng(1212);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const int m = 2 + trial % 4;
        Eigen::MatrixXd A(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) A(i, j) = n(rng);
        const Eigen::MatrixXd Q = A * A.transpose() + Eigen::MatrixXd::Identity(m, m);
        Eigen::VectorXd b(m), x0(m);
        for (int i = 0; i < m; ++i) {
            b[i] = n(rng);
            x0[i] = n(rng);
        }
        Problem p;
        p.value = [Q, b](const Eigen::VectorXd& x) { return 0.5 * x.dot(Q * x) - b.dot(x); };
        p.gradient = [Q, b](const Eigen::VectorXd& x) { return Eigen::VectorXd(Q * x - b); };
        QuasiNewtonOptions opts;
        opts.grad_tol = 1e-8;
        const Trace t = bfgs_run(p, x0, opts);
        INFO(t.message, " grad ", t.derivative_norms.back());
        CHECK(t.termination == Termination::Converged);
        // |x - x*| <= |g| / lambda_min(Q) and lambda_min >= 1.
        const Eigen::VectorXd x_star = Q.ldlt().solve(b);
        CHECK((t.iterates.back() - x_star).norm() < 1e-8);
    }
}

TEST_CASE("BFGS backtracks out of an infinite region") {
    Problem p;
    p.value = [](const Eigen::VectorXd& x) {
        return x[0] > 0.0 ? x[0] - std::log(x[0]) : std::numeric_limits<double>::infinity();
    };
    p.gradient = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, 1.0 - 1.0 / x[0]); };
    const Trace t = bfgs_run(p, Eigen::VectorXd::Constant(1, 8.0), QuasiNewtonOptions{});
    CHECK(t.termination == Termination::Converged);
    CHECK(t.iterates.back()[0] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("rate classification on synthetic error sequences") {
    std::vector<double> quad{0.5};
    for (int k = 0; k < 4; ++k) quad.push_back(quad.back() * quad.back());
    CHECK(classify_errors(quad) == ConvergenceRate::Quadratic);

    std::vector<double> super{0.5};
    for (int k = 1; k < 7; ++k) super.push_back(std::pow(0.5, std::pow(1.5, k)));
    CHECK(classify_errors(super) == ConvergenceRate::Superlinear);

    CHECK(classify_errors(geometric(1.0, 0.5, 10)) == ConvergenceRate::Linear);
    CHECK(classify_errors(geometric(1.0, 0.9, 10)) == ConvergenceRate::Linear);

    std::vector<double> harmonic;
    for (int k = 20; k <= 40; ++k) harmonic.push_back(1.0 / k);
    CHECK(classify_errors(harmonic) == ConvergenceRate::Sublinear);

    CHECK(classify_errors(std::vector<double>(6, 0.3)) == ConvergenceRate::Stalled);
    CHECK(classify_errors(geometric(1.0, 1.1, 6)) == ConvergenceRate::Stalled);

    // Errors at the floor end the sequence.
    CHECK_THROWS_AS(classify_errors(std::vector<double>{1.0, 0.1, 0.0, 0.0}), Error);
    CHECK(classify_errors(std::vector<double>{1.0, 0.5, 0.25, 0.125, 1e-20}, 1e-15) == ConvergenceRate::Linear);
}

TEST_CASE("names of terminations and rates") {
    CHECK(to_string(Termination::SpuriousFixedPoint) == "spurious-fixed-point");
    CHECK(to_string(Termination::SeamCrossed) == "seam-crossed");
    CHECK(to_string(ConvergenceRate::Sublinear) == "sublinear");
}

TEST_CASE("the weight-space problem differences one-sidedly near zero") {
    Constraint c;
    c.kind = Constraint::Kind::DvMin;
    c.dose_level = 0.3;
    c.volume_fraction = 0.4;
    ObjectiveSpec spec{two_peak_family(), {{Region::default_box(), c}}, QuadratureSpec::grid(16, 2)};
    const double fd = 1e-3;
    const Problem p = objective_problem(spec, fd);
    const Eigen::Vector2d x(5e-4, 1.0);
    CHECK(std::isinf(p.value(Eigen::Vector2d(0.0, 1.0))));
    CHECK(std::isinf(p.value(Eigen::Vector2d(1.0, -1.0))));
    CHECK(p.value(x) == objective_value(spec, ParamPoint{5e-4, 1.0}));
    const Eigen::VectorXd g = p.gradient(x);
    const double f0 = objective_value(spec, ParamPoint{5e-4, 1.0});
    const double fwd = (objective_value(spec, ParamPoint{5e-4 + fd, 1.0}) - f0) / fd;
    const double ctr = (objective_value(spec, ParamPoint{5e-4, 1.0 + fd}) -
                        objective_value(spec, ParamPoint{5e-4, 1.0 - fd})) / (2 * fd);
    CHECK(g[0] == doctest::Approx(fwd).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(ctr).epsilon(1e-12));
    const auto seams = p.seams(x);
    REQUIRE(seams.size() == 1);
    CHECK(seams[0] == constraint_arguments(spec, ParamPoint{5e-4, 1.0})[0]);
    CHECK_THROWS_AS(objective_problem(spec, 0.0), Error);
}

TEST_CASE("EUD-only weight-space problems use the analytic gradient") {
    Constraint c;
    c.kind = Constraint::Kind::EudMin;
    c.dose_level = 0.8;
    c.alpha = -4.0;
    ObjectiveSpec spec{two_peak_family(), {{Region::ball(Vec3(2, 0, 0), 2.5), c}}, QuadratureSpec::grid(12, 2)};
    const Problem p = objective_problem(spec, 1e-3);
    const Eigen::Vector2d x(0.9, 0.4);
    CHECK((p.gradient(x) - objective_grad_eud(spec, ParamPoint{0.9, 0.4})).norm() == 0.0);
}

TEST_CASE("quasi-Newton options are validated") {
    QuasiNewtonOptions o;
    o.wolfe_c2 = o.wolfe_c1 / 2;
    CHECK_THROWS_AS(o.validate(), Error);
    o = {};
    o.grad_tol = -1.0;
    CHECK_THROWS_AS(o.validate(), Error);
    CHECK_NOTHROW(QuasiNewtonOptions{}.validate());
}
