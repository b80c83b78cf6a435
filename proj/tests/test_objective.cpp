#include <doctest.h>

#include <cmath>
#include <random>

#include "dvhsmooth/error.hpp"
#include "dvhsmooth/eud.hpp"
#include "dvhsmooth/objective.hpp"

using namespace dvhsmooth;

namespace {

// Hand-derived 1-D example formulas.
struct Jet {
    double v, d1, d2;
};

Jet u_jet(double s) { return {15.0 / (10 + s), -15.0 / ((10 + s) * (10 + s)), 30.0 / std::pow(10 + s, 3)}; }

Jet square_minus_one(Jet v) { return {(v.v - 1) * (v.v - 1), 2 * (v.v - 1) * v.d1, 2 * (v.d1 * v.d1 + (v.v - 1) * v.d2)}; }

Jet f1_oracle(double s) { return square_minus_one(u_jet(s)); }

Jet f2_oracle(double s, double a) {
    Jet v = u_jet(s);
    if (s < 0) {
        v.v += a * std::pow(-s, 1.5);
        v.d1 -= 1.5 * a * std::sqrt(-s);
        v.d2 += 0.75 * a / std::sqrt(-s);
    }
    return square_minus_one(v);
}

}  // namespace

TEST_CASE("one-sided quadratic penalty") {
    CHECK(penalty(-2.0) == 0.0);
    CHECK(penalty(0.0) == 0.0);
    CHECK(penalty(3.0) == 9.0);
    CHECK(penalty_derivative(-1.0) == 0.0);
    CHECK(penalty_derivative(0.0) == 0.0);
    CHECK(penalty_derivative(1.5) == 3.0);
    CHECK(penalty_second_derivative(-1.0) == 0.0);
    CHECK(penalty_second_derivative(1.0) == 2.0);
    CHECK(penalty_second_derivative(0.0, Side::Left) == 0.0);
    CHECK(penalty_second_derivative(0.0, Side::Right) == 2.0);
}

TEST_CASE("constraint validation and names") {
    Constraint c;
    c.kind = Constraint::Kind::DvMax;
    c.volume_fraction = 1.5;
    CHECK_THROWS_AS(c.validate(), Error);
    c.volume_fraction = 0.2;
    c.weight = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c.weight = 1.0;
    CHECK_NOTHROW(c.validate());
    c.kind = Constraint::Kind::EudMin;
    c.alpha = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
    for (auto k : {Constraint::Kind::DvMin, Constraint::Kind::DvMax, Constraint::Kind::EudMin, Constraint::Kind::EudMax})
        CHECK(constraint_kind_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(constraint_kind_from_string("dv-between"), Error);
}

TEST_CASE("an objective needs at least one term") {
    ObjectiveSpec spec{single_peak_family(), {}, QuadratureSpec::grid(8, 1)};
    CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("penalty arguments follow the min/max sign conventions") {
    const Region ball = Region::ball(Vec3::Zero(), 4.0);
    const auto q = QuadratureSpec::grid(32, 3);
    auto make = [](Constraint::Kind k, double d, double v) {
        Constraint c;
        c.kind = k;
        c.dose_level = d;
        c.volume_fraction = v;
        return c;
    };
    ObjectiveSpec spec{single_peak_family(),
                       {{ball, make(Constraint::Kind::DvMin, 0.5, 0.5)},
                        {ball, make(Constraint::Kind::DvMax, 0.5, 0.0)},
                        {ball, make(Constraint::Kind::EudMin, 2.0, 0.0)},
                        {ball, make(Constraint::Kind::EudMax, 0.0, 0.0)}},
                       q};
    const ParamPoint s{1.0};
    const double v = volume_above(spec.family, s, ball, 0.5, q);
    const double e = eud(spec.family, s, {1.0, ball, q});
    const auto args = constraint_arguments(spec, s);
    REQUIRE(args.size() == 4);
    CHECK(args[0] == 0.5 - v);
    CHECK(args[1] == v);
    CHECK(args[2] == 2.0 - e);
    CHECK(args[3] == e);
    // The level set is the unit ball: V = 1/64.
    CHECK(v == doctest::Approx(1.0 / 64.0).epsilon(2e-3));
    double total = 0.0;
    for (double a : args) total += penalty(a);
    CHECK(objective_value(spec, s) == doctest::Approx(total).epsilon(1e-15));
}

TEST_CASE("analytic gradient of EUD objectives matches differences (property)") {
    std::mt19937_64 rng(909);
    std::uniform_real_distribution<double> w(0.4, 2.0), d(0.1, 1.2);
    const auto q = QuadratureSpec::grid(12, 2);
    for (int trial = 0; trial < 15; ++trial) {
        Constraint lo, hi;
        lo.kind = Constraint::Kind::EudMin;
        lo.dose_level = d(rng) + 0.5;
        lo.alpha = -2.0;
        hi.kind = Constraint::Kind::EudMax;
        hi.dose_level = d(rng) * 0.3;
        hi.alpha = 3.0;
        hi.weight = w(rng);
        ObjectiveSpec spec{two_peak_family(),
                           {{Region::ball(Vec3::Zero(), 1.0), lo}, {Region::ball(Vec3(3, 0, 0), 1.5), hi}},
                           q};
        const ParamPoint s{w(rng), w(rng)};
        const Eigen::VectorXd ga = objective_grad_eud(spec, s);
        const Eigen::VectorXd gf = objective_grad_fd(spec, s, 1e-6);
        for (Eigen::Index j = 0; j < ga.size(); ++j) CHECK(ga[j] == doctest::Approx(gf[j]).epsilon(1e-6).scale(1e-8));
    }
}

TEST_CASE("the analytic gradient refuses dose-volume terms") {
    Constraint c;
    c.kind = Constraint::Kind::DvMax;
    c.dose_level = 0.5;
    c.volume_fraction = 0.1;
    ObjectiveSpec spec{single_peak_family(), {{Region::default_box(), c}}, QuadratureSpec::grid(8, 1)};
    CHECK_FALSE(spec.eud_only());
    CHECK_THROWS_AS(objective_grad_eud(spec, ParamPoint{1.0}), Error);
    CHECK_THROWS_AS(objective_grad_fd(spec, ParamPoint{1.0}, 2.0), Error);
}

TEST_CASE("F1 against hand-derived derivatives") {
    const Scalar1DObjective f1 = make_f1();
    CHECK(f1.minimizer == 5.0);
    CHECK(f1.value(5.0) == 0.0);
    for (double s : {-9.0, -5.0, -0.3, 0.0, 2.0, 5.0, 20.0, 100.0}) {
        const Jet o = f1_oracle(s);
        CHECK(f1.value(s) == doctest::Approx(o.v).epsilon(1e-14));
        CHECK(f1.first(s) == doctest::Approx(o.d1).epsilon(1e-14));
        CHECK(f1.second(s, Side::Left) == doctest::Approx(o.d2).epsilon(1e-14));
    }
    CHECK_FALSE(f1.in_domain(-10.0));
    CHECK(f1.in_domain(-9.99));
}

TEST_CASE("F2 against hand-derived derivatives") {
    for (double a : {0.1, 0.3, 1.0}) {
        const Scalar1DObjective f2 = make_f2(a);
        for (double s : {-5.0, -0.5, -1e-3, -1e-8, 1e-8, 0.5, 5.0}) {
            const Jet o = f2_oracle(s, a);
            CHECK(f2.value(s) == doctest::Approx(o.v).epsilon(1e-13));
            CHECK(f2.first(s) == doctest::Approx(o.d1).epsilon(1e-13));
            CHECK(f2.second(s, Side::Right) == doctest::Approx(o.d2).epsilon(1e-13));
        }
    }
}

TEST_CASE("F2 equals F1 on the right and is C1 but not C2 at the seam") {
    const Scalar1DObjective f1 = make_f1(), f2 = make_f2(0.3);
    for (int i = 0; i <= 40; ++i) {
        const double s = 0.25 * i;
        CHECK(f2.value(s) == f1.value(s));
        CHECK(f2.first(s) == f1.first(s));
    }
    CHECK(f2.flagged == std::vector<double>{0.0});
    CHECK(std::isinf(f2.second(0.0, Side::Left)));
    CHECK(f2.second(0.0, Side::Right) == doctest::Approx(f1.second(0.0, Side::Right)).epsilon(1e-15));
    CHECK(f2.first(-1e-12) == doctest::Approx(f2.first(0.0)).epsilon(1e-5));
    // (-s)^(-1/2): a hundredfold step towards 0 gives about ten times the
    // curvature (9.5486 with the smooth part included).
    CHECK(f2.second(-1e-4, Side::Left) / f2.second(-1e-2, Side::Left) == doctest::Approx(9.548561816530253).epsilon(1e-9));
}

TEST_CASE("root kink has exactly (-s)^(-1/2) curvature on the left") {
    const Scalar1DObjective r = make_root_kink(-1.0);
    for (double s : {-1.0, -1e-2, -1e-6}) CHECK(r.second(s, Side::Left) == doctest::Approx(1.0 / std::sqrt(-s)).epsilon(1e-14));
    CHECK(r.second(1.0, Side::Left) == 0.0);
    CHECK(r.first(-0.25) == doctest::Approx(-1.0 - 2.0 * 0.5).epsilon(1e-14));
    CHECK_THROWS_AS(make_scalar_objective("f3"), Error);
}
