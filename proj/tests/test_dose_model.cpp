#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "dvhsmooth/dose_model.hpp"
#include "dvhsmooth/error.hpp"

using namespace dvhsmooth;

namespace {

// Written out independently of the library's loops.
double field(const std::vector<Peak>& peaks, const std::vector<double>& w, const Vec3& x) {
    double f = 0.0;
    for (std::size_t i = 0; i < peaks.size(); ++i) f += w[i] / (peaks[i].offset + (x - peaks[i].center).squaredNorm());
    return f;
}

// d/dx of the two-peak field on the x axis.
double axis_slope(double x, double w1, double w2) {
    const double a = 1.0 + x * x, b = 2.0 + (x - 4.0) * (x - 4.0);
    return -2.0 * w1 * x / (a * a) - 2.0 * w2 * (x - 4.0) / (b * b);
}

double bisect(double lo, double hi, double w1, double w2) {
    double flo = axis_slope(lo, w1, w2);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = axis_slope(mid, w1, w2);
        if ((fm < 0) == (flo < 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

struct RandomCase {
    std::vector<Peak> peaks;
    std::vector<double> weights;
};

RandomCase random_case(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count(1, 3);
    std::uniform_real_distribution<double> pos(-3.0, 3.0), off(0.5, 3.0), w(0.2, 2.0);
    RandomCase c;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
        c.peaks.push_back({Vec3(pos(rng), pos(rng), pos(rng)), off(rng)});
        c.weights.push_back(w(rng));
    }
    return c;
}

}  // namespace

TEST_CASE("field values match the closed form") {
    const PeakFamily fam = two_peak_family();
    const ParamPoint s{1.0, 1.0};
    CHECK(eval(fam, s, Vec3::Zero()) == doctest::Approx(1.0 + 1.0 / 18.0).epsilon(1e-15));
    CHECK(eval(fam, s, Vec3(4, 0, 0)) == doctest::Approx(1.0 / 17.0 + 0.5).epsilon(1e-15));
    CHECK(eval(single_peak_family(), ParamPoint{2.0}, Vec3(1, 1, 1)) == doctest::Approx(0.5));
}

TEST_CASE("derivatives agree with finite differences on random fields") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (int trial = 0; trial < 40; ++trial) {
        const RandomCase rc = random_case(rng);
        const PeakFamily fam(rc.peaks);
        const ParamPoint s(rc.weights);
        const Vec3 x(u(rng), u(rng), u(rng));
        const double h = 1e-5;
        const Vec3 g = gradient_x(fam, s, x);
        const Mat3 H = hessian_x(fam, s, x);
        for (int i = 0; i < 3; ++i) {
            Vec3 e = Vec3::Zero();
            e[i] = h;
            const double fd = (field(rc.peaks, rc.weights, x + e) - field(rc.peaks, rc.weights, x - e)) / (2 * h);
            CHECK(g[i] == doctest::Approx(fd).epsilon(1e-6).scale(1e-6));
            const Vec3 gd = (gradient_x(fam, s, x + e) - gradient_x(fam, s, x - e)) / (2 * h);
            for (int j = 0; j < 3; ++j) CHECK(H(j, i) == doctest::Approx(gd[j]).epsilon(1e-6).scale(1e-6));
        }
        CHECK((H - H.transpose()).norm() == 0.0);
        const FieldJet jt = jet(fam, s, x);
        CHECK(jt.value == doctest::Approx(field(rc.peaks, rc.weights, x)).epsilon(1e-14));
        CHECK((jt.gradient - g).norm() <= 1e-15 * (1 + g.norm()));
    }
}

TEST_CASE("the field is linear in the weights") {
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> u(-4.0, 4.0), c(0.1, 5.0);
    for (int trial = 0; trial < 30; ++trial) {
        const RandomCase rc = random_case(rng);
        const PeakFamily fam(rc.peaks);
        const ParamPoint s(rc.weights);
        const Vec3 x(u(rng), u(rng), u(rng));
        const double k = c(rng);
        std::vector<double> scaled = rc.weights;
        for (double& w : scaled) w *= k;
        CHECK(eval(fam, ParamPoint(scaled), x) == doctest::Approx(k * eval(fam, s, x)).epsilon(1e-13));
        // grad_sigma is the vector of peak profiles, so f = sigma . grad_sigma.
        const Eigen::VectorXd gs = grad_sigma(fam, s, x);
        const Eigen::VectorXd sv = Eigen::Map<const Eigen::VectorXd>(rc.weights.data(), gs.size());
        CHECK(sv.dot(gs) == doctest::Approx(eval(fam, s, x)).epsilon(1e-13));
    }
}

TEST_CASE("parameter points reject invalid weights") {
    CHECK_THROWS_AS(ParamPoint({-1.0, 1.0}), Error);
    CHECK_THROWS_AS(ParamPoint({0.0, 0.0}), Error);
    CHECK_THROWS_AS(ParamPoint(std::vector<double>{}), Error);
    CHECK_NOTHROW(ParamPoint({0.0, 1.0}));
    CHECK_THROWS_AS(eval(two_peak_family(), ParamPoint{1.0}, Vec3::Zero()), Error);
    CHECK_THROWS_AS(PeakFamily({{Vec3::Zero(), 0.0}}), Error);
}

TEST_CASE("single peak has one maximum with the weight as value") {
    const auto cps = find_critical_points(single_peak_family(), ParamPoint{1.0}, Region::default_box());
    REQUIRE(cps.size() == 1);
    CHECK(cps[0].location.norm() < 1e-9);
    CHECK(cps[0].value == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(cps[0].signature == MorseSignature{0, 3});
}

TEST_CASE("two-peak critical points against an axis bisection oracle") {
    // Oracle values, frozen from the bisection below at w = (1, 1):
    //   max 0.0124482195..., value 1.05570921120313
    //   saddle 2.19137577..., value 0.362063509640739
    //   max 3.94217204..., value 0.559622236246611
    const double xs[3] = {bisect(-1.0, 1.0, 1, 1), bisect(1.0, 3.5, 1, 1), bisect(3.5, 5.0, 1, 1)};
    const std::vector<Peak> peaks = two_peak_family().peaks();
    const std::vector<double> w{1.0, 1.0};
    CHECK(field(peaks, w, Vec3(xs[0], 0, 0)) == doctest::Approx(1.05570921120313).epsilon(1e-13));
    CHECK(field(peaks, w, Vec3(xs[1], 0, 0)) == doctest::Approx(0.362063509640739).epsilon(1e-13));
    CHECK(field(peaks, w, Vec3(xs[2], 0, 0)) == doctest::Approx(0.559622236246611).epsilon(1e-13));

    const auto cps = find_critical_points(two_peak_family(), ParamPoint{1.0, 1.0}, Region::default_box());
    REQUIRE(cps.size() == 3);
    CHECK(cps[0].location[0] == doctest::Approx(xs[0]).epsilon(1e-9));
    CHECK(cps[0].signature == MorseSignature{0, 3});
    CHECK(cps[1].location[0] == doctest::Approx(xs[2]).epsilon(1e-9));
    CHECK(cps[1].value == doctest::Approx(0.559622236246611).epsilon(1e-12));
    CHECK(cps[1].signature == MorseSignature{0, 3});
    CHECK(cps[2].location[0] == doctest::Approx(xs[1]).epsilon(1e-9));
    CHECK(cps[2].signature == MorseSignature{1, 2});
    for (const auto& c : cps) CHECK(c.location.tail<2>().norm() < 1e-9);
}

TEST_CASE("critical points found on random fields are genuine") {
    std::mt19937_64 rng(303);
    for (int trial = 0; trial < 12; ++trial) {
        const RandomCase rc = random_case(rng);
        const PeakFamily fam(rc.peaks);
        const ParamPoint s(rc.weights);
        std::vector<CriticalPoint> cps;
        try {
            cps = find_critical_points(fam, s, Region::default_box());
        } catch (const Error& e) {
            // Two peaks can merge into a degenerate point; that is reported,
            // not misclassified.
            CHECK(e.code() == ErrorCode::DegenerateCriticalPoint);
            continue;
        }
        REQUIRE_FALSE(cps.empty());
        int maxima = 0;
        for (std::size_t i = 0; i < cps.size(); ++i) {
            const auto& c = cps[i];
            CHECK(gradient_x(fam, s, c.location).norm() < 1e-9);
            Eigen::SelfAdjointEigenSolver<Mat3> es(hessian_x(fam, s, c.location));
            int neg = 0;
            for (int k = 0; k < 3; ++k) neg += es.eigenvalues()[k] < 0;
            CHECK(c.signature.negative == neg);
            CHECK(c.signature.positive + c.signature.negative == 3);
            maxima += c.signature == MorseSignature{0, 3};
            if (i > 0) CHECK(cps[i - 1].value >= c.value);
        }
        // The global maximum of a positive field decaying at infinity is a
        // critical point; the finder must return it first.
        CHECK(maxima >= 1);
        CHECK(cps[0].signature == MorseSignature{0, 3});
        CHECK(maxima <= static_cast<int>(rc.peaks.size()));
    }
}

TEST_CASE("classification rejects non-critical and degenerate points") {
    const PeakFamily fam = two_peak_family();
    try {
        classify_critical_point(fam, ParamPoint{1.0, 1.0}, Vec3(1, 0, 0));
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidArgument);
    }
    // Two equal peaks, offset 1, at distance d: the midpoint is a saddle for
    // small d and a maximum for large d; the switch is degenerate. With
    // f = 2/(1 + s^2) per peak half-distance s, f_xx changes sign at s^2 = 1/3.
    const double s = std::sqrt(1.0 / 3.0);
    const PeakFamily pair({{Vec3(-s, 0, 0), 1.0}, {Vec3(s, 0, 0), 1.0}});
    try {
        classify_critical_point(pair, ParamPoint{1.0, 1.0}, Vec3::Zero());
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateCriticalPoint);
    }
}

TEST_CASE("critical value tracking follows the weight") {
    const PeakFamily fam = single_peak_family();
    const ParamPath path = [](double t) { return ParamPoint{t}; };
    const std::vector<double> grid{0.5, 0.75, 1.0, 1.25};
    const auto tr = track_critical_value(fam, path, 0, grid);
    REQUIRE(tr.size() == grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(tr[i].value == doctest::Approx(grid[i]).epsilon(1e-13));

    // Second maximum of the two-peak family moves with its weight.
    const ParamPath p2 = [](double t) { return ParamPoint{1.0, t}; };
    const std::vector<double> g2{1.0, 1.1, 1.2};
    const auto t2 = track_critical_value(two_peak_family(), p2, 1, g2);
    REQUIRE(t2.size() == 3);
    CHECK(t2[0].value == doctest::Approx(0.559622236246611).epsilon(1e-12));
    CHECK(t2[1].value > t2[0].value);
    CHECK(t2[2].value > t2[1].value);
}
